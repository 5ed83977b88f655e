#pragma once

// SPDX-License-Identifier: Apache-2.0

#include "restyle/error.hpp"
#include "restyle/text.hpp"
#include "restyle/hash.hpp"
#include "restyle/sampling.hpp"
#include "restyle/prompting.hpp"
#include "restyle/bleu.hpp"
#include "restyle/parsing.hpp"
#include "restyle/ngram_lm.hpp"
#include "restyle/concurrency.hpp"
#include "restyle/http.hpp"
#include "restyle/lexicon.hpp"
#include "restyle/measures.hpp"
#include "restyle/classifier.hpp"
#include "restyle/backend.hpp"
#include "restyle/mock_backend.hpp"
#include "restyle/http_backend.hpp"
#include "restyle/backends.hpp"
#include "restyle/dataset.hpp"
#include "restyle/perplexity_scorer.hpp"
#include "restyle/report.hpp"
#include "restyle/harness.hpp"
#include "restyle/request_log.hpp"
#include "restyle/service.hpp"
