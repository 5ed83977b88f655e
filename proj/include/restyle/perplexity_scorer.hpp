#pragma once

// SPDX-License-Identifier: Apache-2.0

// Pluggable fluency scorers. The HTTP scorer speaks
// POST {"text": ...} -> {"nll_sum": <natural-log NLL>, "token_count": n}.

#include <chrono>
#include <memory>
#include <string>

#include <json.hpp>

#include "restyle/error.hpp"
#include "restyle/http.hpp"
#include "restyle/ngram_lm.hpp"

namespace restyle {

class PerplexityScorer {
 public:
  virtual ~PerplexityScorer() = default;
  virtual LmScore score(const std::string& text) = 0;
};

class NgramPerplexityScorer : public PerplexityScorer {
 public:
  explicit NgramPerplexityScorer(NgramLanguageModel lm) : lm_(std::move(lm)) {}
  LmScore score(const std::string& text) override { return lm_.score(text); }
  const NgramLanguageModel& model() const { return lm_; }

 private:
  NgramLanguageModel lm_;
};

class HttpPerplexityScorer : public PerplexityScorer {
 public:
  HttpPerplexityScorer(std::string endpoint, std::shared_ptr<HttpTransport> transport = nullptr,
                       std::chrono::milliseconds timeout = std::chrono::milliseconds(10000),
                       RetryPolicy retry = {})
      : endpoint_(std::move(endpoint)), transport_(std::move(transport)), timeout_(timeout), retry_(retry) {
    parse_url(endpoint_);
    if (!transport_) transport_ = std::make_shared<HttplibTransport>();
  }

  LmScore score(const std::string& text) override {
    HttpResponse res = post_with_retry(*transport_, endpoint_, nlohmann::json{{"text", text}}.dump(),
                                       {{"Content-Type", "application/json"}}, timeout_, retry_);
    if (res.status < 200 || res.status >= 300)
      throw Error(ErrorCode::BackendUnavailable,
                  "perplexity scorer returned status " + std::to_string(res.status));
    try {
      auto j = nlohmann::json::parse(res.body);
      LmScore s{j.at("nll_sum").get<double>(), j.at("token_count").get<std::size_t>()};
      if (s.token_count == 0) throw Error(ErrorCode::EmptyText, "scorer returned zero tokens");
      return s;
    } catch (const nlohmann::json::exception& ex) {
      throw Error(ErrorCode::BackendUnavailable, std::string("bad scorer reply: ") + ex.what());
    }
  }

 private:
  std::string endpoint_;
  std::shared_ptr<HttpTransport> transport_;
  std::chrono::milliseconds timeout_;
  RetryPolicy retry_;
};

}  // namespace restyle
