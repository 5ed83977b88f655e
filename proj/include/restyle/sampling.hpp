#pragma once

// SPDX-License-Identifier: Apache-2.0

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "restyle/error.hpp"

namespace restyle {

/// Boundary that stops a completion model from continuing the exemplar pattern.
inline const std::string kDefaultCompletionStop = "\nHere is some text:";

struct SamplingConfig {
  int n_candidates = 16;
  double temperature = 1.0;
  int max_output_length = 128;
  std::vector<std::string> stop_sequences;
  std::optional<std::uint64_t> seed;  // honored by the mock backend only

  void validate() const {
    if (n_candidates < 1) throw Error(ErrorCode::InvalidConfig, "n_candidates must be >= 1");
    if (!(temperature >= 0.0)) throw Error(ErrorCode::InvalidConfig, "temperature must be >= 0");
    if (max_output_length < 1)
      throw Error(ErrorCode::InvalidConfig, "max_output_length must be >= 1");
  }
};

}  // namespace restyle
