#pragma once

// SPDX-License-Identifier: Apache-2.0

#include <memory>
#include <optional>

#include "restyle/backend.hpp"
#include "restyle/http_backend.hpp"
#include "restyle/mock_backend.hpp"

namespace restyle {

/// Validates the spec eagerly and returns a shareable handle. `transport`
/// overrides the HTTP client (tests capture traffic through it).
inline std::shared_ptr<ManagedBackend> register_backend(
    const BackendSpec& spec, std::shared_ptr<HttpTransport> transport = nullptr) {
  if (spec.parallelism < 1) throw Error(ErrorCode::InvalidConfig, "parallelism must be >= 1");
  if (spec.budget && *spec.budget < 0) throw Error(ErrorCode::InvalidConfig, "budget must be >= 0");
  std::unique_ptr<Backend> adapter;
  if (spec.kind == "mock") {
    adapter = std::make_unique<MockBackend>(spec);
  } else if (spec.kind == "generic_http_completion") {
    adapter = std::make_unique<HttpBackend>(spec, HttpBackend::Wire::Completion, transport);
  } else if (spec.kind == "generic_http_chat") {
    adapter = std::make_unique<HttpBackend>(spec, HttpBackend::Wire::Chat, transport);
  } else {
    throw Error(ErrorCode::UnknownAdapter, "unknown backend kind: " + spec.kind);
  }
  std::optional<ResponseCache> cache;
  if (!spec.cache_dir.empty()) cache.emplace(spec.cache_dir);
  return std::make_shared<ManagedBackend>(std::move(adapter), spec.parallelism, spec.budget,
                                          std::move(cache));
}

/// Default sampling for a template family: completion prompts stop at the
/// next "Here is some text:" line.
inline SamplingConfig default_sampling(Family family) {
  SamplingConfig cfg;
  if (family == Family::Completion) cfg.stop_sequences = {kDefaultCompletionStop};
  return cfg;
}

}  // namespace restyle
