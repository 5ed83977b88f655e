#pragma once

// SPDX-License-Identifier: Apache-2.0

/**
 * Adapters for OpenAI-style HTTP APIs.
 *
 * generic_http_completion:
 *   POST {"model","prompt","n","temperature","max_tokens","stop"}
 *   -> {"choices":[{"text": ...}, ...]}
 *   Dialog prompts are flattened with flatten_turns().
 *
 * generic_http_chat:
 *   POST {"model","messages":[{"role","content"}],"n","temperature","max_tokens","stop"}
 *   -> {"choices":[{"message":{"content": ...}}, ...]}
 *   Completion prompts are sent as one user message.
 *
 * If the API returns fewer choices than requested the adapter asks again for
 * the remainder. 401/403 map to AuthError; transient failures are retried
 * by post_with_retry and surface as BackendUnavailable.
 */

#include <cstdlib>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "restyle/backend.hpp"
#include "restyle/http.hpp"

namespace restyle {

class HttpBackend : public Backend {
 public:
  enum class Wire { Completion, Chat };

  HttpBackend(const BackendSpec& spec, Wire wire, std::shared_ptr<HttpTransport> transport)
      : spec_(spec), wire_(wire), transport_(std::move(transport)) {
    if (spec_.endpoint.empty()) throw Error(ErrorCode::InvalidConfig, spec_.kind + " needs endpoint");
    parse_url(spec_.endpoint);
    if (!spec_.auth_env_var.empty()) {
      const char* v = std::getenv(spec_.auth_env_var.c_str());
      if (!v || !*v)
        throw Error(ErrorCode::InvalidConfig,
                    "environment variable " + spec_.auth_env_var + " is not set");
      token_ = v;
    }
    if (!transport_) transport_ = std::make_shared<HttplibTransport>();
  }

  std::string id() const override {
    return spec_.kind + ":" + (spec_.model_name.empty() ? spec_.endpoint : spec_.model_name);
  }

  /// Request body for `n` continuations; exposed for wire-format tests.
  nlohmann::json request_body(const RenderedPrompt& prompt, const SamplingConfig& cfg, int n) const {
    nlohmann::json body;
    if (!spec_.model_name.empty()) body["model"] = spec_.model_name;
    if (wire_ == Wire::Completion) {
      body["prompt"] = prompt.canonical();
    } else {
      nlohmann::json messages = nlohmann::json::array();
      if (prompt.family == Family::Dialog) {
        for (const auto& t : prompt.turns)
          messages.push_back({{"role", std::string(to_string(t.speaker))}, {"content", t.utterance}});
      } else {
        messages.push_back({{"role", "user"}, {"content", prompt.text}});
      }
      body["messages"] = std::move(messages);
    }
    body["n"] = n;
    body["temperature"] = cfg.temperature;
    body["max_tokens"] = cfg.max_output_length;
    if (!cfg.stop_sequences.empty()) body["stop"] = cfg.stop_sequences;
    return body;
  }

  CompletionBatch complete(const RenderedPrompt& prompt, const SamplingConfig& cfg) override {
    CompletionBatch batch;
    batch.backend_id = id();
    HttpHeaders headers{{"Content-Type", "application/json"}};
    if (!token_.empty()) headers["Authorization"] = "Bearer " + token_;

    while (static_cast<int>(batch.raw_texts.size()) < cfg.n_candidates) {
      const int remaining = cfg.n_candidates - static_cast<int>(batch.raw_texts.size());
      HttpResponse res = post_with_retry(*transport_, spec_.endpoint,
                                         request_body(prompt, cfg, remaining).dump(), headers,
                                         spec_.timeout, spec_.retry);
      if (res.status == 401 || res.status == 403)
        throw Error(ErrorCode::AuthError, id() + " rejected credentials (" +
                                              std::to_string(res.status) + ")");
      if (res.status < 200 || res.status >= 300)
        throw Error(ErrorCode::BackendUnavailable,
                    id() + " failed with status " + std::to_string(res.status) + ": " + res.body);
      std::vector<std::string> texts;
      try {
        const nlohmann::json reply = nlohmann::json::parse(res.body);
        for (const auto& choice : reply.at("choices")) {
          if (wire_ == Wire::Completion) texts.push_back(choice.at("text").get<std::string>());
          else texts.push_back(choice.at("message").at("content").get<std::string>());
        }
      } catch (const nlohmann::json::exception& ex) {
        throw Error(ErrorCode::BackendUnavailable, id() + " returned malformed JSON: " + ex.what());
      }
      if (texts.empty()) throw Error(ErrorCode::BackendUnavailable, id() + " returned no choices");
      for (auto& t : texts) {
        if (static_cast<int>(batch.raw_texts.size()) == cfg.n_candidates) break;
        batch.raw_texts.push_back(apply_stop_sequences(std::move(t), cfg.stop_sequences));
      }
    }
    return batch;
  }

 private:
  BackendSpec spec_;
  Wire wire_;
  std::shared_ptr<HttpTransport> transport_;
  std::string token_;
};

}  // namespace restyle
