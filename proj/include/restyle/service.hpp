#pragma once

// SPDX-License-Identifier: Apache-2.0

/**
 * Rewrite service: the full pipeline behind three JSON endpoints.
 *
 *   POST /api/rewrite            {text, instruction, mode?, n?, strategy?, session_id?}
 *   POST /api/feedback           {request_id, chosen_index?, accepted}
 *   GET  /api/requests/summary
 *
 * Every rewrite is logged durably before the response is sent.
 */

#include <chrono>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "restyle/backend.hpp"
#include "restyle/backends.hpp"
#include "restyle/error.hpp"
#include "restyle/parsing.hpp"
#include "restyle/prompting.hpp"
#include "restyle/request_log.hpp"

namespace restyle {

struct ServiceConfig {
  PromptTemplate prompt_template;
  std::vector<Exemplar> few_shot_pool;
  SamplingConfig sampling;  // n from the request overrides n_candidates
  Mode default_mode = Mode::AugmentedZeroShot;
  SelectionStrategy default_strategy = SelectionStrategy::MaxBleuToSource;
  std::size_t max_text_length = 2000;  // code points
  int max_candidates = 64;
  bool refusal_heuristic = false;
  std::string log_path;
};

struct RewriteApiRequest {
  std::string text;
  std::string instruction;
  std::optional<Mode> mode;
  std::optional<int> n;
  std::optional<SelectionStrategy> strategy;
  std::string session_id = "anonymous";

  static RewriteApiRequest from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw Error(ErrorCode::InvalidConfig, "body must be a JSON object");
    RewriteApiRequest r;
    auto str = [&](const char* key, bool required) -> std::optional<std::string> {
      if (!j.contains(key) || j[key].is_null()) {
        if (required) throw Error(ErrorCode::EmptyField, std::string(key) + " is required");
        return std::nullopt;
      }
      if (!j[key].is_string()) throw Error(ErrorCode::InvalidConfig, std::string(key) + " must be a string");
      return j[key].get<std::string>();
    };
    r.text = *str("text", true);
    r.instruction = *str("instruction", true);
    if (auto m = str("mode", false)) r.mode = parse_mode(*m);
    if (auto s = str("strategy", false)) r.strategy = parse_strategy(*s);
    if (auto s = str("session_id", false)) r.session_id = *s;
    if (j.contains("n") && !j["n"].is_null()) {
      if (!j["n"].is_number_integer()) throw Error(ErrorCode::InvalidConfig, "n must be an integer");
      r.n = j["n"].get<int>();
    }
    return r;
  }
};

struct RewriteApiResponse {
  std::string request_id;
  std::vector<Candidate> candidates;
  std::optional<std::size_t> chosen_index;

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json cands = nlohmann::ordered_json::array();
    for (const auto& c : candidates) {
      nlohmann::ordered_json e{{"text", c.is_valid() ? *c.parsed : c.raw}, {"valid", c.is_valid()}};
      if (c.failure) e["failure"] = std::string(to_string(*c.failure));
      cands.push_back(std::move(e));
    }
    nlohmann::ordered_json j{{"request_id", request_id}, {"candidates", std::move(cands)}};
    if (chosen_index) j["chosen_index"] = *chosen_index;
    return j;
  }
};

struct FeedbackApiRequest {
  std::string request_id;
  std::optional<std::size_t> chosen_index;
  bool accepted = false;

  static FeedbackApiRequest from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw Error(ErrorCode::InvalidConfig, "body must be a JSON object");
    FeedbackApiRequest r;
    if (!j.contains("request_id") || !j["request_id"].is_string())
      throw Error(ErrorCode::InvalidConfig, "request_id must be a string");
    if (!j.contains("accepted") || !j["accepted"].is_boolean())
      throw Error(ErrorCode::InvalidConfig, "accepted must be a boolean");
    r.request_id = j["request_id"].get<std::string>();
    r.accepted = j["accepted"].get<bool>();
    if (j.contains("chosen_index") && !j["chosen_index"].is_null()) {
      if (!j["chosen_index"].is_number_unsigned())
        throw Error(ErrorCode::InvalidConfig, "chosen_index must be a non-negative integer");
      r.chosen_index = j["chosen_index"].get<std::size_t>();
    }
    return r;
  }
};

inline int http_status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::EmptyField:
    case ErrorCode::BraceInSource:
    case ErrorCode::InvalidConfig:
    case ErrorCode::MixedInstructions:
    case ErrorCode::ParseError:
    case ErrorCode::EmptySource:
      return 400;
    case ErrorCode::NotFound: return 404;
    case ErrorCode::Conflict: return 409;
    case ErrorCode::BudgetExceeded: return 429;
    case ErrorCode::BackendUnavailable:
    case ErrorCode::AuthError:
      return 502;
    default: return 500;
  }
}

class RewriteService {
 public:
  RewriteService(std::shared_ptr<Backend> backend, ServiceConfig cfg)
      : backend_(std::move(backend)), cfg_(std::move(cfg)), rng_(std::random_device{}()) {
    if (!backend_) throw Error(ErrorCode::InvalidConfig, "service needs a backend");
    cfg_.prompt_template.validate();
    if (cfg_.log_path.empty()) throw Error(ErrorCode::InvalidConfig, "service needs a log path");
    state_ = LogState::read(cfg_.log_path);
    for (const auto& e : state_.entries)
      last_ts_[e.session_id] = std::max(last_ts_[e.session_id], e.timestamp_ms);
    writer_ = std::make_unique<RequestLogWriter>(cfg_.log_path);
  }

  RewriteApiResponse rewrite(const RewriteApiRequest& in) {
    if (text::trim(in.text).empty()) throw Error(ErrorCode::EmptyField, "text is empty");
    if (text::trim(in.instruction).empty()) throw Error(ErrorCode::EmptyField, "instruction is empty");
    if (text::utf8_length(in.text) > cfg_.max_text_length)
      throw Error(ErrorCode::InvalidConfig,
                  "text exceeds " + std::to_string(cfg_.max_text_length) + " characters");
    if (in.n && (*in.n < 1 || *in.n > cfg_.max_candidates))
      throw Error(ErrorCode::InvalidConfig,
                  "n must be in [1, " + std::to_string(cfg_.max_candidates) + "]");

    RewriteRequest req;
    req.source_text = in.text;
    req.instruction = in.instruction;
    req.mode = in.mode.value_or(cfg_.default_mode);
    req.sampling = cfg_.sampling;
    if (in.n) req.sampling.n_candidates = *in.n;
    for (const auto& e : cfg_.few_shot_pool)
      if (e.instruction == in.instruction) req.few_shot_exemplars.push_back(e);

    const RenderedPrompt prompt = render(req, cfg_.prompt_template);
    const CompletionBatch batch = backend_->complete(prompt, req.sampling);
    const RefusalHeuristic heuristic;
    RewriteApiResponse out;
    out.candidates = parse_candidates(batch.raw_texts, cfg_.refusal_heuristic ? &heuristic : nullptr);
    const SelectionOutcome sel =
        select(out.candidates, in.text, in.strategy.value_or(cfg_.default_strategy));
    out.chosen_index = sel.chosen_index;

    RewriteLogEntry entry;
    entry.session_id = in.session_id;
    entry.source_text = in.text;
    entry.instruction = in.instruction;
    entry.mode = std::string(to_string(req.mode));
    if (sel.chosen_index) entry.chosen_text = *out.candidates[*sel.chosen_index].parsed;
    entry.candidate_count = out.candidates.size();
    entry.validity_count = sel.valid_count;

    std::future<void> durable;
    {
      std::lock_guard lock(mu_);
      entry.request_id = mint_id();
      auto& last = last_ts_[entry.session_id];
      entry.timestamp_ms = std::max(now_ms(), last);
      last = entry.timestamp_ms;
      durable = writer_->append(request_line(entry).dump());
    }
    durable.get();
    {
      std::lock_guard lock(mu_);
      state_.index[entry.request_id] = state_.entries.size();
      state_.entries.push_back(entry);
    }
    out.request_id = entry.request_id;
    return out;
  }

  void feedback(const FeedbackApiRequest& fb) {
    std::lock_guard lock(mu_);
    auto it = state_.index.find(fb.request_id);
    if (it == state_.index.end())
      throw Error(ErrorCode::NotFound, "unknown request_id " + fb.request_id);
    RewriteLogEntry& e = state_.entries[it->second];
    if (e.accepted) throw Error(ErrorCode::Conflict, "feedback already recorded for " + fb.request_id);
    if (fb.chosen_index && *fb.chosen_index >= e.candidate_count)
      throw Error(ErrorCode::InvalidConfig, "chosen_index out of range");
    const std::int64_t ts = std::max(now_ms(), last_ts_[e.session_id]);
    last_ts_[e.session_id] = ts;
    // Held under the lock so a concurrent duplicate sees the recorded value.
    writer_->append(feedback_line(fb.request_id, ts, fb.accepted, fb.chosen_index).dump()).get();
    e.accepted = fb.accepted;
    e.feedback_chosen_index = fb.chosen_index;
  }

  nlohmann::ordered_json summary() const {
    std::lock_guard lock(mu_);
    return state_.summary();
  }

  std::string backend_id() const { return backend_->id(); }

 private:
  static std::int64_t now_ms() {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::system_clock::now().time_since_epoch())
        .count();
  }

  // RFC 4122 version 4 layout.
  std::string mint_id() {
    std::uint64_t hi = rng_(), lo = rng_();
    hi = (hi & 0xffffffffffff0fffULL) | 0x0000000000004000ULL;
    lo = (lo & 0x3fffffffffffffffULL) | 0x8000000000000000ULL;
    char buf[37];
    std::snprintf(buf, sizeof buf, "%08x-%04x-%04x-%04x-%012llx", unsigned(hi >> 32),
                  unsigned((hi >> 16) & 0xffff), unsigned(hi & 0xffff), unsigned(lo >> 48),
                  static_cast<unsigned long long>(lo & 0xffffffffffffULL));
    return buf;
  }

  std::shared_ptr<Backend> backend_;
  ServiceConfig cfg_;
  mutable std::mutex mu_;
  LogState state_;
  std::map<std::string, std::int64_t> last_ts_;
  std::mt19937_64 rng_;
  std::unique_ptr<RequestLogWriter> writer_;
};

struct HttpMountOptions {
  std::string cors_origin = "*";
  std::string static_dir;
};

namespace detail {

inline void send_error(httplib::Response& res, ErrorCode code, const std::string& msg) {
  res.status = http_status_for(code);
  res.set_content(nlohmann::ordered_json{{"error", std::string(to_string(code))}, {"message", msg}}.dump(),
                  "application/json");
}

template <typename Fn>
void guarded(httplib::Response& res, Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    send_error(res, e.code(), e.what());
  } catch (const nlohmann::json::exception& e) {
    send_error(res, ErrorCode::InvalidConfig, e.what());
  } catch (const std::exception& e) {
    res.status = 500;
    res.set_content(nlohmann::ordered_json{{"error", "Internal"}, {"message", e.what()}}.dump(),
                    "application/json");
  }
}

inline nlohmann::json parse_body(const httplib::Request& req) {
  nlohmann::json j = nlohmann::json::parse(req.body, nullptr, false);
  if (j.is_discarded()) throw Error(ErrorCode::InvalidConfig, "body is not valid JSON");
  return j;
}

}  // namespace detail

inline void mount_service(httplib::Server& server, RewriteService& service,
                          const HttpMountOptions& opts = {}) {
  if (!opts.cors_origin.empty()) {
    server.set_default_headers({{"Access-Control-Allow-Origin", opts.cors_origin},
                                {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                                {"Access-Control-Allow-Headers", "Content-Type"}});
  }
  server.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) {
    res.status = 204;
  });
  server.Post("/api/rewrite", [&service](const httplib::Request& req, httplib::Response& res) {
    detail::guarded(res, [&] {
      const auto in = RewriteApiRequest::from_json(detail::parse_body(req));
      res.set_content(service.rewrite(in).to_json().dump(), "application/json");
    });
  });
  server.Post("/api/feedback", [&service](const httplib::Request& req, httplib::Response& res) {
    detail::guarded(res, [&] {
      service.feedback(FeedbackApiRequest::from_json(detail::parse_body(req)));
      res.status = 204;
    });
  });
  server.Get("/api/requests/summary", [&service](const httplib::Request&, httplib::Response& res) {
    detail::guarded(res, [&] { res.set_content(service.summary().dump(), "application/json"); });
  });
  server.Get("/api/health", [&service](const httplib::Request&, httplib::Response& res) {
    res.set_content(nlohmann::ordered_json{{"status", "ok"}, {"backend", service.backend_id()}}.dump(),
                    "application/json");
  });
  if (!opts.static_dir.empty() && !server.set_mount_point("/", opts.static_dir))
    throw Error(ErrorCode::InvalidConfig, "static dir does not exist: " + opts.static_dir);
}

}  // namespace restyle
