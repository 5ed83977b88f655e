#pragma once

// SPDX-License-Identifier: Apache-2.0

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "restyle/concurrency.hpp"
#include "restyle/error.hpp"
#include "restyle/hash.hpp"
#include "restyle/http.hpp"
#include "restyle/prompting.hpp"
#include "restyle/sampling.hpp"

namespace restyle {

struct CompletionBatch {
  std::vector<std::string> raw_texts;
  std::string backend_id;
  std::int64_t latency_ms = 0;
};

class Backend {
 public:
  virtual ~Backend() = default;
  virtual std::string id() const = 0;
  virtual CompletionBatch complete(const RenderedPrompt& prompt, const SamplingConfig& cfg) = 0;
};

enum class MockMode { Synthetic, Echo, Fixtures };

/// Backend configuration file contents.
struct BackendSpec {
  std::string kind;  // generic_http_completion | generic_http_chat | mock
  std::string endpoint;
  std::string auth_env_var;
  std::string model_name;
  int parallelism = 4;
  std::string cache_dir;
  std::optional<std::int64_t> budget;  // max uncached calls per handle
  std::chrono::milliseconds timeout{30000};
  RetryPolicy retry;

  // mock only
  MockMode mock_mode = MockMode::Synthetic;
  double invalid_probability = 0.0;
  std::uint64_t seed = 0;
  std::string fixtures_path;
  nlohmann::json fixtures;  // inline alternative to fixtures_path
  bool fixtures_fallback = false;

  static BackendSpec from_json(const nlohmann::json& j) {
    BackendSpec s;
    try {
      s.kind = j.at("kind").get<std::string>();
      s.endpoint = j.value("endpoint", "");
      s.auth_env_var = j.value("auth_env_var", "");
      s.model_name = j.value("model_name", "");
      s.parallelism = j.value("parallelism", s.parallelism);
      s.cache_dir = j.value("cache_dir", "");
      if (j.contains("budget") && !j["budget"].is_null()) s.budget = j["budget"].get<std::int64_t>();
      s.timeout = std::chrono::milliseconds(j.value("timeout_ms", std::int64_t{30000}));
      if (j.contains("retry")) {
        const auto& r = j["retry"];
        s.retry.max_attempts = r.value("max_attempts", s.retry.max_attempts);
        s.retry.base_delay = std::chrono::milliseconds(r.value("base_delay_ms", std::int64_t{200}));
        s.retry.max_delay = std::chrono::milliseconds(r.value("max_delay_ms", std::int64_t{5000}));
      }
      const std::string mode = j.value("mode", "synthetic");
      if (mode == "synthetic") s.mock_mode = MockMode::Synthetic;
      else if (mode == "echo") s.mock_mode = MockMode::Echo;
      else if (mode == "fixtures") s.mock_mode = MockMode::Fixtures;
      else throw Error(ErrorCode::InvalidConfig, "unknown mock mode: " + mode);
      s.invalid_probability = j.value("invalid_probability", 0.0);
      s.seed = j.value("seed", std::uint64_t{0});
      s.fixtures_path = j.value("fixtures_path", "");
      if (j.contains("fixtures")) s.fixtures = j["fixtures"];
      s.fixtures_fallback = j.value("fixtures_fallback", false);
    } catch (const nlohmann::json::exception& ex) {
      throw Error(ErrorCode::InvalidConfig, std::string("bad backend config: ") + ex.what());
    }
    return s;
  }

  /// Relative fixture/cache paths resolve against the config file's directory.
  static BackendSpec load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open backend config " + path);
    nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded()) throw Error(ErrorCode::InvalidConfig, "backend config is not JSON: " + path);
    BackendSpec s = from_json(j);
    const auto base = std::filesystem::path(path).parent_path();
    auto resolve = [&](std::string& p) {
      if (!p.empty() && std::filesystem::path(p).is_relative()) p = (base / p).string();
    };
    resolve(s.fixtures_path);
    resolve(s.cache_dir);
    return s;
  }
};

/// On-disk response cache: one JSON file per request hash, written
/// atomically (temp file, then rename).
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::filesystem::create_directories(dir_);
  }

  static std::string key(const std::string& backend_id, const RenderedPrompt& prompt,
                         const SamplingConfig& cfg) {
    nlohmann::json j = {{"backend", backend_id},
                        {"family", std::string(to_string(prompt.family))},
                        {"prompt", prompt.canonical()},
                        {"n", cfg.n_candidates},
                        {"temperature", cfg.temperature},
                        {"max_output_length", cfg.max_output_length},
                        {"stop", cfg.stop_sequences}};
    j["seed"] = cfg.seed ? nlohmann::json(*cfg.seed) : nlohmann::json(nullptr);
    return sha256_hex(j.dump());
  }

  std::optional<CompletionBatch> get(const std::string& key) const {
    std::ifstream in(dir_ / (key + ".json"));
    if (!in) return std::nullopt;
    nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded()) return std::nullopt;
    CompletionBatch b;
    b.raw_texts = j.at("raw_texts").get<std::vector<std::string>>();
    b.backend_id = j.value("backend_id", "");
    return b;
  }

  void put(const std::string& key, const CompletionBatch& batch) const {
    static std::atomic<std::uint64_t> counter{0};
    const auto final_path = dir_ / (key + ".json");
    std::ostringstream tmp_name;
    tmp_name << key << ".tmp." << std::hash<std::thread::id>{}(std::this_thread::get_id()) << "."
             << counter++;
    const auto tmp_path = dir_ / tmp_name.str();
    {
      std::ofstream out(tmp_path, std::ios::binary | std::ios::trunc);
      if (!out) throw Error(ErrorCode::IoError, "cannot write cache entry " + tmp_path.string());
      out << nlohmann::json{{"raw_texts", batch.raw_texts}, {"backend_id", batch.backend_id}}.dump();
    }
    std::filesystem::rename(tmp_path, final_path);
  }

 private:
  std::filesystem::path dir_;
};

/// Wraps an adapter with the in-flight limit, call budget and response cache.
/// Cache hits do not consume budget.
class ManagedBackend : public Backend {
 public:
  ManagedBackend(std::unique_ptr<Backend> inner, int parallelism,
                 std::optional<std::int64_t> budget, std::optional<ResponseCache> cache)
      : inner_(std::move(inner)),
        slots_(parallelism),
        budget_(budget),
        cache_(std::move(cache)) {}

  std::string id() const override { return inner_->id(); }

  CompletionBatch complete(const RenderedPrompt& prompt, const SamplingConfig& cfg) override {
    if (prompt.empty()) throw Error(ErrorCode::EmptyField, "prompt is empty");
    cfg.validate();
    std::string key;
    if (cache_) {
      key = ResponseCache::key(inner_->id(), prompt, cfg);
      if (auto hit = cache_->get(key); hit && hit->raw_texts.size() == std::size_t(cfg.n_candidates)) {
        hit->backend_id = inner_->id();
        return *hit;
      }
    }
    if (budget_) {
      if (calls_.fetch_add(1) >= *budget_) {
        calls_.fetch_sub(1);
        throw Error(ErrorCode::BudgetExceeded,
                    "call budget of " + std::to_string(*budget_) + " exhausted");
      }
    }
    CompletionBatch batch;
    {
      SemaphoreGuard guard(slots_);
      const auto start = std::chrono::steady_clock::now();
      batch = inner_->complete(prompt, cfg);
      batch.latency_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                             std::chrono::steady_clock::now() - start)
                             .count();
    }
    if (cache_) cache_->put(key, batch);
    return batch;
  }

  std::int64_t calls_made() const { return calls_.load(); }

 private:
  std::unique_ptr<Backend> inner_;
  Semaphore slots_;
  std::optional<std::int64_t> budget_;
  std::optional<ResponseCache> cache_;
  std::atomic<std::int64_t> calls_{0};
};

/// Cuts text at the earliest occurrence of any stop sequence.
inline std::string apply_stop_sequences(std::string text, const std::vector<std::string>& stops) {
  std::size_t cut = std::string::npos;
  for (const auto& s : stops) {
    if (s.empty()) continue;
    cut = std::min(cut, text.find(s));
  }
  if (cut != std::string::npos) text.resize(cut);
  return text;
}

}  // namespace restyle
