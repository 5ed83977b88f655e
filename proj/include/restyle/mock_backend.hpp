#pragma once

// SPDX-License-Identifier: Apache-2.0

/**
 * Deterministic offline backend.
 *
 * Modes:
 *  - fixtures:  replay scripted outputs keyed by exact prompt (canonical
 *               form) or, failing that, by the source text of the final
 *               query block. Outputs cycle when fewer than n are scripted.
 *  - echo:      every candidate is "{source}".
 *  - synthetic: each candidate applies a seeded transformation of the
 *               source (sentiment antonym swaps, target-word insertion or an
 *               appended flourish, then a small perturbation) and wraps it in
 *               braces. With `invalid_probability` a candidate is instead one
 *               of the structural failure shapes.
 *
 * Candidate i depends only on (prompt bytes, seed, i); the generator is a
 * splitmix64 stream so output is identical on every platform.
 */

#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "restyle/backend.hpp"
#include "restyle/hash.hpp"
#include "restyle/lexicon.hpp"
#include "restyle/measures.hpp"
#include "restyle/text.hpp"

namespace restyle {

struct QueryParts {
  std::string source;
  std::string instruction;
};

/// Source and instruction of the final query block, if it has "{...}".
inline std::optional<QueryParts> extract_query(const RenderedPrompt& prompt) {
  std::string line;
  if (prompt.family == Family::Dialog) {
    if (prompt.turns.empty()) return std::nullopt;
    line = prompt.turns.back().utterance;
  } else {
    const auto nl = prompt.text.rfind('\n');
    line = nl == std::string::npos ? prompt.text : prompt.text.substr(nl + 1);
  }
  const auto close = line.rfind('}');
  if (close == std::string::npos) return std::nullopt;
  const auto open = line.rfind('{', close);
  if (open == std::string::npos) return std::nullopt;
  QueryParts q;
  q.source = line.substr(open + 1, close - open - 1);
  std::string rest = line.substr(close + 1);
  for (std::string_view marker : {"which is ", "Rewrite it to be "}) {
    const auto pos = rest.rfind(marker);
    if (pos != std::string::npos) {
      rest = rest.substr(pos + marker.size());
      break;
    }
  }
  std::string_view instr = text::trim(rest);
  if (!instr.empty() && instr.front() == '.') instr = text::trim(instr.substr(1));
  if (!instr.empty() && instr.back() == '.') instr.remove_suffix(1);
  q.instruction = std::string(instr);
  return q;
}

namespace detail {

class SplitMix {
 public:
  explicit SplitMix(std::uint64_t seed) : state_(seed) {}
  std::uint64_t next() {
    state_ += 0x9e3779b97f4a7c15ULL;
    return splitmix64(state_ - 0x9e3779b97f4a7c15ULL);
  }
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  std::size_t below(std::size_t n) { return n == 0 ? 0 : static_cast<std::size_t>(next() % n); }

 private:
  std::uint64_t state_;
};

inline bool contains_any(const std::string& hay, std::initializer_list<std::string_view> needles) {
  for (auto n : needles)
    if (hay.find(n) != std::string::npos) return true;
  return false;
}

inline std::string join_words(const std::vector<std::string>& words) {
  std::string out;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i) out += ' ';
    out += words[i];
  }
  return out;
}

inline bool is_sentiment_word(const std::string& w) {
  std::size_t end = w.size();
  while (end > 0 && text::is_punct(w[end - 1])) --end;
  const std::string core = text::to_lower(std::string_view(w).substr(0, end));
  return lexicon::is_positive(core) || lexicon::is_negative(core);
}

inline std::string synthesize_rewrite(const QueryParts& q, SplitMix& rng) {
  std::vector<std::string> words;
  for (auto w : text::split_whitespace(q.source)) words.emplace_back(w);
  if (words.empty()) return q.source;

  const std::string instr = text::to_lower(q.instruction);
  const std::map<std::string, std::string>* swaps = nullptr;
  if (contains_any(instr, {"positive", "happier", "optimistic", "cheerful"}))
    swaps = &lexicon::to_positive();
  else if (contains_any(instr, {"negative", "sadder", "pessimistic", "miserable"}))
    swaps = &lexicon::to_negative();

  if (swaps && rng.uniform() < 0.03) {
    // a small share of candidates ignore the instruction
  } else if (swaps) {
    for (auto& w : words) {
      std::size_t end = w.size();
      while (end > 0 && text::is_punct(w[end - 1])) --end;
      const std::string core = text::to_lower(std::string_view(w).substr(0, end));
      auto it = swaps->find(core);
      if (it == swaps->end()) continue;
      std::string repl = it->second;
      if (std::isupper(static_cast<unsigned char>(w[0])))
        repl[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(repl[0])));
      w = repl + w.substr(end);
    }
  } else if (auto target = target_word_from_style(q.instruction)) {
    words.insert(words.begin() + static_cast<std::ptrdiff_t>(rng.below(words.size() + 1)), *target);
  } else if (rng.uniform() < 0.6) {
    static const std::vector<std::string> flourishes = {
        "in the fading light", "with a heavy heart", "as the wind howled",
        "for reasons nobody understood"};
    std::string& last = words.back();
    std::string tail;
    while (!last.empty() && text::is_punct(last.back())) {
      tail.insert(tail.begin(), last.back());
      last.pop_back();
    }
    if (last.empty()) words.pop_back();
    words.push_back(flourishes[rng.below(flourishes.size())] + tail);
  }

  const double r = rng.uniform();
  if (r < 0.3) {
    // unchanged
  } else if (r < 0.55) {
    const std::size_t i = rng.below(words.size());
    if (words.size() > 3 && !is_sentiment_word(words[i]))
      words.erase(words.begin() + static_cast<std::ptrdiff_t>(i));
  } else if (r < 0.8) {
    words.insert(words.begin() + static_cast<std::ptrdiff_t>(rng.below(words.size() + 1)), "really");
  } else if (words.size() > 1) {
    const std::size_t i = rng.below(words.size() - 1);
    std::swap(words[i], words[i + 1]);
  }
  return join_words(words);
}

inline std::string synthesize_invalid(const QueryParts& q, SplitMix& rng) {
  switch (rng.below(5)) {
    case 0: return "Sounds like you are a great writer!";
    case 1: return "Here are more writing tips and tricks.";
    case 2: return "a good rewrite might be to say that it is " + text::to_lower(q.instruction) + ".";
    case 3: return "{}";
    default: return "{" + q.source;
  }
}

}  // namespace detail

class MockBackend : public Backend {
 public:
  explicit MockBackend(const BackendSpec& spec) : spec_(spec) {
    if (!(spec.invalid_probability >= 0.0 && spec.invalid_probability <= 1.0))
      throw Error(ErrorCode::InvalidConfig, "invalid_probability must be in [0, 1]");
    if (spec.mock_mode == MockMode::Fixtures) {
      nlohmann::json fx = spec.fixtures;
      if (!spec.fixtures_path.empty()) {
        std::ifstream in(spec.fixtures_path);
        if (!in) throw Error(ErrorCode::InvalidConfig, "cannot open fixtures " + spec.fixtures_path);
        fx = nlohmann::json::parse(in, nullptr, false);
        if (fx.is_discarded())
          throw Error(ErrorCode::InvalidConfig, "fixtures file is not JSON: " + spec.fixtures_path);
      }
      if (!fx.is_array())
        throw Error(ErrorCode::InvalidConfig, "fixtures must be an array of {prompt|source, outputs}");
      for (const auto& e : fx) {
        if (!e.contains("outputs") || !e["outputs"].is_array() || e["outputs"].empty())
          throw Error(ErrorCode::InvalidConfig, "fixture entry needs nonempty outputs");
        auto outs = e["outputs"].get<std::vector<std::string>>();
        if (e.contains("prompt")) by_prompt_[e["prompt"].get<std::string>()] = std::move(outs);
        else if (e.contains("source")) by_source_[e["source"].get<std::string>()] = std::move(outs);
        else throw Error(ErrorCode::InvalidConfig, "fixture entry needs prompt or source");
      }
    }
  }

  std::string id() const override {
    switch (spec_.mock_mode) {
      case MockMode::Echo: return "mock:echo";
      case MockMode::Fixtures: return "mock:fixtures";
      case MockMode::Synthetic: break;
    }
    return "mock:synthetic";
  }

  CompletionBatch complete(const RenderedPrompt& prompt, const SamplingConfig& cfg) override {
    const std::size_t n = static_cast<std::size_t>(cfg.n_candidates);
    const std::string canonical = prompt.canonical();
    const auto query = extract_query(prompt);
    CompletionBatch batch;
    batch.backend_id = id();

    if (spec_.mock_mode == MockMode::Fixtures) {
      const std::vector<std::string>* outs = nullptr;
      if (auto it = by_prompt_.find(canonical); it != by_prompt_.end()) outs = &it->second;
      else if (query) {
        if (auto s = by_source_.find(query->source); s != by_source_.end()) outs = &s->second;
      }
      if (outs) {
        for (std::size_t i = 0; i < n; ++i) batch.raw_texts.push_back((*outs)[i % outs->size()]);
        return batch;
      }
      if (!spec_.fixtures_fallback)
        throw Error(ErrorCode::BackendUnavailable, "mock has no fixture for this prompt");
    }

    const QueryParts q = query.value_or(QueryParts{std::string(text::trim(canonical)), ""});
    if (spec_.mock_mode == MockMode::Echo) {
      batch.raw_texts.assign(n, "{" + q.source + "}");
      return batch;
    }

    const std::uint64_t seed = cfg.seed.value_or(spec_.seed);
    const std::uint64_t prompt_hash = fnv1a64(canonical);
    for (std::size_t i = 0; i < n; ++i) {
      detail::SplitMix rng(splitmix64(prompt_hash ^ splitmix64(seed)) + i * 0x632be59bd9b4e019ULL);
      std::string out;
      if (rng.uniform() < spec_.invalid_probability) {
        out = detail::synthesize_invalid(q, rng);
      } else {
        out = "{" + detail::synthesize_rewrite(q, rng) + "}";
        if (rng.uniform() < 0.25) out += "\nHere is some text: {" + q.source + "}.";
      }
      batch.raw_texts.push_back(apply_stop_sequences(std::move(out), cfg.stop_sequences));
    }
    return batch;
  }

 private:
  BackendSpec spec_;
  std::map<std::string, std::vector<std::string>> by_prompt_;
  std::map<std::string, std::vector<std::string>> by_source_;
};

}  // namespace restyle
