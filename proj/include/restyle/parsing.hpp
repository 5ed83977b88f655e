#pragma once

// SPDX-License-Identifier: Apache-2.0

// Delimiter parsing of raw completions and per-request candidate selection.

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "restyle/bleu.hpp"
#include "restyle/error.hpp"
#include "restyle/text.hpp"

namespace restyle {

enum class FailureKind { NoDelimiters, EmptyBraces, Unbalanced, RefusalOrChatter };

inline std::string_view to_string(FailureKind f) {
  switch (f) {
    case FailureKind::NoDelimiters: return "no_delimiters";
    case FailureKind::EmptyBraces: return "empty_braces";
    case FailureKind::Unbalanced: return "unbalanced";
    case FailureKind::RefusalOrChatter: return "refusal_or_chatter";
  }
  return "no_delimiters";
}

inline FailureKind parse_failure_kind(std::string_view s) {
  if (s == "no_delimiters") return FailureKind::NoDelimiters;
  if (s == "empty_braces") return FailureKind::EmptyBraces;
  if (s == "unbalanced") return FailureKind::Unbalanced;
  if (s == "refusal_or_chatter") return FailureKind::RefusalOrChatter;
  throw Error(ErrorCode::InvalidConfig, "unknown failure kind: " + std::string(s));
}

/// Exactly one of `parsed` / `failure` is set.
struct Candidate {
  std::string raw;
  std::optional<std::string> parsed;
  std::optional<FailureKind> failure;

  static Candidate valid(std::string raw, std::string parsed) {
    return {std::move(raw), std::move(parsed), std::nullopt};
  }
  static Candidate invalid(std::string raw, FailureKind kind) {
    return {std::move(raw), std::nullopt, kind};
  }

  bool is_valid() const { return parsed.has_value(); }

  bool operator==(const Candidate&) const = default;
};

inline void to_json(nlohmann::json& j, const Candidate& c) {
  j = {{"raw", c.raw}};
  if (c.parsed) j["parsed"] = *c.parsed;
  if (c.failure) j["failure"] = std::string(to_string(*c.failure));
}

inline void from_json(const nlohmann::json& j, Candidate& c) {
  c.raw = j.at("raw").get<std::string>();
  c.parsed.reset();
  c.failure.reset();
  if (j.contains("parsed")) c.parsed = j.at("parsed").get<std::string>();
  else c.failure = parse_failure_kind(j.at("failure").get<std::string>());
}

/// Optional layer that reclassifies refusals and chatter by phrase match
/// (case-insensitive substring).
struct RefusalHeuristic {
  std::vector<std::string> phrases = {
      "sounds like you are a great writer",
      "here are more writing tips",
      "i cannot",
      "i can't",
      "i'm sorry",
      "as an ai",
  };

  bool matches(std::string_view s) const {
    const std::string lower = text::to_lower(s);
    for (const auto& p : phrases)
      if (!p.empty() && lower.find(text::to_lower(p)) != std::string::npos) return true;
    return false;
  }
};

/// Content of the first brace-free "{...}" span, trimmed. Text outside the
/// span is discarded. When a second "{" opens before the first closes, the
/// span restarts there, so nested input yields the innermost first span.
inline Candidate parse_candidate(std::string raw, const RefusalHeuristic* heuristic = nullptr) {
  const std::size_t first_open = raw.find('{');
  if (first_open == std::string::npos) {
    if (heuristic && heuristic->matches(raw))
      return Candidate::invalid(std::move(raw), FailureKind::RefusalOrChatter);
    return Candidate::invalid(std::move(raw), FailureKind::NoDelimiters);
  }
  std::size_t open = first_open;
  for (std::size_t i = first_open + 1; i < raw.size(); ++i) {
    if (raw[i] == '{') {
      open = i;
    } else if (raw[i] == '}') {
      std::string content(text::trim(std::string_view(raw).substr(open + 1, i - open - 1)));
      if (content.empty()) return Candidate::invalid(std::move(raw), FailureKind::EmptyBraces);
      if (heuristic && heuristic->matches(content))
        return Candidate::invalid(std::move(raw), FailureKind::RefusalOrChatter);
      return Candidate::valid(std::move(raw), std::move(content));
    }
  }
  return Candidate::invalid(std::move(raw), FailureKind::Unbalanced);
}

inline std::vector<Candidate> parse_candidates(const std::vector<std::string>& raws,
                                               const RefusalHeuristic* heuristic = nullptr) {
  std::vector<Candidate> out;
  out.reserve(raws.size());
  for (const auto& r : raws) out.push_back(parse_candidate(r, heuristic));
  return out;
}

inline std::size_t count_valid(const std::vector<Candidate>& candidates) {
  std::size_t n = 0;
  for (const auto& c : candidates) n += c.is_valid() ? 1 : 0;
  return n;
}

inline double validity_rate(const std::vector<Candidate>& candidates) {
  if (candidates.empty()) throw Error(ErrorCode::EmptyInput, "validity_rate of no candidates");
  return static_cast<double>(count_valid(candidates)) / static_cast<double>(candidates.size());
}

enum class SelectionStrategy { FirstValid, MaxBleuToSource };

inline std::string_view to_string(SelectionStrategy s) {
  return s == SelectionStrategy::FirstValid ? "first_valid" : "max_bleu_to_source";
}

inline SelectionStrategy parse_strategy(std::string_view s) {
  if (s == "first_valid") return SelectionStrategy::FirstValid;
  if (s == "max_bleu_to_source") return SelectionStrategy::MaxBleuToSource;
  throw Error(ErrorCode::InvalidConfig, "unknown selection strategy: " + std::string(s));
}

struct SelectionOutcome {
  std::optional<std::size_t> chosen_index;
  SelectionStrategy strategy = SelectionStrategy::FirstValid;
  std::size_t valid_count = 0;
  /// BLEU of the chosen candidate against the source (both strategies).
  std::optional<double> score_of_chosen;

  bool operator==(const SelectionOutcome&) const = default;
};

inline void to_json(nlohmann::json& j, const SelectionOutcome& s) {
  j = {{"strategy", std::string(to_string(s.strategy))}, {"valid_count", s.valid_count}};
  j["chosen_index"] = s.chosen_index ? nlohmann::json(*s.chosen_index) : nlohmann::json(nullptr);
  j["score_of_chosen"] =
      s.score_of_chosen ? nlohmann::json(*s.score_of_chosen) : nlohmann::json(nullptr);
}

inline void from_json(const nlohmann::json& j, SelectionOutcome& s) {
  s.strategy = parse_strategy(j.at("strategy").get<std::string>());
  s.valid_count = j.at("valid_count").get<std::size_t>();
  s.chosen_index.reset();
  s.score_of_chosen.reset();
  if (!j.at("chosen_index").is_null()) s.chosen_index = j.at("chosen_index").get<std::size_t>();
  if (!j.at("score_of_chosen").is_null())
    s.score_of_chosen = j.at("score_of_chosen").get<double>();
}

/// Ties go to the lowest index. No valid candidate leaves chosen_index unset.
inline SelectionOutcome select(const std::vector<Candidate>& candidates, std::string_view source,
                               SelectionStrategy strategy, const BleuConfig& cfg = {}) {
  if (text::trim(source).empty()) throw Error(ErrorCode::EmptySource, "selection needs a source");
  SelectionOutcome out;
  out.strategy = strategy;
  out.valid_count = count_valid(candidates);
  if (out.valid_count == 0) return out;

  const std::vector<Tokens> refs{bleu_tokenize(source, cfg)};
  auto score = [&](const Candidate& c) {
    return sentence_bleu_tokens(bleu_tokenize(*c.parsed, cfg), refs, cfg);
  };

  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (!candidates[i].is_valid()) continue;
    if (strategy == SelectionStrategy::FirstValid) {
      out.chosen_index = i;
      out.score_of_chosen = score(candidates[i]);
      return out;
    }
    const double s = score(candidates[i]);
    if (!out.chosen_index || s > *out.score_of_chosen) {
      out.chosen_index = i;
      out.score_of_chosen = s;
    }
  }
  return out;
}

}  // namespace restyle
