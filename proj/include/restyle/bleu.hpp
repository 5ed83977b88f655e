#pragma once

// SPDX-License-Identifier: Apache-2.0

/**
 * BLEU: geometric mean of clipped n-gram precisions times the brevity
 * penalty exp(min(0, 1 - r/c)), r being the closest reference length
 * (shorter wins a tie).
 *
 * Orders with no candidate n-grams (candidate shorter than the order) are
 * left out of the geometric mean. A zero unigram match gives 0 under every
 * smoothing mode; smoothing only touches orders > 1.
 *
 * corpus_bleu pools clipped matches, totals and lengths over all pairs
 * before scoring. It is not the mean of sentence scores.
 */

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "restyle/error.hpp"
#include "restyle/text.hpp"

namespace restyle {

enum class BleuSmoothing { None, Epsilon, AddK };
enum class BleuTokenizer { WhitespaceLower, WhitespaceCased };

struct BleuConfig {
  int max_order = 4;
  BleuSmoothing smoothing = BleuSmoothing::Epsilon;
  double epsilon = 1e-9;
  double k = 1.0;
  BleuTokenizer tokenizer = BleuTokenizer::WhitespaceLower;

  void validate() const {
    if (max_order < 1) throw Error(ErrorCode::InvalidConfig, "max_order must be >= 1");
    if (smoothing == BleuSmoothing::Epsilon && !(epsilon > 0))
      throw Error(ErrorCode::InvalidConfig, "epsilon must be positive");
    if (smoothing == BleuSmoothing::AddK && !(k > 0))
      throw Error(ErrorCode::InvalidConfig, "k must be positive");
  }
};

using Tokens = std::vector<std::string>;

inline Tokens bleu_tokenize(std::string_view s, const BleuConfig& cfg) {
  return text::tokenize(s, cfg.tokenizer == BleuTokenizer::WhitespaceLower ? text::Casing::Lower
                                                                           : text::Casing::Preserve);
}

/// Sufficient statistics; additive across sentences.
struct BleuStats {
  std::vector<std::int64_t> matches;  // index n-1
  std::vector<std::int64_t> totals;
  std::int64_t candidate_length = 0;
  std::int64_t reference_length = 0;

  explicit BleuStats(int max_order = 4)
      : matches(static_cast<std::size_t>(max_order), 0),
        totals(static_cast<std::size_t>(max_order), 0) {}

  BleuStats& operator+=(const BleuStats& o) {
    for (std::size_t i = 0; i < matches.size() && i < o.matches.size(); ++i) {
      matches[i] += o.matches[i];
      totals[i] += o.totals[i];
    }
    candidate_length += o.candidate_length;
    reference_length += o.reference_length;
    return *this;
  }
};

namespace detail {

using NgramCounts = std::map<std::vector<std::string_view>, std::int64_t>;

inline NgramCounts count_ngrams(const Tokens& toks, std::size_t n) {
  NgramCounts counts;
  if (toks.size() < n) return counts;
  for (std::size_t i = 0; i + n <= toks.size(); ++i) {
    std::vector<std::string_view> key(toks.begin() + static_cast<std::ptrdiff_t>(i),
                                      toks.begin() + static_cast<std::ptrdiff_t>(i + n));
    ++counts[std::move(key)];
  }
  return counts;
}

inline std::int64_t closest_length(std::int64_t c, const std::vector<Tokens>& refs) {
  std::int64_t best = -1;
  for (const auto& r : refs) {
    auto len = static_cast<std::int64_t>(r.size());
    if (best < 0 || std::abs(len - c) < std::abs(best - c) ||
        (std::abs(len - c) == std::abs(best - c) && len < best))
      best = len;
  }
  return best;
}

}  // namespace detail

inline BleuStats bleu_stats(const Tokens& candidate, const std::vector<Tokens>& references,
                            int max_order) {
  BleuStats s(max_order);
  s.candidate_length = static_cast<std::int64_t>(candidate.size());
  s.reference_length = detail::closest_length(s.candidate_length, references);
  for (int n = 1; n <= max_order; ++n) {
    auto cand = detail::count_ngrams(candidate, static_cast<std::size_t>(n));
    detail::NgramCounts max_ref;
    for (const auto& r : references) {
      for (auto& [gram, count] : detail::count_ngrams(r, static_cast<std::size_t>(n))) {
        auto& slot = max_ref[gram];
        slot = std::max(slot, count);
      }
    }
    std::int64_t matched = 0, total = 0;
    for (const auto& [gram, count] : cand) {
      total += count;
      auto it = max_ref.find(gram);
      if (it != max_ref.end()) matched += std::min(count, it->second);
    }
    s.matches[static_cast<std::size_t>(n - 1)] = matched;
    s.totals[static_cast<std::size_t>(n - 1)] = total;
  }
  return s;
}

inline double bleu_from_stats(const BleuStats& s, const BleuConfig& cfg) {
  if (s.candidate_length == 0) return 0.0;
  double log_sum = 0.0;
  int included = 0;
  for (std::size_t i = 0; i < s.totals.size(); ++i) {
    const auto total = s.totals[i];
    if (total == 0) continue;
    const auto matched = s.matches[i];
    double p = 0.0;
    if (i == 0 || cfg.smoothing == BleuSmoothing::None) {
      if (matched == 0) return 0.0;
      p = static_cast<double>(matched) / static_cast<double>(total);
    } else if (cfg.smoothing == BleuSmoothing::Epsilon) {
      p = (matched == 0 ? cfg.epsilon : static_cast<double>(matched)) / static_cast<double>(total);
    } else {
      p = (static_cast<double>(matched) + cfg.k) / (static_cast<double>(total) + cfg.k);
    }
    log_sum += std::log(p);
    ++included;
  }
  if (included == 0) return 0.0;
  const double c = static_cast<double>(s.candidate_length);
  const double r = static_cast<double>(s.reference_length);
  const double bp = std::exp(std::min(0.0, 1.0 - r / c));
  return std::clamp(bp * std::exp(log_sum / included), 0.0, 1.0);
}

inline double sentence_bleu_tokens(const Tokens& candidate, const std::vector<Tokens>& references,
                                   const BleuConfig& cfg = {}) {
  if (references.empty()) throw Error(ErrorCode::NoReferences, "sentence_bleu needs a reference");
  cfg.validate();
  return bleu_from_stats(bleu_stats(candidate, references, cfg.max_order), cfg);
}

inline double sentence_bleu(std::string_view candidate, const std::vector<std::string>& references,
                            const BleuConfig& cfg = {}) {
  if (references.empty()) throw Error(ErrorCode::NoReferences, "sentence_bleu needs a reference");
  std::vector<Tokens> refs;
  refs.reserve(references.size());
  for (const auto& r : references) refs.push_back(bleu_tokenize(r, cfg));
  return sentence_bleu_tokens(bleu_tokenize(candidate, cfg), refs, cfg);
}

struct BleuPair {
  std::string candidate;
  std::vector<std::string> references;
};

inline double corpus_bleu(const std::vector<BleuPair>& pairs, const BleuConfig& cfg = {}) {
  if (pairs.empty()) throw Error(ErrorCode::EmptyInput, "corpus_bleu needs at least one pair");
  cfg.validate();
  BleuStats pooled(cfg.max_order);
  for (const auto& p : pairs) {
    if (p.references.empty())
      throw Error(ErrorCode::NoReferences, "corpus_bleu pair without references");
    std::vector<Tokens> refs;
    for (const auto& r : p.references) refs.push_back(bleu_tokenize(r, cfg));
    pooled += bleu_stats(bleu_tokenize(p.candidate, cfg), refs, cfg.max_order);
  }
  return bleu_from_stats(pooled, cfg);
}

}  // namespace restyle
