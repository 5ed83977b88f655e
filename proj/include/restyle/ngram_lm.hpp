#pragma once

// SPDX-License-Identifier: Apache-2.0

/**
 * Word n-gram language model for desk-scale perplexity.
 *
 * Each training sentence is tokenized (lowercase, trailing punctuation
 * split off), padded with order-1 "<s>" markers and terminated by "</s>".
 * "</s>" is a predicted symbol and part of the vocabulary; "<s>" only ever
 * appears as context. Out-of-vocabulary words map to "<unk>", which is never
 * observed in training.
 *
 * add_k:  P(w|h) = (c(h,w) + k) / (c(h) + k * (|V| + 1)), |V| + 1 counting
 *         "<unk>". When the denominator is zero (k = 0, unseen context) the
 *         context is shortened by one word.
 * stupid_backoff: c(h,w)/c(h) when c(h,w) > 0, else alpha * S(w|h'); the
 *         unseen words fall through to alpha^order / (N + |V| + 1).
 *         Scores are not normalized.
 */

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "restyle/error.hpp"
#include "restyle/text.hpp"

namespace restyle {

enum class LmSmoothing { AddK, StupidBackoff };

inline std::string_view to_string(LmSmoothing s) {
  return s == LmSmoothing::AddK ? "add_k" : "stupid_backoff";
}

inline LmSmoothing parse_lm_smoothing(std::string_view s) {
  if (s == "add_k") return LmSmoothing::AddK;
  if (s == "stupid_backoff") return LmSmoothing::StupidBackoff;
  throw Error(ErrorCode::InvalidConfig, "unknown LM smoothing: " + std::string(s));
}

struct LmScore {
  double nll_sum = 0.0;  // natural log
  std::size_t token_count = 0;

  double cross_entropy() const { return nll_sum / static_cast<double>(token_count); }
  double perplexity() const { return std::exp(cross_entropy()); }
};

class NgramLanguageModel {
 public:
  static constexpr std::string_view kBos = "<s>";
  static constexpr std::string_view kEos = "</s>";
  static constexpr std::string_view kUnk = "<unk>";

  struct Params {
    int order = 3;
    LmSmoothing smoothing = LmSmoothing::AddK;
    double k = 0.1;
    double backoff_alpha = 0.4;
  };

  static NgramLanguageModel train(const std::vector<std::string>& corpus, const Params& params) {
    if (params.order < 1) throw Error(ErrorCode::InvalidConfig, "LM order must be >= 1");
    if (params.smoothing == LmSmoothing::AddK && !(params.k >= 0))
      throw Error(ErrorCode::InvalidConfig, "add_k requires k >= 0");
    if (params.smoothing == LmSmoothing::StupidBackoff &&
        !(params.backoff_alpha > 0 && params.backoff_alpha <= 1))
      throw Error(ErrorCode::InvalidConfig, "backoff_alpha must be in (0, 1]");

    NgramLanguageModel lm;
    lm.params_ = params;
    lm.tables_.resize(static_cast<std::size_t>(params.order));
    bool any = false;
    for (const auto& line : corpus) {
      auto toks = text::tokenize(line);
      if (toks.empty()) continue;
      any = true;
      for (const auto& t : toks) lm.vocab_.insert(t);
      auto padded = lm.pad(std::move(toks));
      const std::size_t start = static_cast<std::size_t>(params.order - 1);
      for (std::size_t i = start; i < padded.size(); ++i) {
        for (int m = 1; m <= params.order; ++m) {
          Context ctx(padded.begin() + static_cast<std::ptrdiff_t>(i) - (m - 1),
                      padded.begin() + static_cast<std::ptrdiff_t>(i));
          auto& table = lm.tables_[static_cast<std::size_t>(m - 1)][ctx];
          ++table.counts[padded[i]];
          ++table.total;
        }
      }
    }
    if (!any) throw Error(ErrorCode::EmptyCorpus, "LM training corpus has no tokens");
    lm.vocab_.insert(std::string(kEos));
    return lm;
  }

  int order() const { return params_.order; }
  const Params& params() const { return params_; }

  /// Training vocabulary including "</s>", excluding "<unk>".
  const std::set<std::string>& vocabulary() const { return vocab_; }

  /// Every symbol the model assigns probability to: vocabulary plus "<unk>".
  std::vector<std::string> predicted_symbols() const {
    std::vector<std::string> out(vocab_.begin(), vocab_.end());
    out.emplace_back(kUnk);
    return out;
  }

  std::int64_t count(std::span<const std::string> context, const std::string& word) const {
    if (context.size() >= tables_.size()) return 0;
    const auto& level = tables_[context.size()];
    auto it = level.find(Context(context.begin(), context.end()));
    if (it == level.end()) return 0;
    auto w = it->second.counts.find(word);
    return w == it->second.counts.end() ? 0 : w->second;
  }

  /// P(word | context); only the last order-1 context tokens are used. OOV
  /// words in either argument are mapped to "<unk>".
  double prob(const std::string& word, std::span<const std::string> context) const {
    const std::size_t max_ctx = static_cast<std::size_t>(params_.order - 1);
    if (context.size() > max_ctx) context = context.subspan(context.size() - max_ctx);
    Context ctx;
    ctx.reserve(context.size());
    for (const auto& c : context) ctx.push_back(map_context(c));
    return prob_mapped(map_word(word), ctx);
  }

  /// Sum of -ln P over the text's tokens plus the end marker.
  LmScore score(std::string_view sentence) const {
    auto toks = text::tokenize(sentence);
    if (toks.empty()) throw Error(ErrorCode::EmptyText, "cannot score empty text");
    auto padded = pad(std::move(toks));
    LmScore s;
    const std::size_t start = static_cast<std::size_t>(params_.order - 1);
    for (std::size_t i = start; i < padded.size(); ++i) {
      std::span<const std::string> ctx(padded.data() + (i - start), start);
      s.nll_sum -= std::log(prob(padded[i], ctx));
      ++s.token_count;
    }
    return s;
  }

 private:
  using Context = std::vector<std::string>;
  struct Table {
    std::map<std::string, std::int64_t> counts;
    std::int64_t total = 0;
  };

  std::vector<std::string> pad(std::vector<std::string> toks) const {
    std::vector<std::string> padded(static_cast<std::size_t>(params_.order - 1), std::string(kBos));
    padded.insert(padded.end(), std::make_move_iterator(toks.begin()),
                  std::make_move_iterator(toks.end()));
    padded.emplace_back(kEos);
    return padded;
  }

  std::string map_word(const std::string& w) const {
    return vocab_.count(w) ? w : std::string(kUnk);
  }
  std::string map_context(const std::string& w) const {
    return (w == kBos || vocab_.count(w)) ? w : std::string(kUnk);
  }

  const Table* find(const Context& ctx) const {
    const auto& level = tables_[ctx.size()];
    auto it = level.find(ctx);
    return it == level.end() ? nullptr : &it->second;
  }

  double prob_mapped(const std::string& word, const Context& ctx) const {
    const double v1 = static_cast<double>(vocab_.size() + 1);
    if (params_.smoothing == LmSmoothing::AddK) {
      for (std::size_t drop = 0; drop <= ctx.size(); ++drop) {
        Context shorter(ctx.begin() + static_cast<std::ptrdiff_t>(drop), ctx.end());
        const Table* t = find(shorter);
        const double total = t ? static_cast<double>(t->total) : 0.0;
        const double denom = total + params_.k * v1;
        if (denom <= 0) continue;
        double c = 0;
        if (t) {
          auto w = t->counts.find(word);
          if (w != t->counts.end()) c = static_cast<double>(w->second);
        }
        return (c + params_.k) / denom;
      }
      return 0.0;
    }
    double scale = 1.0;
    for (std::size_t drop = 0; drop <= ctx.size(); ++drop) {
      Context shorter(ctx.begin() + static_cast<std::ptrdiff_t>(drop), ctx.end());
      if (const Table* t = find(shorter)) {
        auto w = t->counts.find(word);
        if (w != t->counts.end())
          return scale * static_cast<double>(w->second) / static_cast<double>(t->total);
      }
      scale *= params_.backoff_alpha;
    }
    const Table* uni = find(Context{});
    return scale * 1.0 / (static_cast<double>(uni->total) + v1);
  }

  Params params_;
  std::set<std::string> vocab_;
  std::vector<std::map<Context, Table>> tables_;  // index = context length
};

inline NgramLanguageModel train_ngram_lm(const std::vector<std::string>& corpus, int order,
                                         LmSmoothing smoothing, double param) {
  NgramLanguageModel::Params p;
  p.order = order;
  p.smoothing = smoothing;
  if (smoothing == LmSmoothing::AddK) p.k = param;
  else p.backoff_alpha = param;
  return NgramLanguageModel::train(corpus, p);
}

inline double cross_entropy(std::string_view text, const NgramLanguageModel& lm) {
  return lm.score(text).cross_entropy();
}

inline double perplexity(std::string_view text, const NgramLanguageModel& lm) {
  return lm.score(text).perplexity();
}

/// One sentence per line; blank lines are kept (training skips them).
inline std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  return lines;
}

}  // namespace restyle
