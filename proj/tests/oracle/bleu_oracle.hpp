#pragma once

// SPDX-License-Identifier: Apache-2.0

// Brute-force BLEU used only as a test oracle. Works on pre-split tokens
// and counts n-grams by linear scans, no maps, no shared code with the
// library.

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

namespace oracle {

using Toks = std::vector<std::string>;

inline bool same_gram(const Toks& a, std::size_t i, const Toks& b, std::size_t j, std::size_t n) {
  for (std::size_t t = 0; t < n; ++t)
    if (a[i + t] != b[j + t]) return false;
  return true;
}

inline std::size_t occurrences(const Toks& hay, const Toks& g, std::size_t gi, std::size_t n) {
  std::size_t c = 0;
  if (hay.size() < n) return 0;
  for (std::size_t j = 0; j + n <= hay.size(); ++j) c += same_gram(hay, j, g, gi, n) ? 1 : 0;
  return c;
}

struct Counts {
  std::vector<long> matched, total;
  long c_len = 0, r_len = 0;
};

inline Counts count(const Toks& cand, const std::vector<Toks>& refs, std::size_t max_n) {
  Counts out;
  out.c_len = static_cast<long>(cand.size());
  // closest reference length, shorter on ties
  long best = -1;
  for (const auto& r : refs) {
    const long len = static_cast<long>(r.size());
    const long d = std::labs(len - out.c_len);
    if (best < 0 || d < std::labs(best - out.c_len) || (d == std::labs(best - out.c_len) && len < best))
      best = len;
  }
  out.r_len = best;
  for (std::size_t n = 1; n <= max_n; ++n) {
    long m = 0, t = 0;
    if (cand.size() >= n) {
      for (std::size_t i = 0; i + n <= cand.size(); ++i) {
        ++t;
        // count each distinct gram once, at its first position
        bool seen = false;
        for (std::size_t k = 0; k < i && !seen; ++k) seen = same_gram(cand, k, cand, i, n);
        if (seen) continue;
        const long in_cand = static_cast<long>(occurrences(cand, cand, i, n));
        long in_ref = 0;
        for (const auto& r : refs) in_ref = std::max(in_ref, static_cast<long>(occurrences(r, cand, i, n)));
        m += std::min(in_cand, in_ref);
      }
    }
    out.matched.push_back(m);
    out.total.push_back(t);
  }
  return out;
}

/// epsilon > 0 replaces zero matches for orders above one; epsilon == 0
/// means no smoothing.
inline double score(const Counts& c, double epsilon) {
  if (c.c_len == 0) return 0.0;
  double logs = 0;
  int used = 0;
  for (std::size_t i = 0; i < c.total.size(); ++i) {
    if (c.total[i] == 0) continue;
    double num = static_cast<double>(c.matched[i]);
    if (num == 0) {
      if (i == 0 || epsilon == 0) return 0.0;
      num = epsilon;
    }
    logs += std::log(num / static_cast<double>(c.total[i]));
    ++used;
  }
  if (used == 0) return 0.0;
  const double ratio = static_cast<double>(c.r_len) / static_cast<double>(c.c_len);
  const double bp = ratio > 1.0 ? std::exp(1.0 - ratio) : 1.0;
  return bp * std::exp(logs / used);
}

inline double sentence_bleu(const Toks& cand, const std::vector<Toks>& refs, std::size_t max_n,
                            double epsilon = 1e-9) {
  return score(count(cand, refs, max_n), epsilon);
}

}  // namespace oracle
