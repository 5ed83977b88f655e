#pragma once

// SPDX-License-Identifier: Apache-2.0

// Automatic checks for arbitrary styles: target-word insertion and length
// expansion.

#include <optional>
#include <regex>
#include <string>
#include <string_view>
#include <vector>

#include "restyle/error.hpp"
#include "restyle/text.hpp"

namespace restyle {

namespace detail {

/// Lowercased word pieces: whitespace and any punctuation other than the
/// apostrophe separate words; apostrophes at piece edges are stripped.
/// Typographic single quotes are folded to ASCII first.
inline std::vector<std::string> inclusion_words(std::string_view s) {
  std::string folded = text::replace_all(std::string(s), "\xE2\x80\x99", "'");
  folded = text::replace_all(std::move(folded), "\xE2\x80\x98", "'");
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    std::size_t b = 0, e = cur.size();
    while (b < e && cur[b] == '\'') ++b;
    while (e > b && cur[e - 1] == '\'') --e;
    if (e > b) out.push_back(cur.substr(b, e - b));
    cur.clear();
  };
  for (char c : folded) {
    if (text::is_space(c) || (text::is_punct(c) && c != '\'')) flush();
    else cur.push_back(text::ascii_lower(c));
  }
  flush();
  return out;
}

}  // namespace detail

/// True iff some output word equals target_word, target_word + "s" or
/// target_word + "'s" (case and surrounding punctuation ignored).
inline bool word_inclusion(std::string_view output, std::string_view target_word) {
  const std::string target = text::to_lower(text::trim(target_word));
  if (target.empty()) throw Error(ErrorCode::EmptyField, "target word is empty");
  const std::string plural = target + "s";
  const std::string possessive = target + "'s";
  for (const auto& w : detail::inclusion_words(output))
    if (w == target || w == plural || w == possessive) return true;
  return false;
}

/// Extracts X from styles like "include the word 'X'" / "includes the word \"X\"".
inline std::optional<std::string> target_word_from_style(std::string_view style) {
  static const std::regex re(R"(includes? the word\s+['"`]?([A-Za-z0-9][A-Za-z0-9'-]*?)['"`]?\s*$)",
                             std::regex::icase);
  std::string s = text::replace_all(std::string(text::trim(style)), "\xE2\x80\x98", "'");
  s = text::replace_all(std::move(s), "\xE2\x80\x99", "'");
  s = text::replace_all(std::move(s), "\xE2\x80\x9C", "\"");
  s = text::replace_all(std::move(s), "\xE2\x80\x9D", "\"");
  std::smatch m;
  if (std::regex_search(s, m, re)) return text::to_lower(m[1].str());
  return std::nullopt;
}

/// Character (code point) count of output over that of source.
inline double length_ratio(std::string_view output, std::string_view source) {
  const auto src = text::utf8_length(source);
  if (src == 0) throw Error(ErrorCode::EmptySource, "length_ratio with empty source");
  return static_cast<double>(text::utf8_length(output)) / static_cast<double>(src);
}

struct OutputSourcePair {
  std::string output;
  std::string source;
};

inline double mean_length_ratio(const std::vector<OutputSourcePair>& pairs) {
  if (pairs.empty()) throw Error(ErrorCode::EmptyInput, "mean_length_ratio of nothing");
  double sum = 0;
  for (const auto& p : pairs) sum += length_ratio(p.output, p.source);
  return sum / static_cast<double>(pairs.size());
}

}  // namespace restyle
