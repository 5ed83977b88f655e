#pragma once

// SPDX-License-Identifier: Apache-2.0

// Tokenization shared by BLEU and the n-gram LM: split on whitespace, then
// peel trailing ASCII punctuation off each token, one character per token.
// Bytes >= 0x80 are left untouched so UTF-8 sequences survive intact.

#include <cctype>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace restyle::text {

inline bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

inline bool is_punct(char c) {
  return std::ispunct(static_cast<unsigned char>(c)) != 0;
}

inline char ascii_lower(char c) {
  return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
}

inline std::string to_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = ascii_lower(c);
  return out;
}

inline std::string_view trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && is_space(s[b])) ++b;
  while (e > b && is_space(s[e - 1])) --e;
  return s.substr(b, e - b);
}

inline std::vector<std::string_view> split_whitespace(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && is_space(s[i])) ++i;
    std::size_t start = i;
    while (i < s.size() && !is_space(s[i])) ++i;
    if (i > start) out.push_back(s.substr(start, i - start));
  }
  return out;
}

enum class Casing { Lower, Preserve };

inline std::vector<std::string> tokenize(std::string_view s, Casing casing = Casing::Lower) {
  std::vector<std::string> out;
  for (std::string_view word : split_whitespace(s)) {
    std::size_t end = word.size();
    while (end > 0 && is_punct(word[end - 1])) --end;
    if (end > 0) {
      std::string core(word.substr(0, end));
      if (casing == Casing::Lower) core = to_lower(core);
      out.push_back(std::move(core));
    }
    for (std::size_t i = end; i < word.size(); ++i) out.emplace_back(1, word[i]);
  }
  return out;
}

/// Number of UTF-8 code points (continuation bytes are not counted).
inline std::size_t utf8_length(std::string_view s) {
  std::size_t n = 0;
  for (unsigned char c : s)
    if ((c & 0xC0) != 0x80) ++n;
  return n;
}

inline bool contains_brace(std::string_view s) {
  return s.find_first_of("{}") != std::string_view::npos;
}

inline std::string replace_all(std::string s, std::string_view from, std::string_view to) {
  if (from.empty()) return s;
  std::size_t pos = 0;
  while ((pos = s.find(from, pos)) != std::string::npos) {
    s.replace(pos, from.size(), to);
    pos += to.size();
  }
  return s;
}

}  // namespace restyle::text
