#pragma once

// SPDX-License-Identifier: Apache-2.0

// Small sentiment lexicon shared by the stub classifier and the synthetic
// mock backend. Pairs are (negative, positive) and one-to-one.

#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace restyle::lexicon {

inline const std::vector<std::pair<std::string, std::string>>& antonym_pairs() {
  static const std::vector<std::pair<std::string, std::string>> pairs = {
      {"bad", "good"},           {"terrible", "wonderful"},   {"awful", "great"},
      {"horrible", "excellent"}, {"ugly", "beautiful"},       {"rude", "friendly"},
      {"worst", "best"},         {"worse", "better"},         {"hate", "love"},
      {"hated", "loved"},        {"disgusting", "delicious"}, {"dirty", "clean"},
      {"slow", "fast"},          {"cold", "warm"},            {"bland", "tasty"},
      {"stale", "fresh"},        {"sad", "happy"},            {"mediocre", "superb"},
      {"disappointing", "amazing"}, {"disappointed", "impressed"},
      {"unfriendly", "welcoming"},  {"overpriced", "affordable"},
      {"gross", "lovely"},       {"nasty", "nice"},           {"miserable", "cheerful"},
      {"boring", "exciting"},    {"broken", "perfect"},       {"unhelpful", "helpful"},
      {"dreadful", "fantastic"},
  };
  return pairs;
}

inline const std::map<std::string, std::string>& to_positive() {
  static const auto m = [] {
    std::map<std::string, std::string> out;
    for (const auto& [neg, pos] : antonym_pairs()) out[neg] = pos;
    return out;
  }();
  return m;
}

inline const std::map<std::string, std::string>& to_negative() {
  static const auto m = [] {
    std::map<std::string, std::string> out;
    for (const auto& [neg, pos] : antonym_pairs()) out[pos] = neg;
    return out;
  }();
  return m;
}

inline bool is_positive(const std::string& w) { return to_negative().count(w) > 0; }
inline bool is_negative(const std::string& w) { return to_positive().count(w) > 0; }

}  // namespace restyle::lexicon
