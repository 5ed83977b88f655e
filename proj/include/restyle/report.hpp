#pragma once

// SPDX-License-Identifier: Apache-2.0

// Aggregate run report and the multi-run comparison table. Rates are stored
// in [0, 1]; text rendering multiplies Acc / BLEU / Valid by 100.

#include <algorithm>
#include <cstdio>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "restyle/error.hpp"

namespace restyle {

inline constexpr int kSchemaVersion = 1;

struct EvalReport {
  std::string system_name;
  std::string dataset_name;
  std::string dataset_fingerprint;
  std::string mode;
  std::string strategy;
  std::string backend_id;
  std::optional<std::uint64_t> seed;

  std::size_t n_examples = 0;  // records scored (generation errors excluded)
  std::size_t n_errors = 0;

  std::optional<double> accuracy;             // invalid records count as failures
  std::optional<double> accuracy_valid_only;  // invalid records dropped
  std::optional<double> bleu;                 // corpus BLEU vs references
  std::optional<double> mean_sentence_bleu;
  std::optional<double> mean_bleu_to_source;
  std::optional<double> perplexity;
  std::size_t perplexity_excluded = 0;
  std::optional<double> validity_rate;  // valid candidates / all candidates
  std::size_t n_candidates_total = 0;
  std::size_t records_all_invalid = 0;
  std::optional<double> word_inclusion_rate;
  std::size_t word_inclusion_n = 0;
  std::optional<double> mean_length_ratio;
  std::size_t max_references_per_record = 0;
  std::size_t records_without_references = 0;

  bool operator==(const EvalReport&) const = default;
};

namespace detail {

template <typename T>
nlohmann::ordered_json opt_json(const std::optional<T>& v) {
  return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

template <typename T>
std::optional<T> opt_get(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<T>();
}

}  // namespace detail

inline nlohmann::ordered_json to_json(const EvalReport& r) {
  using detail::opt_json;
  return nlohmann::ordered_json{
      {"schema_version", kSchemaVersion},
      {"system_name", r.system_name},
      {"dataset", {{"name", r.dataset_name}, {"fingerprint", r.dataset_fingerprint}}},
      {"mode", r.mode},
      {"strategy", r.strategy},
      {"backend_id", r.backend_id},
      {"seed", opt_json(r.seed)},
      {"n_examples", r.n_examples},
      {"n_errors", r.n_errors},
      {"accuracy", opt_json(r.accuracy)},
      {"accuracy_valid_only", opt_json(r.accuracy_valid_only)},
      {"bleu", opt_json(r.bleu)},
      {"mean_sentence_bleu", opt_json(r.mean_sentence_bleu)},
      {"mean_bleu_to_source", opt_json(r.mean_bleu_to_source)},
      {"perplexity", opt_json(r.perplexity)},
      {"perplexity_excluded", r.perplexity_excluded},
      {"validity_rate", opt_json(r.validity_rate)},
      {"n_candidates_total", r.n_candidates_total},
      {"records_all_invalid", r.records_all_invalid},
      {"word_inclusion_rate", opt_json(r.word_inclusion_rate)},
      {"word_inclusion_n", r.word_inclusion_n},
      {"mean_length_ratio", opt_json(r.mean_length_ratio)},
      {"max_references_per_record", r.max_references_per_record},
      {"records_without_references", r.records_without_references},
  };
}

inline EvalReport eval_report_from_json(const nlohmann::json& j) {
  using detail::opt_get;
  EvalReport r;
  try {
    r.system_name = j.at("system_name").get<std::string>();
    r.dataset_name = j.at("dataset").at("name").get<std::string>();
    r.dataset_fingerprint = j.at("dataset").at("fingerprint").get<std::string>();
    r.mode = j.at("mode").get<std::string>();
    r.strategy = j.at("strategy").get<std::string>();
    r.backend_id = j.at("backend_id").get<std::string>();
    r.seed = opt_get<std::uint64_t>(j, "seed");
    r.n_examples = j.at("n_examples").get<std::size_t>();
    r.n_errors = j.at("n_errors").get<std::size_t>();
    r.accuracy = opt_get<double>(j, "accuracy");
    r.accuracy_valid_only = opt_get<double>(j, "accuracy_valid_only");
    r.bleu = opt_get<double>(j, "bleu");
    r.mean_sentence_bleu = opt_get<double>(j, "mean_sentence_bleu");
    r.mean_bleu_to_source = opt_get<double>(j, "mean_bleu_to_source");
    r.perplexity = opt_get<double>(j, "perplexity");
    r.perplexity_excluded = j.at("perplexity_excluded").get<std::size_t>();
    r.validity_rate = opt_get<double>(j, "validity_rate");
    r.n_candidates_total = j.at("n_candidates_total").get<std::size_t>();
    r.records_all_invalid = j.at("records_all_invalid").get<std::size_t>();
    r.word_inclusion_rate = opt_get<double>(j, "word_inclusion_rate");
    r.word_inclusion_n = j.at("word_inclusion_n").get<std::size_t>();
    r.mean_length_ratio = opt_get<double>(j, "mean_length_ratio");
    r.max_references_per_record = j.at("max_references_per_record").get<std::size_t>();
    r.records_without_references = j.at("records_without_references").get<std::size_t>();
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::InvalidConfig, std::string("malformed report: ") + ex.what());
  }
  return r;
}

namespace detail {

inline std::string fmt(const std::optional<double>& v, double scale, int decimals) {
  if (!v) return "-";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, *v * scale);
  return buf;
}

inline std::string render_rows(const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width(rows.front().size(), 0);
  for (const auto& row : rows)
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  std::string out;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    std::string line;
    for (std::size_t c = 0; c < rows[r].size(); ++c) {
      const auto& cell = rows[r][c];
      const std::string pad(width[c] - cell.size(), ' ');
      if (c == 0) line += cell + pad;
      else line += "  " + pad + cell;
    }
    out += line + "\n";
    if (r == 0) out += std::string(line.size(), '-') + "\n";
  }
  return out;
}

}  // namespace detail

struct ComparisonRow {
  std::string system_name;
  std::string mode;
  std::string strategy;
  std::optional<double> accuracy;
  std::optional<double> bleu;
  std::optional<double> perplexity;
  std::optional<double> validity_rate;

  bool operator==(const ComparisonRow&) const = default;
};

struct ComparisonTable {
  std::string dataset_name;
  std::vector<ComparisonRow> rows;

  std::string render_text() const {
    std::vector<std::vector<std::string>> cells{{"System", "Acc", "BLEU", "PPL", "Valid"}};
    for (const auto& r : rows)
      cells.push_back({r.system_name, detail::fmt(r.accuracy, 100, 1), detail::fmt(r.bleu, 100, 1),
                       detail::fmt(r.perplexity, 1, 1), detail::fmt(r.validity_rate, 100, 1)});
    return detail::render_rows(cells);
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json rows_json = nlohmann::ordered_json::array();
    for (const auto& r : rows)
      rows_json.push_back(nlohmann::ordered_json{{"system_name", r.system_name},
                                                 {"mode", r.mode},
                                                 {"strategy", r.strategy},
                                                 {"accuracy", detail::opt_json(r.accuracy)},
                                                 {"bleu", detail::opt_json(r.bleu)},
                                                 {"perplexity", detail::opt_json(r.perplexity)},
                                                 {"validity_rate", detail::opt_json(r.validity_rate)}});
    return nlohmann::ordered_json{{"schema_version", kSchemaVersion},
                                  {"dataset", dataset_name},
                                  {"rows", rows_json}};
  }
};

/// One row per run; all runs must share the dataset fingerprint.
inline ComparisonTable compare(const std::vector<EvalReport>& reports) {
  if (reports.size() < 2) throw Error(ErrorCode::EmptyInput, "compare needs at least two runs");
  ComparisonTable t;
  t.dataset_name = reports.front().dataset_name;
  for (const auto& r : reports) {
    if (r.dataset_fingerprint != reports.front().dataset_fingerprint)
      throw Error(ErrorCode::DatasetMismatch, "run '" + r.system_name + "' used dataset '" +
                                                  r.dataset_name + "', expected '" +
                                                  reports.front().dataset_name + "'");
    t.rows.push_back({r.system_name, r.mode, r.strategy, r.accuracy, r.bleu, r.perplexity,
                      r.validity_rate});
  }
  return t;
}

/// Single-run text report: the comparison-style row plus auxiliary stats.
inline std::string render_report_text(const EvalReport& r) {
  std::string out = detail::render_rows(
      {{"System", "Acc", "BLEU", "PPL", "Valid"},
       {r.system_name, detail::fmt(r.accuracy, 100, 1), detail::fmt(r.bleu, 100, 1),
        detail::fmt(r.perplexity, 1, 1), detail::fmt(r.validity_rate, 100, 1)}});
  auto line = [&](const std::string& k, const std::string& v) { out += k + ": " + v + "\n"; };
  out += "\n";
  line("dataset", r.dataset_name + " (" + std::to_string(r.n_examples) + " scored, " +
                      std::to_string(r.n_errors) + " errors)");
  line("mode / strategy", r.mode + " / " + r.strategy);
  line("accuracy (valid only)", detail::fmt(r.accuracy_valid_only, 100, 1));
  line("mean sentence BLEU", detail::fmt(r.mean_sentence_bleu, 100, 1));
  line("mean BLEU to source", detail::fmt(r.mean_bleu_to_source, 100, 1));
  line("records with no valid candidate", std::to_string(r.records_all_invalid));
  line("perplexity exclusions", std::to_string(r.perplexity_excluded));
  line("word inclusion", detail::fmt(r.word_inclusion_rate, 100, 1) + " over " +
                             std::to_string(r.word_inclusion_n) + " records");
  line("mean length ratio", detail::fmt(r.mean_length_ratio, 1, 3));
  line("references per record (max)", std::to_string(r.max_references_per_record));
  if (r.records_all_invalid == r.n_examples && r.n_examples > 0)
    out += "note: every record was invalid; scores are zero by the invalid-response rule\n";
  return out;
}

}  // namespace restyle
