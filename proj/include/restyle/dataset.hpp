#pragma once

// SPDX-License-Identifier: Apache-2.0

// Style-transfer datasets.
//
// JSONL: one {"id", "source_text", "target_style", "references": [...]} per
// line; blank lines are skipped and "references" may be omitted.
// TSV: header "id<TAB>source_text<TAB>target_style[<TAB>references...]",
// every column after the third holds one reference (empty cells ignored).
// Fields may be double-quoted to contain tabs; "" inside quotes is a quote.

#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "restyle/error.hpp"
#include "restyle/hash.hpp"
#include "restyle/text.hpp"

namespace restyle {

struct StyleRecord {
  std::string id;
  std::string source_text;
  std::string target_style;
  std::vector<std::string> references;

  bool operator==(const StyleRecord&) const = default;
};

inline void to_json(nlohmann::json& j, const StyleRecord& r) {
  j = {{"id", r.id},
       {"source_text", r.source_text},
       {"target_style", r.target_style},
       {"references", r.references}};
}

struct StyleDataset {
  std::string name;
  std::vector<StyleRecord> records;
  std::string provenance;

  /// Content hash of the records (order-sensitive); identifies a dataset
  /// across runs independent of file name.
  std::string fingerprint() const {
    nlohmann::json j = records;
    return sha256_hex(j.dump());
  }
};

enum class DatasetFormat { Jsonl, Tsv };

namespace detail {

inline void check_record(const StyleRecord& r, std::size_t line) {
  if (text::trim(r.id).empty()) throw ParseError(line, "empty id");
  if (text::trim(r.source_text).empty()) throw ParseError(line, "empty source_text");
  if (text::trim(r.target_style).empty()) throw ParseError(line, "empty target_style");
}

inline std::vector<std::string> split_tsv_line(std::string_view line, std::size_t lineno) {
  std::vector<std::string> fields;
  std::size_t i = 0;
  while (true) {
    std::string field;
    if (i < line.size() && line[i] == '"') {
      ++i;
      bool closed = false;
      while (i < line.size()) {
        if (line[i] == '"') {
          if (i + 1 < line.size() && line[i + 1] == '"') {
            field.push_back('"');
            i += 2;
          } else {
            ++i;
            closed = true;
            break;
          }
        } else {
          field.push_back(line[i++]);
        }
      }
      if (!closed) throw ParseError(lineno, "unterminated quoted field");
      if (i < line.size() && line[i] != '\t')
        throw ParseError(lineno, "text after closing quote");
    } else {
      while (i < line.size() && line[i] != '\t') field.push_back(line[i++]);
    }
    fields.push_back(std::move(field));
    if (i >= line.size()) break;
    ++i;  // tab
  }
  return fields;
}

}  // namespace detail

inline StyleDataset load_dataset(const std::string& path, DatasetFormat format) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open dataset " + path);
  StyleDataset ds;
  ds.name = std::filesystem::path(path).stem().string();
  std::set<std::string> ids;
  std::string line;
  std::size_t lineno = 0;
  bool header_seen = false;

  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (text::trim(line).empty()) continue;
    StyleRecord r;
    if (format == DatasetFormat::Jsonl) {
      nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
      if (j.is_discarded() || !j.is_object()) throw ParseError(lineno, "not a JSON object");
      auto str_field = [&](const char* key) {
        if (!j.contains(key) || !j[key].is_string())
          throw ParseError(lineno, std::string("missing or non-string ") + key);
        return j[key].get<std::string>();
      };
      r.id = str_field("id");
      r.source_text = str_field("source_text");
      r.target_style = str_field("target_style");
      if (j.contains("references")) {
        if (!j["references"].is_array()) throw ParseError(lineno, "references must be an array");
        for (const auto& ref : j["references"]) {
          if (!ref.is_string()) throw ParseError(lineno, "references must be strings");
          r.references.push_back(ref.get<std::string>());
        }
      }
    } else {
      auto fields = detail::split_tsv_line(line, lineno);
      if (!header_seen) {
        header_seen = true;
        if (fields.size() < 3 || fields[0] != "id" || fields[1] != "source_text" ||
            fields[2] != "target_style")
          throw ParseError(lineno, "TSV header must start with id, source_text, target_style");
        continue;
      }
      if (fields.size() < 3) throw ParseError(lineno, "expected at least 3 columns");
      r.id = fields[0];
      r.source_text = fields[1];
      r.target_style = fields[2];
      for (std::size_t i = 3; i < fields.size(); ++i)
        if (!fields[i].empty()) r.references.push_back(fields[i]);
    }
    detail::check_record(r, lineno);
    if (!ids.insert(r.id).second)
      throw Error(ErrorCode::DuplicateId, "line " + std::to_string(lineno) + ": duplicate id " + r.id);
    ds.records.push_back(std::move(r));
  }
  return ds;
}

inline DatasetFormat infer_dataset_format(const std::string& path) {
  const auto ext = std::filesystem::path(path).extension().string();
  if (ext == ".tsv") return DatasetFormat::Tsv;
  return DatasetFormat::Jsonl;
}

inline StyleDataset load_dataset(const std::string& path) {
  return load_dataset(path, infer_dataset_format(path));
}

}  // namespace restyle
