#pragma once

// SPDX-License-Identifier: Apache-2.0

/**
 * Prompt construction for zero-shot, few-shot and augmented zero-shot
 * rewriting, in two template families:
 *
 *  - completion: one text block; every exemplar is rendered as the query
 *    line, a newline, the braced rewrite and a newline, followed by the
 *    final query line with no trailing whitespace.
 *  - dialog: the same lines as alternating user / assistant turns, the
 *    final query being the last user turn.
 *
 * Placeholders in `query_pattern` are `<source>` and `<instruction>`;
 * braces in the pattern are literal delimiters. User text containing
 * braces is rejected rather than escaped.
 */

#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "restyle/error.hpp"
#include "restyle/sampling.hpp"
#include "restyle/text.hpp"

namespace restyle {

enum class Family { Completion, Dialog };
enum class Mode { ZeroShot, FewShot, AugmentedZeroShot };

inline std::string_view to_string(Family f) {
  return f == Family::Completion ? "completion" : "dialog";
}

inline Family parse_family(std::string_view s) {
  if (s == "completion") return Family::Completion;
  if (s == "dialog") return Family::Dialog;
  throw Error(ErrorCode::InvalidConfig, "unknown template family: " + std::string(s));
}

inline std::string_view to_string(Mode m) {
  switch (m) {
    case Mode::ZeroShot: return "zero_shot";
    case Mode::FewShot: return "few_shot";
    case Mode::AugmentedZeroShot: return "augmented_zero_shot";
  }
  return "augmented_zero_shot";
}

inline Mode parse_mode(std::string_view s) {
  if (s == "zero_shot") return Mode::ZeroShot;
  if (s == "few_shot") return Mode::FewShot;
  if (s == "augmented_zero_shot") return Mode::AugmentedZeroShot;
  throw Error(ErrorCode::InvalidConfig, "unknown mode: " + std::string(s));
}

namespace detail {

inline bool blank(std::string_view s) { return text::trim(s).empty(); }

inline void require_field(std::string_view value, std::string_view name) {
  if (blank(value)) throw Error(ErrorCode::EmptyField, std::string(name) + " is empty");
}

inline void require_brace_free(std::string_view value, std::string_view name) {
  if (text::contains_brace(value))
    throw Error(ErrorCode::BraceInSource, std::string(name) + " contains '{' or '}'");
}

}  // namespace detail

struct Exemplar {
  std::string source_text;
  std::string instruction;
  std::string rewritten_text;

  void validate() const {
    detail::require_field(source_text, "exemplar source_text");
    detail::require_field(instruction, "exemplar instruction");
    detail::require_field(rewritten_text, "exemplar rewritten_text");
    detail::require_brace_free(source_text, "exemplar source_text");
    detail::require_brace_free(instruction, "exemplar instruction");
    detail::require_brace_free(rewritten_text, "exemplar rewritten_text");
  }

  bool operator==(const Exemplar&) const = default;
};

inline void to_json(nlohmann::json& j, const Exemplar& e) {
  j = {{"source_text", e.source_text},
       {"instruction", e.instruction},
       {"rewritten_text", e.rewritten_text}};
}

inline void from_json(const nlohmann::json& j, Exemplar& e) {
  j.at("source_text").get_to(e.source_text);
  j.at("instruction").get_to(e.instruction);
  j.at("rewritten_text").get_to(e.rewritten_text);
}

inline const std::string kSourcePlaceholder = "<source>";
inline const std::string kInstructionPlaceholder = "<instruction>";
inline const std::string kRewritePlaceholder = "<rewrite>";

struct PromptTemplate {
  std::string name;
  Family family = Family::Completion;
  std::vector<Exemplar> exemplars;
  std::string query_pattern;
  std::string answer_pattern = "{<rewrite>}";

  void validate() const {
    if (query_pattern.find(kSourcePlaceholder) == std::string::npos ||
        query_pattern.find(kInstructionPlaceholder) == std::string::npos)
      throw Error(ErrorCode::InvalidConfig,
                  "query_pattern must contain <source> and <instruction>");
    if (answer_pattern.find(kRewritePlaceholder) == std::string::npos)
      throw Error(ErrorCode::InvalidConfig, "answer_pattern must contain <rewrite>");
    for (const auto& e : exemplars) e.validate();
  }

  std::string render_query(std::string_view source, std::string_view instruction) const {
    // Substitute instruction first so a source containing "<instruction>" is not rewritten.
    std::string out = text::replace_all(query_pattern, kInstructionPlaceholder, instruction);
    return text::replace_all(std::move(out), kSourcePlaceholder, source);
  }

  std::string render_answer(std::string_view rewrite) const {
    return text::replace_all(answer_pattern, kRewritePlaceholder, rewrite);
  }

  nlohmann::json to_json() const {
    return {{"name", name},
            {"family", std::string(to_string(family))},
            {"query_pattern", query_pattern},
            {"answer_pattern", answer_pattern},
            {"exemplars", exemplars}};
  }

  static PromptTemplate from_json(const nlohmann::json& j) {
    PromptTemplate t;
    try {
      t.name = j.value("name", "");
      t.family = parse_family(j.at("family").get<std::string>());
      t.query_pattern = j.at("query_pattern").get<std::string>();
      t.answer_pattern = j.value("answer_pattern", t.answer_pattern);
      t.exemplars = j.at("exemplars").get<std::vector<Exemplar>>();
    } catch (const nlohmann::json::exception& ex) {
      throw Error(ErrorCode::InvalidConfig, std::string("bad template: ") + ex.what());
    }
    t.validate();
    return t;
  }

  static PromptTemplate load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open template " + path);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& ex) {
      throw Error(ErrorCode::InvalidConfig, "template " + path + ": " + ex.what());
    }
    return from_json(j);
  }
};

struct RewriteRequest {
  std::string source_text;
  std::string instruction;
  Mode mode = Mode::AugmentedZeroShot;
  std::vector<Exemplar> few_shot_exemplars;
  SamplingConfig sampling;
};

enum class Speaker { User, Assistant };

inline std::string_view to_string(Speaker s) { return s == Speaker::User ? "user" : "assistant"; }

struct Turn {
  Speaker speaker;
  std::string utterance;

  bool operator==(const Turn&) const = default;
};

/// Single-text form of a dialog: "User: ..." / "Assistant: ..." lines ending
/// with an "Assistant:" cue for the reply.
inline std::string flatten_turns(const std::vector<Turn>& turns) {
  std::string out;
  for (const auto& t : turns) {
    out += t.speaker == Speaker::User ? "User: " : "Assistant: ";
    out += t.utterance;
    out += '\n';
  }
  out += "Assistant:";
  return out;
}

struct RenderedPrompt {
  Family family = Family::Completion;
  std::string text;          // completion family
  std::vector<Turn> turns;   // dialog family

  bool empty() const { return family == Family::Completion ? text.empty() : turns.empty(); }

  /// Canonical byte form, used for hashing and for completion-style wires.
  std::string canonical() const {
    return family == Family::Completion ? text : flatten_turns(turns);
  }

  bool operator==(const RenderedPrompt&) const = default;
};

namespace detail {

inline void validate_query(const RewriteRequest& req) {
  require_field(req.source_text, "source_text");
  require_field(req.instruction, "instruction");
  require_brace_free(req.source_text, "source_text");
  require_brace_free(req.instruction, "instruction");
}

inline RenderedPrompt render_blocks(const PromptTemplate& tpl,
                                    const std::vector<Exemplar>& exemplars,
                                    const RewriteRequest& req) {
  RenderedPrompt out;
  out.family = tpl.family;
  std::string query = tpl.render_query(req.source_text, req.instruction);
  if (tpl.family == Family::Completion) {
    for (const auto& e : exemplars) {
      out.text += tpl.render_query(e.source_text, e.instruction);
      out.text += '\n';
      out.text += tpl.render_answer(e.rewritten_text);
      out.text += '\n';
    }
    out.text += query;
  } else {
    for (const auto& e : exemplars) {
      out.turns.push_back({Speaker::User, tpl.render_query(e.source_text, e.instruction)});
      out.turns.push_back({Speaker::Assistant, tpl.render_answer(e.rewritten_text)});
    }
    out.turns.push_back({Speaker::User, std::move(query)});
  }
  return out;
}

}  // namespace detail

/// Query block only, in the template's family.
inline RenderedPrompt render_zero_shot(const RewriteRequest& req, const PromptTemplate& tpl) {
  detail::validate_query(req);
  return detail::render_blocks(tpl, {}, req);
}

/// The template's fixed exemplars (related tasks), then the query block.
inline RenderedPrompt render_augmented_zero_shot(const RewriteRequest& req,
                                                 const PromptTemplate& tpl) {
  detail::validate_query(req);
  return detail::render_blocks(tpl, tpl.exemplars, req);
}

/// Exemplars of the exact target instruction from the request, then the query block.
inline RenderedPrompt render_few_shot(const RewriteRequest& req, const PromptTemplate& tpl) {
  detail::validate_query(req);
  if (req.few_shot_exemplars.empty())
    throw Error(ErrorCode::EmptyField, "few-shot mode requires at least one exemplar");
  for (const auto& e : req.few_shot_exemplars) {
    e.validate();
    if (e.instruction != req.instruction)
      throw Error(ErrorCode::MixedInstructions,
                  "exemplar instruction '" + e.instruction + "' differs from '" +
                      req.instruction + "'");
  }
  return detail::render_blocks(tpl, req.few_shot_exemplars, req);
}

inline RenderedPrompt render(const RewriteRequest& req, const PromptTemplate& tpl) {
  switch (req.mode) {
    case Mode::ZeroShot: return render_zero_shot(req, tpl);
    case Mode::FewShot: return render_few_shot(req, tpl);
    case Mode::AugmentedZeroShot: return render_augmented_zero_shot(req, tpl);
  }
  return render_augmented_zero_shot(req, tpl);
}

/// Paraphrased instruction wordings for sweeping prompt variants.
class InstructionVariants {
 public:
  InstructionVariants()
      : table_{{"positive", {"more positive", "happier", "more optimistic", "more cheerful"}},
               {"negative", {"more negative", "sadder", "more pessimistic", "more miserable"}}} {}

  void add(std::string style, std::vector<std::string> wordings) {
    table_[std::move(style)] = std::move(wordings);
  }

  std::vector<std::string> variants(const std::string& base_style) const {
    auto it = table_.find(base_style);
    if (it == table_.end()) return {base_style};
    return it->second;
  }

 private:
  std::map<std::string, std::vector<std::string>> table_;
};

inline std::vector<std::string> instruction_variants(const std::string& base_style) {
  static const InstructionVariants defaults;
  return defaults.variants(base_style);
}

}  // namespace restyle
