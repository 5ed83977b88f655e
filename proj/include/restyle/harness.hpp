#pragma once

// SPDX-License-Identifier: Apache-2.0

/**
 * End-to-end evaluation: render -> complete -> parse -> select -> score.
 *
 * Generation and scoring are separate passes over RecordTrace values. Every
 * candidate is kept in the trace, so another selection strategy can be
 * scored offline from trace.jsonl without querying the backend again.
 *
 * Scoring rules:
 *  - a record with no valid candidate scores 0 for accuracy, BLEU, BLEU to
 *    source and word inclusion, and is left out of perplexity (counted in
 *    `perplexity_excluded`);
 *  - records whose generation failed (render or backend error) are excluded
 *    from every aggregate and listed with their error;
 *  - a classifier failure leaves that record's correctness unset, so it is
 *    excluded from accuracy rather than counted as wrong.
 *
 * aggregate() is the only place aggregates are computed; run() stores its
 * result, so recomputing from a reloaded trace reproduces the report.
 */

#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "restyle/backends.hpp"
#include "restyle/bleu.hpp"
#include "restyle/classifier.hpp"
#include "restyle/concurrency.hpp"
#include "restyle/dataset.hpp"
#include "restyle/hash.hpp"
#include "restyle/measures.hpp"
#include "restyle/ngram_lm.hpp"
#include "restyle/parsing.hpp"
#include "restyle/perplexity_scorer.hpp"
#include "restyle/prompting.hpp"
#include "restyle/report.hpp"

namespace restyle {

struct MetricToggles {
  bool accuracy = true;
  bool bleu = true;
  bool perplexity = true;
  bool word_inclusion = true;
  bool length_ratio = true;
};

struct ClassifierConfig {
  std::string kind = "lexicon";  // lexicon | http
  std::string endpoint;
  std::int64_t timeout_ms = 5000;
  std::map<std::string, std::string> label_map;
};

struct LmConfig {
  std::string kind = "ngram";  // ngram | http
  std::string corpus;
  int order = 3;
  LmSmoothing smoothing = LmSmoothing::AddK;
  double k = 0.1;
  double backoff_alpha = 0.4;
  std::string endpoint;
};

struct RunConfig {
  std::string system_name;
  std::string dataset_path;
  Mode mode = Mode::AugmentedZeroShot;
  std::string template_path;
  std::string few_shot_path;
  BackendSpec backend;
  SamplingConfig sampling;
  bool stop_sequences_set = false;
  SelectionStrategy strategy = SelectionStrategy::MaxBleuToSource;
  MetricToggles metrics;
  ClassifierConfig classifier;
  LmConfig lm;
  BleuConfig bleu;
  bool refusal_heuristic = false;
  int parallelism = 4;
  std::string output_dir;
  std::optional<std::uint64_t> seed;

  /// Relative paths resolve against `base_dir`.
  static RunConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
    RunConfig c;
    auto resolve = [&](const std::string& p) -> std::string {
      if (p.empty() || std::filesystem::path(p).is_absolute()) return p;
      return (base_dir / p).lexically_normal().string();
    };
    try {
      c.system_name = j.value("system_name", "system");
      c.dataset_path = resolve(j.at("dataset").get<std::string>());
      c.mode = parse_mode(j.value("mode", "augmented_zero_shot"));
      c.template_path = resolve(j.at("template").get<std::string>());
      c.few_shot_path = resolve(j.value("few_shot_exemplars", ""));
      const auto& b = j.at("backend");
      if (b.is_string()) {
        c.backend = BackendSpec::load(resolve(b.get<std::string>()));
      } else {
        c.backend = BackendSpec::from_json(b);
        if (!c.backend.fixtures_path.empty()) c.backend.fixtures_path = resolve(c.backend.fixtures_path);
        if (!c.backend.cache_dir.empty()) c.backend.cache_dir = resolve(c.backend.cache_dir);
      }
      if (j.contains("sampling")) {
        const auto& s = j["sampling"];
        c.sampling.n_candidates = s.value("n_candidates", c.sampling.n_candidates);
        c.sampling.temperature = s.value("temperature", c.sampling.temperature);
        c.sampling.max_output_length = s.value("max_output_length", c.sampling.max_output_length);
        if (s.contains("stop_sequences")) {
          c.sampling.stop_sequences = s["stop_sequences"].get<std::vector<std::string>>();
          c.stop_sequences_set = true;
        }
        if (s.contains("seed") && !s["seed"].is_null()) c.sampling.seed = s["seed"].get<std::uint64_t>();
      }
      c.strategy = parse_strategy(j.value("strategy", "max_bleu_to_source"));
      if (j.contains("metrics")) {
        const auto& m = j["metrics"];
        c.metrics.accuracy = m.value("accuracy", true);
        c.metrics.bleu = m.value("bleu", true);
        c.metrics.perplexity = m.value("perplexity", true);
        c.metrics.word_inclusion = m.value("word_inclusion", true);
        c.metrics.length_ratio = m.value("length_ratio", true);
      }
      if (j.contains("classifier")) {
        const auto& k = j["classifier"];
        c.classifier.kind = k.value("kind", "lexicon");
        c.classifier.endpoint = k.value("endpoint", "");
        c.classifier.timeout_ms = k.value("timeout_ms", c.classifier.timeout_ms);
        if (k.contains("label_map"))
          c.classifier.label_map = k["label_map"].get<std::map<std::string, std::string>>();
      }
      if (j.contains("lm")) {
        const auto& l = j["lm"];
        c.lm.kind = l.value("kind", "ngram");
        c.lm.corpus = resolve(l.value("corpus", ""));
        c.lm.order = l.value("order", c.lm.order);
        c.lm.smoothing = parse_lm_smoothing(l.value("smoothing", "add_k"));
        c.lm.k = l.value("k", c.lm.k);
        c.lm.backoff_alpha = l.value("backoff_alpha", c.lm.backoff_alpha);
        c.lm.endpoint = l.value("endpoint", "");
      }
      if (j.contains("bleu")) {
        const auto& b2 = j["bleu"];
        c.bleu.max_order = b2.value("max_order", c.bleu.max_order);
        const std::string sm = b2.value("smoothing", "epsilon");
        if (sm == "none") c.bleu.smoothing = BleuSmoothing::None;
        else if (sm == "epsilon") c.bleu.smoothing = BleuSmoothing::Epsilon;
        else if (sm == "add_k") c.bleu.smoothing = BleuSmoothing::AddK;
        else throw Error(ErrorCode::InvalidConfig, "unknown BLEU smoothing: " + sm);
        c.bleu.epsilon = b2.value("epsilon", c.bleu.epsilon);
        c.bleu.k = b2.value("k", c.bleu.k);
        const std::string tok = b2.value("tokenizer", "whitespace_lower");
        if (tok == "whitespace_lower") c.bleu.tokenizer = BleuTokenizer::WhitespaceLower;
        else if (tok == "whitespace_cased") c.bleu.tokenizer = BleuTokenizer::WhitespaceCased;
        else throw Error(ErrorCode::InvalidConfig, "unknown BLEU tokenizer: " + tok);
      }
      c.refusal_heuristic = j.value("refusal_heuristic", false);
      c.parallelism = j.value("parallelism", c.parallelism);
      c.output_dir = resolve(j.value("output_dir", ""));
      if (j.contains("seed") && !j["seed"].is_null()) c.seed = j["seed"].get<std::uint64_t>();
    } catch (const nlohmann::json::exception& ex) {
      throw Error(ErrorCode::InvalidConfig, std::string("bad run config: ") + ex.what());
    }
    c.validate();
    return c;
  }

  static RunConfig load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open run config " + path);
    nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded()) throw Error(ErrorCode::InvalidConfig, "run config is not JSON: " + path);
    return from_json(j, std::filesystem::path(path).parent_path());
  }

  void validate() const {
    auto must_exist = [](const std::string& p, const char* what) {
      if (!std::filesystem::exists(p))
        throw Error(ErrorCode::InvalidConfig, std::string(what) + " not found: " + p);
    };
    must_exist(dataset_path, "dataset");
    must_exist(template_path, "template");
    if (mode == Mode::FewShot) {
      if (few_shot_path.empty())
        throw Error(ErrorCode::InvalidConfig, "few_shot mode needs few_shot_exemplars");
      must_exist(few_shot_path, "few-shot exemplars");
    }
    if (metrics.perplexity && lm.kind == "ngram") must_exist(lm.corpus, "LM corpus");
    if (metrics.perplexity && lm.kind == "http" && lm.endpoint.empty())
      throw Error(ErrorCode::InvalidConfig, "http LM needs endpoint");
    if (metrics.accuracy && classifier.kind == "http" && classifier.endpoint.empty())
      throw Error(ErrorCode::InvalidConfig, "http classifier needs endpoint");
    if (parallelism < 1) throw Error(ErrorCode::InvalidConfig, "parallelism must be >= 1");
    sampling.validate();
    bleu.validate();
  }

  /// Sampling with the family default stop sequences and run seed applied.
  SamplingConfig effective_sampling(Family family) const {
    SamplingConfig s = sampling;
    if (!stop_sequences_set) s.stop_sequences = default_sampling(family).stop_sequences;
    if (!s.seed) s.seed = seed;
    return s;
  }
};

struct RecordError {
  std::string stage;  // render | complete | classify | score
  std::string code;
  std::string message;

  bool operator==(const RecordError&) const = default;
};

struct RecordMetrics {
  std::optional<bool> correct;
  std::optional<BleuStats> bleu_stats;
  std::optional<double> sentence_bleu;
  std::optional<LmScore> lm;
  std::optional<bool> word_included;
  std::optional<double> length_ratio;
};

struct RecordTrace {
  std::string id;
  std::string source_text;
  std::string target_style;
  std::vector<std::string> references;
  std::string prompt_sha256;
  std::vector<Candidate> candidates;
  std::optional<SelectionOutcome> selection;
  std::optional<std::string> chosen_text;
  RecordMetrics metrics;
  std::vector<RecordError> errors;

  bool generation_failed() const {
    for (const auto& e : errors)
      if (e.stage == "render" || e.stage == "complete") return true;
    return false;
  }
};

namespace detail {

inline RecordError record_error(const std::string& stage, const std::exception& ex) {
  if (const auto* e = dynamic_cast<const Error*>(&ex))
    return {stage, std::string(to_string(e->code())), e->what()};
  return {stage, "Internal", ex.what()};
}

template <typename T>
nlohmann::ordered_json opt_or_null(const std::optional<T>& v) {
  return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

}  // namespace detail

inline nlohmann::ordered_json to_json(const RecordTrace& t) {
  using detail::opt_or_null;
  nlohmann::ordered_json cands = nlohmann::ordered_json::array();
  for (const auto& c : t.candidates) {
    nlohmann::ordered_json cj{{"raw", c.raw}};
    if (c.parsed) cj["parsed"] = *c.parsed;
    if (c.failure) cj["failure"] = std::string(to_string(*c.failure));
    cands.push_back(std::move(cj));
  }
  nlohmann::ordered_json sel = nullptr;
  if (t.selection) {
    sel = nlohmann::ordered_json{{"strategy", std::string(to_string(t.selection->strategy))},
                                 {"chosen_index", opt_or_null(t.selection->chosen_index)},
                                 {"valid_count", t.selection->valid_count},
                                 {"score_of_chosen", opt_or_null(t.selection->score_of_chosen)}};
  }
  nlohmann::ordered_json bleu_stats = nullptr;
  if (t.metrics.bleu_stats) {
    const auto& s = *t.metrics.bleu_stats;
    bleu_stats = nlohmann::ordered_json{{"matches", s.matches},
                                        {"totals", s.totals},
                                        {"candidate_length", s.candidate_length},
                                        {"reference_length", s.reference_length}};
  }
  nlohmann::ordered_json lm = nullptr;
  if (t.metrics.lm)
    lm = nlohmann::ordered_json{{"nll_sum", t.metrics.lm->nll_sum},
                                {"token_count", t.metrics.lm->token_count}};
  nlohmann::ordered_json errors = nlohmann::ordered_json::array();
  for (const auto& e : t.errors)
    errors.push_back({{"stage", e.stage}, {"code", e.code}, {"message", e.message}});
  return nlohmann::ordered_json{
      {"schema_version", kSchemaVersion},
      {"id", t.id},
      {"source_text", t.source_text},
      {"target_style", t.target_style},
      {"references", t.references},
      {"prompt_sha256", t.prompt_sha256},
      {"candidates", std::move(cands)},
      {"selection", std::move(sel)},
      {"chosen_text", opt_or_null(t.chosen_text)},
      {"metrics",
       {{"correct", opt_or_null(t.metrics.correct)},
        {"bleu_stats", std::move(bleu_stats)},
        {"sentence_bleu", opt_or_null(t.metrics.sentence_bleu)},
        {"lm", std::move(lm)},
        {"word_included", opt_or_null(t.metrics.word_included)},
        {"length_ratio", opt_or_null(t.metrics.length_ratio)}}},
      {"errors", std::move(errors)},
  };
}

inline RecordTrace record_trace_from_json(const nlohmann::json& j) {
  using detail::opt_get;
  RecordTrace t;
  t.id = j.at("id").get<std::string>();
  t.source_text = j.at("source_text").get<std::string>();
  t.target_style = j.at("target_style").get<std::string>();
  t.references = j.at("references").get<std::vector<std::string>>();
  t.prompt_sha256 = j.at("prompt_sha256").get<std::string>();
  t.candidates = j.at("candidates").get<std::vector<Candidate>>();
  if (!j.at("selection").is_null()) t.selection = j.at("selection").get<SelectionOutcome>();
  t.chosen_text = opt_get<std::string>(j, "chosen_text");
  const auto& m = j.at("metrics");
  t.metrics.correct = opt_get<bool>(m, "correct");
  if (!m.at("bleu_stats").is_null()) {
    const auto& s = m.at("bleu_stats");
    BleuStats st;
    st.matches = s.at("matches").get<std::vector<std::int64_t>>();
    st.totals = s.at("totals").get<std::vector<std::int64_t>>();
    st.candidate_length = s.at("candidate_length").get<std::int64_t>();
    st.reference_length = s.at("reference_length").get<std::int64_t>();
    t.metrics.bleu_stats = std::move(st);
  }
  t.metrics.sentence_bleu = opt_get<double>(m, "sentence_bleu");
  if (!m.at("lm").is_null())
    t.metrics.lm = LmScore{m.at("lm").at("nll_sum").get<double>(),
                           m.at("lm").at("token_count").get<std::size_t>()};
  t.metrics.word_included = opt_get<bool>(m, "word_included");
  t.metrics.length_ratio = opt_get<double>(m, "length_ratio");
  for (const auto& e : j.at("errors"))
    t.errors.push_back({e.at("stage").get<std::string>(), e.at("code").get<std::string>(),
                        e.at("message").get<std::string>()});
  return t;
}

/// Metric backends resolved from a RunConfig.
struct Scorers {
  std::optional<ClassifierClient> classifier;
  std::shared_ptr<PerplexityScorer> lm;
  BleuConfig bleu;
  MetricToggles toggles;
};

inline Scorers build_scorers(const RunConfig& cfg,
                             std::shared_ptr<HttpTransport> transport = nullptr) {
  Scorers s;
  s.bleu = cfg.bleu;
  s.toggles = cfg.metrics;
  if (cfg.metrics.accuracy) {
    ClassifierClient client;
    client.label_map = cfg.classifier.label_map;
    client.parallelism = cfg.parallelism;
    if (cfg.classifier.kind == "lexicon")
      client.classifier = std::make_shared<LexiconClassifier>();
    else if (cfg.classifier.kind == "http")
      client.classifier = std::make_shared<HttpClassifier>(
          cfg.classifier.endpoint, transport, std::chrono::milliseconds(cfg.classifier.timeout_ms));
    else
      throw Error(ErrorCode::InvalidConfig, "unknown classifier kind: " + cfg.classifier.kind);
    s.classifier = std::move(client);
  }
  if (cfg.metrics.perplexity) {
    if (cfg.lm.kind == "ngram") {
      NgramLanguageModel::Params p{cfg.lm.order, cfg.lm.smoothing, cfg.lm.k, cfg.lm.backoff_alpha};
      s.lm = std::make_shared<NgramPerplexityScorer>(
          NgramLanguageModel::train(read_lines(cfg.lm.corpus), p));
    } else if (cfg.lm.kind == "http") {
      s.lm = std::make_shared<HttpPerplexityScorer>(cfg.lm.endpoint, transport);
    } else {
      throw Error(ErrorCode::InvalidConfig, "unknown LM kind: " + cfg.lm.kind);
    }
  }
  return s;
}

struct GenerationSettings {
  Mode mode = Mode::AugmentedZeroShot;
  PromptTemplate prompt_template;
  std::vector<Exemplar> few_shot_pool;
  SamplingConfig sampling;
  bool refusal_heuristic = false;
  int parallelism = 4;
};

/// Render, complete and parse every record. Failures are recorded per record.
inline std::vector<RecordTrace> generate(const StyleDataset& ds, Backend& backend,
                                         const GenerationSettings& gs) {
  std::vector<RecordTrace> traces(ds.records.size());
  const RefusalHeuristic heuristic;
  parallel_for(ds.records.size(), gs.parallelism, [&](std::size_t i) {
    const auto& rec = ds.records[i];
    RecordTrace& t = traces[i];
    t.id = rec.id;
    t.source_text = rec.source_text;
    t.target_style = rec.target_style;
    t.references = rec.references;

    RewriteRequest req;
    req.source_text = rec.source_text;
    req.instruction = rec.target_style;
    req.mode = gs.mode;
    req.sampling = gs.sampling;
    for (const auto& e : gs.few_shot_pool)
      if (e.instruction == rec.target_style) req.few_shot_exemplars.push_back(e);

    RenderedPrompt prompt;
    try {
      prompt = render(req, gs.prompt_template);
    } catch (const std::exception& ex) {
      t.errors.push_back(detail::record_error("render", ex));
      return;
    }
    t.prompt_sha256 = sha256_hex(prompt.canonical());
    try {
      CompletionBatch batch = backend.complete(prompt, gs.sampling);
      t.candidates = parse_candidates(batch.raw_texts, gs.refusal_heuristic ? &heuristic : nullptr);
    } catch (const std::exception& ex) {
      t.errors.push_back(detail::record_error("complete", ex));
    }
  });
  return traces;
}

/// Select and score one trace in place. Clears earlier selection and metrics.
inline void score_trace(RecordTrace& t, const Scorers& sc, SelectionStrategy strategy) {
  t.selection.reset();
  t.chosen_text.reset();
  t.metrics = {};
  std::erase_if(t.errors, [](const RecordError& e) { return e.stage == "classify" || e.stage == "score"; });
  if (t.generation_failed()) return;

  try {
    t.selection = select(t.candidates, t.source_text, strategy, sc.bleu);
    const bool valid = t.selection->chosen_index.has_value();
    if (valid) t.chosen_text = *t.candidates[*t.selection->chosen_index].parsed;
    const std::string output = t.chosen_text.value_or("");

    if (sc.toggles.bleu && !t.references.empty()) {
      std::vector<Tokens> refs;
      for (const auto& r : t.references) refs.push_back(bleu_tokenize(r, sc.bleu));
      t.metrics.bleu_stats = bleu_stats(bleu_tokenize(output, sc.bleu), refs, sc.bleu.max_order);
      t.metrics.sentence_bleu = bleu_from_stats(*t.metrics.bleu_stats, sc.bleu);
    }
    if (sc.toggles.perplexity && sc.lm && valid) t.metrics.lm = sc.lm->score(output);
    if (sc.toggles.word_inclusion) {
      if (auto word = target_word_from_style(t.target_style))
        t.metrics.word_included = valid && word_inclusion(output, *word);
    }
    if (sc.toggles.length_ratio && valid) t.metrics.length_ratio = length_ratio(output, t.source_text);
  } catch (const std::exception& ex) {
    t.errors.push_back(detail::record_error("score", ex));
    return;
  }

  if (sc.toggles.accuracy && sc.classifier) {
    try {
      const std::string& expected = sc.classifier->expected_label(t.target_style);
      if (!t.chosen_text) t.metrics.correct = false;
      else t.metrics.correct = sc.classifier->classifier->classify(*t.chosen_text).label == expected;
    } catch (const std::exception& ex) {
      t.errors.push_back(detail::record_error("classify", ex));
    }
  }
}

inline void score_traces(std::vector<RecordTrace>& traces, const Scorers& sc,
                         SelectionStrategy strategy, int parallelism) {
  parallel_for(traces.size(), parallelism,
               [&](std::size_t i) { score_trace(traces[i], sc, strategy); });
}

/// Report header fields that are not derived from traces.
struct RunMeta {
  std::string system_name;
  std::string dataset_name;
  std::string dataset_fingerprint;
  std::string mode;
  std::string strategy;
  std::string backend_id;
  std::optional<std::uint64_t> seed;
  MetricToggles toggles;
  BleuConfig bleu;
};

inline EvalReport aggregate(const std::vector<RecordTrace>& traces, const RunMeta& meta) {
  EvalReport r;
  r.system_name = meta.system_name;
  r.dataset_name = meta.dataset_name;
  r.dataset_fingerprint = meta.dataset_fingerprint;
  r.mode = meta.mode;
  r.strategy = meta.strategy;
  r.backend_id = meta.backend_id;
  r.seed = meta.seed;

  std::size_t valid_candidates = 0;
  std::size_t acc_n = 0, acc_hits = 0, acc_valid_n = 0, acc_valid_hits = 0;
  std::size_t bleu_n = 0, bts_n = 0, wi_hits = 0, lr_n = 0;
  double sentence_bleu_sum = 0, bts_sum = 0, lr_sum = 0, nll_sum = 0;
  std::size_t token_sum = 0, ppl_included = 0;
  std::optional<BleuStats> pooled;

  for (const auto& t : traces) {
    if (t.generation_failed()) {
      ++r.n_errors;
      continue;
    }
    if (!t.errors.empty()) ++r.n_errors;
    if (!t.selection) continue;
    ++r.n_examples;
    r.n_candidates_total += t.candidates.size();
    valid_candidates += t.selection->valid_count;
    const bool valid = t.selection->chosen_index.has_value();
    if (!valid) ++r.records_all_invalid;

    r.max_references_per_record = std::max(r.max_references_per_record, t.references.size());
    if (t.references.empty()) ++r.records_without_references;

    if (t.metrics.correct) {
      ++acc_n;
      acc_hits += *t.metrics.correct ? 1 : 0;
      if (valid) {
        ++acc_valid_n;
        acc_valid_hits += *t.metrics.correct ? 1 : 0;
      }
    }
    if (t.metrics.bleu_stats) {
      if (!pooled) pooled = BleuStats(static_cast<int>(t.metrics.bleu_stats->matches.size()));
      *pooled += *t.metrics.bleu_stats;
      sentence_bleu_sum += t.metrics.sentence_bleu.value_or(0.0);
      ++bleu_n;
    }
    ++bts_n;
    bts_sum += valid ? t.selection->score_of_chosen.value_or(0.0) : 0.0;
    if (t.metrics.lm) {
      nll_sum += t.metrics.lm->nll_sum;
      token_sum += t.metrics.lm->token_count;
      ++ppl_included;
    }
    if (t.metrics.word_included) {
      ++r.word_inclusion_n;
      wi_hits += *t.metrics.word_included ? 1 : 0;
    }
    if (t.metrics.length_ratio) {
      lr_sum += *t.metrics.length_ratio;
      ++lr_n;
    }
  }

  auto ratio = [](double num, std::size_t den) -> std::optional<double> {
    if (den == 0) return std::nullopt;
    return num / static_cast<double>(den);
  };
  if (meta.toggles.accuracy) {
    r.accuracy = ratio(static_cast<double>(acc_hits), acc_n);
    r.accuracy_valid_only = ratio(static_cast<double>(acc_valid_hits), acc_valid_n);
  }
  if (pooled) {
    r.bleu = bleu_from_stats(*pooled, meta.bleu);
    r.mean_sentence_bleu = ratio(sentence_bleu_sum, bleu_n);
  }
  r.mean_bleu_to_source = ratio(bts_sum, bts_n);
  if (meta.toggles.perplexity) {
    r.perplexity_excluded = r.n_examples - ppl_included;
    if (token_sum > 0) r.perplexity = std::exp(nll_sum / static_cast<double>(token_sum));
  }
  r.validity_rate = ratio(static_cast<double>(valid_candidates), r.n_candidates_total);
  if (meta.toggles.word_inclusion) r.word_inclusion_rate = ratio(static_cast<double>(wi_hits), r.word_inclusion_n);
  if (meta.toggles.length_ratio) r.mean_length_ratio = ratio(lr_sum, lr_n);
  return r;
}

inline nlohmann::ordered_json settings_json(const RunMeta& m) {
  static constexpr const char* kSmoothing[] = {"none", "epsilon", "add_k"};
  return nlohmann::ordered_json{
      {"metrics",
       {{"accuracy", m.toggles.accuracy},
        {"bleu", m.toggles.bleu},
        {"perplexity", m.toggles.perplexity},
        {"word_inclusion", m.toggles.word_inclusion},
        {"length_ratio", m.toggles.length_ratio}}},
      {"bleu",
       {{"max_order", m.bleu.max_order},
        {"smoothing", kSmoothing[static_cast<int>(m.bleu.smoothing)]},
        {"epsilon", m.bleu.epsilon},
        {"k", m.bleu.k},
        {"tokenizer", m.bleu.tokenizer == BleuTokenizer::WhitespaceLower ? "whitespace_lower"
                                                                          : "whitespace_cased"}}}};
}

inline RunMeta run_meta_from_json(const nlohmann::json& report) {
  RunMeta m;
  const EvalReport r = eval_report_from_json(report);
  m.system_name = r.system_name;
  m.dataset_name = r.dataset_name;
  m.dataset_fingerprint = r.dataset_fingerprint;
  m.mode = r.mode;
  m.strategy = r.strategy;
  m.backend_id = r.backend_id;
  m.seed = r.seed;
  const auto& s = report.at("settings");
  const auto& t = s.at("metrics");
  m.toggles = {t.at("accuracy").get<bool>(), t.at("bleu").get<bool>(),
               t.at("perplexity").get<bool>(), t.at("word_inclusion").get<bool>(),
               t.at("length_ratio").get<bool>()};
  const auto& b = s.at("bleu");
  m.bleu.max_order = b.at("max_order").get<int>();
  const auto sm = b.at("smoothing").get<std::string>();
  m.bleu.smoothing = sm == "none" ? BleuSmoothing::None
                     : sm == "add_k" ? BleuSmoothing::AddK
                                     : BleuSmoothing::Epsilon;
  m.bleu.epsilon = b.at("epsilon").get<double>();
  m.bleu.k = b.at("k").get<double>();
  m.bleu.tokenizer = b.at("tokenizer").get<std::string>() == "whitespace_cased"
                         ? BleuTokenizer::WhitespaceCased
                         : BleuTokenizer::WhitespaceLower;
  return m;
}

/// Traces plus the aggregate computed from them.
struct RunArtifact {
  RunMeta meta;
  EvalReport report;
  std::vector<RecordTrace> traces;

  nlohmann::ordered_json report_json() const {
    auto j = to_json(report);
    j["settings"] = settings_json(meta);
    return j;
  }

  std::string trace_jsonl() const {
    std::string out;
    for (const auto& t : traces) out += to_json(t).dump() + "\n";
    return out;
  }

  /// Writes trace.jsonl, report.json and report.txt into `dir`.
  void write(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir);
    auto put = [&](const char* name, const std::string& content) {
      std::ofstream out(dir / name, std::ios::binary | std::ios::trunc);
      if (!out) throw Error(ErrorCode::IoError, "cannot write " + (dir / name).string());
      out << content;
    };
    put("trace.jsonl", trace_jsonl());
    put("report.json", report_json().dump(2) + "\n");
    put("report.txt", render_report_text(report));
  }

  static std::vector<RecordTrace> load_traces(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open trace " + path.string());
    std::vector<RecordTrace> traces;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (text::trim(line).empty()) continue;
      try {
        traces.push_back(record_trace_from_json(nlohmann::json::parse(line)));
      } catch (const nlohmann::json::exception& ex) {
        throw ParseError(lineno, std::string("bad trace record: ") + ex.what());
      }
    }
    return traces;
  }

  static RunArtifact load(const std::filesystem::path& dir) {
    RunArtifact a;
    std::ifstream in(dir / "report.json");
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + (dir / "report.json").string());
    nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded()) throw Error(ErrorCode::InvalidConfig, "report.json is not JSON");
    a.report = eval_report_from_json(j);
    a.meta = run_meta_from_json(j);
    a.traces = load_traces(dir / "trace.jsonl");
    return a;
  }
};

inline std::vector<Exemplar> load_exemplars(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open exemplars " + path);
  nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded() || !j.is_array())
    throw Error(ErrorCode::InvalidConfig, "exemplar file must be a JSON array: " + path);
  try {
    auto out = j.get<std::vector<Exemplar>>();
    for (const auto& e : out) e.validate();
    return out;
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::InvalidConfig, "bad exemplar file " + path + ": " + ex.what());
  }
}

/// Full pipeline. `backend` overrides the configured one (tests inject
/// capturing or failing backends). Writes outputs when output_dir is set.
inline RunArtifact run(const RunConfig& cfg, std::shared_ptr<Backend> backend = nullptr) {
  const StyleDataset ds = load_dataset(cfg.dataset_path);
  GenerationSettings gs;
  gs.mode = cfg.mode;
  gs.prompt_template = PromptTemplate::load(cfg.template_path);
  if (cfg.mode == Mode::FewShot) gs.few_shot_pool = load_exemplars(cfg.few_shot_path);
  gs.sampling = cfg.effective_sampling(gs.prompt_template.family);
  gs.refusal_heuristic = cfg.refusal_heuristic;
  gs.parallelism = cfg.parallelism;
  if (!backend) backend = register_backend(cfg.backend);
  const Scorers scorers = build_scorers(cfg);

  RunArtifact a;
  a.meta.system_name = cfg.system_name;
  a.meta.dataset_name = ds.name;
  a.meta.dataset_fingerprint = ds.fingerprint();
  a.meta.mode = std::string(to_string(cfg.mode));
  a.meta.strategy = std::string(to_string(cfg.strategy));
  a.meta.backend_id = backend->id();
  a.meta.seed = gs.sampling.seed;
  a.meta.toggles = cfg.metrics;
  a.meta.bleu = cfg.bleu;

  a.traces = generate(ds, *backend, gs);
  score_traces(a.traces, scorers, cfg.strategy, cfg.parallelism);
  a.report = aggregate(a.traces, a.meta);
  if (!cfg.output_dir.empty()) a.write(cfg.output_dir);
  return a;
}

/// Re-runs selection and scoring on stored candidates without the backend.
inline RunArtifact rescore(const RunArtifact& base, SelectionStrategy strategy, const Scorers& scorers,
                           std::string system_name, int parallelism = 4) {
  RunArtifact a;
  a.meta = base.meta;
  a.meta.system_name = std::move(system_name);
  a.meta.strategy = std::string(to_string(strategy));
  a.meta.toggles = scorers.toggles;
  a.meta.bleu = scorers.bleu;
  a.traces = base.traces;
  score_traces(a.traces, scorers, strategy, parallelism);
  a.report = aggregate(a.traces, a.meta);
  return a;
}

}  // namespace restyle
