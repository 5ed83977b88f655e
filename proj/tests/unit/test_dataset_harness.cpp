// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>

#include "oracle/lm_oracle.hpp"
#include "restyle/harness.hpp"
#include "support.hpp"

using namespace restyle;

TEST(Dataset, JsonlAndTsvTwinsAreEqual) {
  const auto j = load_dataset(testsupport::source_path("tests/fixtures/twin.jsonl"));
  const auto t = load_dataset(testsupport::source_path("tests/fixtures/twin.tsv"));
  ASSERT_EQ(j.records.size(), 3u);
  EXPECT_EQ(j.records, t.records);
  EXPECT_EQ(j.fingerprint(), t.fingerprint());
  EXPECT_EQ(j.records[1].source_text, "Tabs\there and \"quotes\".");
  EXPECT_EQ(j.records[1].references.size(), 2u);
  EXPECT_TRUE(j.records[2].references.empty());
}

TEST(Dataset, ErrorsCarryLineNumbers) {
  testsupport::TempDir dir;
  const auto path = dir.file("bad.jsonl");
  testsupport::write_file(path,
                          "{\"id\":\"a\",\"source_text\":\"x\",\"target_style\":\"s\"}\n\n"
                          "{\"id\":\"b\",\"source_text\":\"\",\"target_style\":\"s\"}\n");
  try {
    load_dataset(path);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
    EXPECT_EQ(e.code(), ErrorCode::ParseError);
  }
  testsupport::write_file(path, "{\"id\":\"a\",\"source_text\":\"x\",\"target_style\":\"s\"}\nnot json\n");
  try {
    load_dataset(path);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  testsupport::write_file(path,
                          "{\"id\":\"a\",\"source_text\":\"x\",\"target_style\":\"s\"}\n"
                          "{\"id\":\"a\",\"source_text\":\"y\",\"target_style\":\"s\"}\n");
  try {
    load_dataset(path);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DuplicateId);
  }
  const auto tsv = dir.file("bad.tsv");
  testsupport::write_file(tsv, "source_text\tid\ttarget_style\n");
  EXPECT_THROW(load_dataset(tsv), ParseError);
  EXPECT_THROW(load_dataset(dir.file("missing.jsonl")), Error);
}

namespace {

// a: one valid candidate, b: none valid, c: backend has no fixture,
// d: style absent from the label map
struct ScoringFixture {
  testsupport::TempDir dir;
  StyleDataset ds;
  std::shared_ptr<ManagedBackend> backend;
  GenerationSettings gs;
  Scorers scorers;
  std::vector<RecordTrace> traces;
  RunMeta meta;

  ScoringFixture() {
    const auto path = dir.file("mini.jsonl");
    testsupport::write_file(
        path,
        R"({"id":"a","source_text":"the food was bad","target_style":"more positive","references":["the food was good"]})"
        "\n"
        R"({"id":"b","source_text":"the staff was rude","target_style":"more positive","references":["the staff was friendly"]})"
        "\n"
        R"({"id":"c","source_text":"no fixture here","target_style":"more positive","references":["x"]})"
        "\n"
        R"({"id":"d","source_text":"a cold room","target_style":"more whimsical"})"
        "\n");
    ds = load_dataset(path);
    BackendSpec spec;
    spec.kind = "mock";
    spec.mock_mode = MockMode::Fixtures;
    spec.fixtures = nlohmann::json::array({
        {{"source", "the food was bad"}, {"outputs", {"{the food was good}", "nope"}}},
        {{"source", "the staff was rude"}, {"outputs", {"nope", "still nope"}}},
        {{"source", "a cold room"}, {"outputs", {"{a warm room}"}}},
    });
    backend = register_backend(spec);
    gs.prompt_template = PromptTemplate::load(testsupport::source_path("templates/aug_zero_v1.json"));
    gs.sampling = default_sampling(Family::Completion);
    gs.sampling.n_candidates = 2;
    gs.parallelism = 2;

    scorers.classifier = ClassifierClient{std::make_shared<LexiconClassifier>(), {{"more positive", "positive"}}, 2};
    NgramLanguageModel::Params p{3, LmSmoothing::AddK, 0.1, 0.4};
    scorers.lm = std::make_shared<NgramPerplexityScorer>(
        NgramLanguageModel::train(read_lines(testsupport::source_path("data/lm_corpus.txt")), p));

    meta.dataset_name = ds.name;
    meta.dataset_fingerprint = ds.fingerprint();
    meta.toggles = scorers.toggles;
    meta.bleu = scorers.bleu;

    traces = generate(ds, *backend, gs);
    score_traces(traces, scorers, SelectionStrategy::MaxBleuToSource, 2);
  }
};

}  // namespace

TEST(Harness, PerRecordOutcomes) {
  ScoringFixture f;
  const auto& a = f.traces[0];
  EXPECT_EQ(a.chosen_text, "the food was good");
  EXPECT_EQ(a.metrics.correct, true);
  EXPECT_DOUBLE_EQ(*a.metrics.sentence_bleu, 1.0);
  EXPECT_TRUE(a.errors.empty());

  const auto& b = f.traces[1];
  EXPECT_FALSE(b.chosen_text);
  EXPECT_EQ(b.metrics.correct, false);
  EXPECT_EQ(*b.metrics.sentence_bleu, 0.0);
  EXPECT_FALSE(b.metrics.lm);
  EXPECT_EQ(b.selection->valid_count, 0u);

  const auto& c = f.traces[2];
  EXPECT_TRUE(c.generation_failed());
  ASSERT_EQ(c.errors.size(), 1u);
  EXPECT_EQ(c.errors[0].stage, "complete");
  EXPECT_EQ(c.errors[0].code, "BackendUnavailable");
  EXPECT_FALSE(c.selection);

  const auto& d = f.traces[3];
  EXPECT_EQ(d.chosen_text, "a warm room");
  EXPECT_FALSE(d.metrics.correct);
  ASSERT_EQ(d.errors.size(), 1u);
  EXPECT_EQ(d.errors[0].stage, "classify");
  EXPECT_EQ(d.errors[0].code, "UnknownStyle");
  EXPECT_FALSE(d.metrics.sentence_bleu);
}

TEST(Harness, AggregateExcludesGenerationErrors) {
  ScoringFixture f;
  const auto r = aggregate(f.traces, f.meta);
  EXPECT_EQ(r.n_examples, 3u);
  EXPECT_EQ(r.n_errors, 2u);
  EXPECT_EQ(r.n_candidates_total, 6u);
  EXPECT_DOUBLE_EQ(*r.validity_rate, 3.0 / 6.0);
  EXPECT_EQ(r.records_all_invalid, 1u);
  EXPECT_DOUBLE_EQ(*r.accuracy, 0.5);
  EXPECT_DOUBLE_EQ(*r.accuracy_valid_only, 1.0);
  EXPECT_DOUBLE_EQ(*r.mean_sentence_bleu, 0.5);
  EXPECT_EQ(r.perplexity_excluded, 1u);
  EXPECT_EQ(r.records_without_references, 1u);
  EXPECT_EQ(r.max_references_per_record, 1u);

  // corpus-level perplexity over the two valid outputs
  std::vector<std::vector<std::string>> corpus;
  for (const auto& line : read_lines(testsupport::source_path("data/lm_corpus.txt"))) corpus.push_back(text::tokenize(line));
  const oracle::AddKLm lm(corpus, 3, 0.1);
  const auto ta = text::tokenize("the food was good");
  const auto td = text::tokenize("a warm room");
  const double expected = std::exp((lm.nll(ta) + lm.nll(td)) / static_cast<double>(ta.size() + 1 + td.size() + 1));
  EXPECT_NEAR(*r.perplexity, expected, 1e-9 * expected);
  // not the mean of per-record perplexities
  const double mean_ppl = (std::exp(lm.nll(ta) / 5.0) + std::exp(lm.nll(td) / 4.0)) / 2.0;
  EXPECT_GT(std::abs(*r.perplexity - mean_ppl), 1e-6);
}

TEST(Harness, ValidityIsCandidateLevel) {
  // 1 of 4 and 2 of 2 valid: candidate-level 3/6, record mean would be 0.625
  std::vector<RecordTrace> traces(2);
  traces[0].candidates = parse_candidates({"{ok}", "x", "y", "z"});
  traces[1].candidates = parse_candidates({"{ok}", "{fine}"});
  for (auto& t : traces) {
    t.source_text = "ok";
    t.target_style = "s";
  }
  Scorers sc;
  sc.toggles = {false, false, false, false, false};
  score_traces(traces, sc, SelectionStrategy::FirstValid, 1);
  RunMeta meta;
  meta.toggles = sc.toggles;
  const auto r = aggregate(traces, meta);
  EXPECT_DOUBLE_EQ(*r.validity_rate, 0.5);
  EXPECT_FALSE(r.accuracy);
  EXPECT_FALSE(r.bleu);
  EXPECT_FALSE(r.perplexity);
}

TEST(Harness, ClassifierOutageLeavesCorrectnessNull) {
  ScoringFixture f;
  auto transport = std::make_shared<testsupport::CapturingTransport>();
  transport->handler = [](const testsupport::CapturingTransport::Request&) { return HttpResponse{500, ""}; };
  f.scorers.classifier->classifier = std::make_shared<HttpClassifier>(
      "http://clf.local/classify", transport, std::chrono::milliseconds(10),
      RetryPolicy{1, std::chrono::milliseconds(0), std::chrono::milliseconds(0)});
  score_traces(f.traces, f.scorers, SelectionStrategy::MaxBleuToSource, 1);
  EXPECT_FALSE(f.traces[0].metrics.correct);
  EXPECT_EQ(f.traces[0].errors.at(0).code, "ClassifierUnavailable");
  // an invalid record needs no classifier call
  EXPECT_EQ(f.traces[1].metrics.correct, false);
  const auto r = aggregate(f.traces, f.meta);
  EXPECT_DOUBLE_EQ(*r.accuracy, 0.0);
  EXPECT_FALSE(r.accuracy_valid_only);
  EXPECT_EQ(r.n_errors, 3u);
  // scoring again clears stale classifier errors
  f.scorers.classifier->classifier = std::make_shared<LexiconClassifier>();
  score_traces(f.traces, f.scorers, SelectionStrategy::MaxBleuToSource, 1);
  EXPECT_EQ(f.traces[0].metrics.correct, true);
  EXPECT_TRUE(f.traces[0].errors.empty());
}

TEST(Harness, TraceJsonRoundTrip) {
  ScoringFixture f;
  for (const auto& t : f.traces) {
    const auto j = to_json(t);
    EXPECT_EQ(to_json(record_trace_from_json(nlohmann::json::parse(j.dump()))).dump(), j.dump());
  }
}

namespace {

RunConfig sentiment_config(const std::string& out_dir) {
  auto cfg = RunConfig::load(testsupport::source_path("configs/run_sentiment_aug.json"));
  cfg.output_dir = out_dir;
  return cfg;
}

}  // namespace

TEST(Harness, RunIsDeterministicAndReloads) {
  testsupport::TempDir dir;
  const auto a = run(sentiment_config(dir.file("a")));
  const auto b = run(sentiment_config(dir.file("b")));
  EXPECT_EQ(a.trace_jsonl(), b.trace_jsonl());
  EXPECT_EQ(a.report_json().dump(), b.report_json().dump());
  EXPECT_EQ(testsupport::read_file(dir.file("a/report.json")), testsupport::read_file(dir.file("b/report.json")));
  EXPECT_EQ(a.report.n_examples, 20u);
  EXPECT_EQ(a.report.n_candidates_total, 320u);

  const auto loaded = RunArtifact::load(dir.file("a"));
  EXPECT_EQ(loaded.report, a.report);
  EXPECT_EQ(loaded.trace_jsonl(), a.trace_jsonl());
  EXPECT_EQ(aggregate(loaded.traces, loaded.meta), a.report);
  EXPECT_EQ(eval_report_from_json(nlohmann::json::parse(a.report_json().dump())), a.report);
}

TEST(Harness, RescoreUsesStoredCandidates) {
  testsupport::TempDir dir;
  const auto cfg = sentiment_config(dir.file("a"));
  const auto base = run(cfg);
  const auto loaded = RunArtifact::load(dir.file("a"));
  const auto scorers = build_scorers(cfg);

  const auto same = rescore(loaded, SelectionStrategy::MaxBleuToSource, scorers, base.meta.system_name);
  EXPECT_EQ(same.report, base.report);

  const auto fv = rescore(loaded, SelectionStrategy::FirstValid, scorers, "first_valid");
  EXPECT_EQ(fv.report.strategy, "first_valid");
  EXPECT_EQ(fv.report.validity_rate, base.report.validity_rate);
  EXPECT_EQ(fv.report.backend_id, base.report.backend_id);
  for (std::size_t i = 0; i < fv.traces.size(); ++i) {
    EXPECT_EQ(fv.traces[i].candidates, base.traces[i].candidates);
    EXPECT_EQ(fv.traces[i].prompt_sha256, base.traces[i].prompt_sha256);
  }
  // max-BLEU selection never scores below first-valid on the source-BLEU it optimizes
  EXPECT_GE(*base.report.mean_bleu_to_source, *fv.report.mean_bleu_to_source);
}

TEST(Report, CompareRequiresSameDataset) {
  EvalReport a, b;
  a.system_name = "a";
  b.system_name = "b";
  a.dataset_fingerprint = b.dataset_fingerprint = "f";
  a.accuracy = 0.5;
  const auto t = compare({a, b});
  ASSERT_EQ(t.rows.size(), 2u);
  EXPECT_EQ(t.rows[0].accuracy, 0.5);
  EXPECT_NE(t.render_text().find("System"), std::string::npos);
  b.dataset_fingerprint = "g";
  try {
    compare({a, b});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DatasetMismatch);
  }
  EXPECT_THROW(compare({a}), Error);
}

TEST(Report, JsonRoundTripWithNulls) {
  EvalReport r;
  r.system_name = "s";
  r.seed = 7;
  r.bleu = 0.25;
  r.n_examples = 3;
  const auto back = eval_report_from_json(nlohmann::json::parse(to_json(r).dump()));
  EXPECT_EQ(back, r);
  EXPECT_TRUE(to_json(r)["accuracy"].is_null());
}

TEST(RunConfigTest, RejectsBadConfigs) {
  const auto base = testsupport::read_json(testsupport::source_path("configs/run_sentiment_aug.json"));
  const std::filesystem::path dir = testsupport::source_path("configs");
  EXPECT_NO_THROW(RunConfig::from_json(base, dir).validate());
  auto bad = base;
  bad["strategy"] = "best_vibes";
  EXPECT_THROW(RunConfig::from_json(bad, dir).validate(), Error);
  bad = base;
  bad["sampling"]["n_candidates"] = 0;
  EXPECT_THROW(RunConfig::from_json(bad, dir).validate(), Error);
  bad = base;
  bad["classifier"]["kind"] = "oracle";
  EXPECT_THROW(build_scorers(RunConfig::from_json(bad, dir)), Error);
}
