// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracle/lm_oracle.hpp"
#include "restyle/ngram_lm.hpp"
#include "restyle/perplexity_scorer.hpp"
#include "support.hpp"

using namespace restyle;

namespace {

NgramLanguageModel::Params add_k(int order, double k) { return {order, LmSmoothing::AddK, k, 0.4}; }

std::vector<std::string> trigram_corpus() {
  return read_lines(testsupport::source_path("tests/fixtures/trigram_corpus.txt"));
}

// Corpus of V-1 identical sentences over V-1 distinct words: every word and
// "</s>" occurs V-1 times, so the k=0 unigram model is uniform over V symbols.
std::vector<std::string> uniform_corpus(int v) {
  std::string sentence;
  for (int i = 1; i < v; ++i) sentence += (i > 1 ? " w" : "w") + std::to_string(i);
  return std::vector<std::string>(static_cast<std::size_t>(v - 1), sentence);
}

}  // namespace

TEST(NgramLm, UnigramMaximumLikelihood) {
  // tokens: a b </s> a c </s> -> P(a) = 2/6
  const auto lm = NgramLanguageModel::train({"a b", "a c"}, add_k(1, 0.0));
  EXPECT_NEAR(lm.prob("a", {}), 2.0 / 6.0, 1e-15);
  EXPECT_NEAR(lm.prob("</s>", {}), 2.0 / 6.0, 1e-15);
  EXPECT_EQ(lm.prob("zzz", {}), 0.0);
}

TEST(NgramLm, SingleTokenPerplexity) {
  // P(a) = P(</s>) = 1/2; scoring "a" sees a and </s>
  const auto lm = NgramLanguageModel::train({"a"}, add_k(1, 0.0));
  const auto s = lm.score("a");
  EXPECT_EQ(s.token_count, 2u);
  EXPECT_NEAR(s.nll_sum, 2 * std::log(2.0), 1e-15);
  EXPECT_NEAR(s.perplexity(), 2.0, 1e-12);
}

TEST(NgramLm, UniformUnigramPerplexityIsVocabularySize) {
  for (int v : {2, 10, 100}) {
    const auto corpus = uniform_corpus(v);
    const auto lm = NgramLanguageModel::train(corpus, add_k(1, 0.0));
    ASSERT_EQ(static_cast<int>(lm.vocabulary().size()), v);
    const double ppl = lm.score(corpus.front()).perplexity();
    EXPECT_NEAR(ppl, static_cast<double>(v), 1e-12 * v) << "V=" << v;
  }
}

TEST(NgramLm, HandComputedTrigramAddOne) {
  // corpus "a b" / "a c" / "b a b", order 3, k = 1, |V| = 4 (a b c </s>), V+1 = 5
  //   c(<s> <s>) = 3: a 2, b 1      c(<s> a) = 2: b 1, c 1
  //   c(a b) = 2: </s> 2            c(<s> c), c(c a) = 0
  const auto lm = NgramLanguageModel::train(trigram_corpus(), add_k(3, 1.0));
  const std::vector<std::string> bos{"<s>", "<s>"};
  const std::vector<std::string> s_a{"<s>", "a"}, a_b{"a", "b"}, s_c{"<s>", "c"}, c_a{"c", "a"};
  EXPECT_NEAR(-std::log(lm.prob("a", bos)), std::log(8.0 / 3.0), 1e-12);     // (2+1)/(3+5)
  EXPECT_NEAR(-std::log(lm.prob("b", s_a)), std::log(7.0 / 2.0), 1e-12);     // (1+1)/(2+5)
  EXPECT_NEAR(-std::log(lm.prob("</s>", a_b)), std::log(7.0 / 3.0), 1e-12);  // (2+1)/(2+5)
  EXPECT_NEAR(-std::log(lm.prob("c", bos)), std::log(8.0), 1e-12);           // (0+1)/(3+5)
  EXPECT_NEAR(-std::log(lm.prob("a", s_c)), std::log(5.0), 1e-12);           // unseen: 1/5
  EXPECT_NEAR(-std::log(lm.prob("</s>", c_a)), std::log(5.0), 1e-12);
  const auto s = lm.score("a b");
  EXPECT_EQ(s.token_count, 3u);
  EXPECT_NEAR(s.nll_sum, std::log(8.0 / 3.0) + std::log(7.0 / 2.0) + std::log(7.0 / 3.0), 1e-12);
}

TEST(NgramLm, AgreesWithScanningOracle) {
  std::mt19937 rng(17);
  auto sentence = [&] {
    std::vector<std::string> t(1 + rng() % 6);
    for (auto& w : t) w = std::string(1, static_cast<char>('a' + rng() % 5));
    return t;
  };
  auto join = [](const std::vector<std::string>& t) {
    std::string s;
    for (const auto& w : t) s += (s.empty() ? "" : " ") + w;
    return s;
  };
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<std::vector<std::string>> toks;
    std::vector<std::string> lines;
    for (int i = 0; i < 8; ++i) {
      toks.push_back(sentence());
      lines.push_back(join(toks.back()));
    }
    const int order = 1 + static_cast<int>(rng() % 3);
    const double k = (rng() % 2) ? 0.5 : 0.0;
    const auto lm = NgramLanguageModel::train(lines, add_k(order, k));
    const oracle::AddKLm ref(toks, order, k);
    for (int q = 0; q < 10; ++q) {
      auto t = sentence();
      if (k == 0) t = toks[rng() % toks.size()];  // k = 0 is only finite on seen text
      ASSERT_NEAR(lm.score(join(t)).nll_sum, ref.nll(t), 1e-9);
    }
  }
}

TEST(NgramLm, AddKNormalizesOverPredictedSymbols) {
  std::vector<std::string> corpus = read_lines(testsupport::source_path("data/lm_corpus.txt"));
  const auto lm = NgramLanguageModel::train(corpus, add_k(3, 0.1));
  const auto symbols = lm.predicted_symbols();
  std::vector<std::string> ctx_pool(lm.vocabulary().begin(), lm.vocabulary().end());
  ctx_pool.push_back("<s>");
  ctx_pool.push_back("never-seen");
  std::mt19937 rng(23);
  for (int i = 0; i < 100; ++i) {
    const std::vector<std::string> ctx{ctx_pool[rng() % ctx_pool.size()], ctx_pool[rng() % ctx_pool.size()]};
    double total = 0;
    for (const auto& w : symbols) total += lm.prob(w, ctx);
    ASSERT_NEAR(total, 1.0, 1e-9);
  }
}

TEST(NgramLm, LargeKApproachesUniform) {
  const auto lm = NgramLanguageModel::train(trigram_corpus(), add_k(3, 1e12));
  const double uniform = 1.0 / static_cast<double>(lm.predicted_symbols().size());
  for (const auto& w : lm.predicted_symbols())
    EXPECT_NEAR(lm.prob(w, std::vector<std::string>{"<s>", "a"}), uniform, 1e-9);
}

TEST(NgramLm, PerplexityIsExpOfCrossEntropy) {
  const auto lm = NgramLanguageModel::train(read_lines(testsupport::source_path("data/lm_corpus.txt")), add_k(3, 0.1));
  for (const char* s : {"the food was good .", "an entirely novel sentence", "we will be back"}) {
    EXPECT_NEAR(perplexity(s, lm), std::exp(cross_entropy(s, lm)), 1e-12 * perplexity(s, lm));
    const auto sc = lm.score(s);
    EXPECT_NEAR(cross_entropy(s, lm), sc.nll_sum / static_cast<double>(sc.token_count), 1e-15);
  }
}

TEST(NgramLm, OutOfVocabularyIsFinite) {
  const auto lm = NgramLanguageModel::train(trigram_corpus(), add_k(3, 0.1));
  const auto s = lm.score("quux zap");
  EXPECT_TRUE(std::isfinite(s.nll_sum));
  EXPECT_EQ(s.token_count, 3u);
}

TEST(NgramLm, StupidBackoffValues) {
  NgramLanguageModel::Params p{3, LmSmoothing::StupidBackoff, 0.0, 0.4};
  const auto lm = NgramLanguageModel::train(trigram_corpus(), p);
  // seen trigram: relative frequency
  EXPECT_NEAR(lm.prob("a", std::vector<std::string>{"<s>", "<s>"}), 2.0 / 3.0, 1e-15);
  // (<s>, a) never followed by a; bigram (a) -> a unseen; unigram a: 3/10 (N = 10)
  EXPECT_NEAR(lm.prob("a", std::vector<std::string>{"<s>", "a"}), 0.4 * 0.4 * 3.0 / 10.0, 1e-15);
  // (b, a) -> b seen once of once
  EXPECT_NEAR(lm.prob("b", std::vector<std::string>{"b", "a"}), 1.0, 1e-15);
  // OOV: alpha^3 / (N + |V| + 1) with N = 10 predicted tokens, |V| = 4
  EXPECT_NEAR(lm.prob("zzz", std::vector<std::string>{"a", "b"}), 0.064 / 15.0, 1e-15);
}

TEST(NgramLm, Errors) {
  try {
    NgramLanguageModel::train({"", "   "}, add_k(3, 0.1));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyCorpus);
  }
  const auto lm = NgramLanguageModel::train({"a b"}, add_k(2, 0.1));
  try {
    lm.score("  ");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyText);
  }
  EXPECT_THROW(NgramLanguageModel::train({"a"}, add_k(0, 0.1)), Error);
  EXPECT_THROW(NgramLanguageModel::train({"a"}, add_k(2, -1)), Error);
  EXPECT_THROW(parse_lm_smoothing("kneser_ney"), Error);
}

TEST(NgramLm, ScorerWrapsModel) {
  const auto lm = NgramLanguageModel::train(trigram_corpus(), add_k(3, 1.0));
  NgramPerplexityScorer scorer(lm);
  const auto s = scorer.score("a b");
  EXPECT_NEAR(s.nll_sum, lm.score("a b").nll_sum, 0);
}

TEST(NgramLm, HttpScorerUsesTransport) {
  auto transport = std::make_shared<testsupport::CapturingTransport>();
  transport->scripted.push_back({200, R"({"nll_sum": 4.5, "token_count": 3})"});
  HttpPerplexityScorer scorer("http://lm.local/score", transport);
  const auto s = scorer.score("hello there");
  EXPECT_DOUBLE_EQ(s.nll_sum, 4.5);
  EXPECT_EQ(s.token_count, 3u);
  ASSERT_EQ(transport->requests().size(), 1u);
  EXPECT_EQ(nlohmann::json::parse(transport->requests()[0].body)["text"], "hello there");
}
