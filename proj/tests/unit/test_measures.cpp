// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <thread>

#include "restyle/classifier.hpp"
#include "restyle/measures.hpp"
#include "support.hpp"

using namespace restyle;

TEST(WordInclusion, PublishedRewrites) {
  EXPECT_TRUE(word_inclusion(
      "There, in the middle of Central Park, stood an old man in a weatherbeaten brown coat.", "park"));
  EXPECT_TRUE(word_inclusion("There, in the middle of the street, stood an old man with several colourful "
                             "balloons tied to the straps of his coat.",
                             "balloon"));
}

TEST(WordInclusion, FixtureLedger) {
  const auto cases = testsupport::read_json(testsupport::source_path("tests/fixtures/word_inclusion.json"));
  ASSERT_EQ(cases.size(), 20u);
  for (const auto& c : cases) {
    SCOPED_TRACE(c["note"].get<std::string>());
    EXPECT_EQ(word_inclusion(c["text"].get<std::string>(), c["word"].get<std::string>()), c["expected"].get<bool>());
  }
}

TEST(WordInclusion, EmptyTargetRejected) {
  try {
    word_inclusion("text", " ");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyField);
  }
}

TEST(WordInclusion, TargetWordFromStyle) {
  EXPECT_EQ(target_word_from_style("include the word \"park\""), "park");
  EXPECT_EQ(target_word_from_style("Include the word 'Balloon'"), "balloon");
  EXPECT_EQ(target_word_from_style("includes the word \xE2\x80\x9Csnow\xE2\x80\x9D"), "snow");
  EXPECT_EQ(target_word_from_style("include the word park"), "park");
  EXPECT_FALSE(target_word_from_style("more comic"));
  EXPECT_FALSE(target_word_from_style("include a metaphor"));
}

TEST(LengthRatio, CodePointsAndErrors) {
  EXPECT_DOUBLE_EQ(length_ratio("abcdef", "abc"), 2.0);
  EXPECT_DOUBLE_EQ(length_ratio("caf\xC3\xA9", "cafe"), 1.0);
  try {
    length_ratio("x", "");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptySource);
  }
  EXPECT_DOUBLE_EQ(mean_length_ratio({{"aa", "a"}, {"a", "a"}}), 1.5);
}

TEST(Classifier, LexiconLabels) {
  LexiconClassifier c;
  EXPECT_EQ(c.classify("The food was great and the staff friendly.").label, "positive");
  EXPECT_EQ(c.classify("Awful, dirty, slow.").label, "negative");
  EXPECT_EQ(c.classify("good but slow").label, "neutral");
  EXPECT_EQ(c.classify("nothing here").label, "neutral");
}

TEST(Classifier, TransferAccuracyWithLabelMap) {
  ClassifierClient client{std::make_shared<LexiconClassifier>(),
                          {{"more positive", "positive"}, {"more negative", "negative"}}, 2};
  const std::vector<StyledOutput> outs{{"a great meal", "more positive"},
                                       {"a terrible meal", "more positive"},
                                       {"a terrible meal", "more negative"},
                                       {"a meal", "more negative"}};
  EXPECT_DOUBLE_EQ(transfer_accuracy(outs, client), 0.5);
  EXPECT_EQ(classify_outputs(outs, client), (std::vector<bool>{true, false, true, false}));
  try {
    transfer_accuracy({{"x", "more whimsical"}}, client);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnknownStyle);
  }
  try {
    transfer_accuracy({}, client);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyInput);
  }
}

TEST(Classifier, HttpWireAndFailures) {
  auto transport = std::make_shared<testsupport::CapturingTransport>();
  transport->scripted.push_back({200, R"({"label":"positive","score":0.9})"});
  HttpClassifier c("http://clf.local/classify", transport, std::chrono::milliseconds(100),
                   RetryPolicy{1, std::chrono::milliseconds(0), std::chrono::milliseconds(0)});
  EXPECT_EQ(c.classify("so good").label, "positive");
  EXPECT_EQ(nlohmann::json::parse(transport->requests()[0].body), (nlohmann::json{{"text", "so good"}}));
  EXPECT_EQ(transport->requests()[0].url, "http://clf.local/classify");
  transport->scripted.push_back({500, "boom"});
  try {
    c.classify("x");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ClassifierUnavailable);
  }
  transport->scripted.push_back({200, "not json"});
  EXPECT_THROW(c.classify("x"), Error);
}

TEST(Classifier, MountedServerRoundTrip) {
  httplib::Server server;
  mount_classifier(server, std::make_shared<LexiconClassifier>());
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread t([&] { server.listen_after_bind(); });
  server.wait_until_ready();
  HttpClassifier c("http://127.0.0.1:" + std::to_string(port) + "/classify", nullptr);
  EXPECT_EQ(c.classify("the soup was cold").label, "negative");
  httplib::Client raw("127.0.0.1", port);
  auto res = raw.Post("/classify", "{}", "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 400);
  server.stop();
  t.join();
}
