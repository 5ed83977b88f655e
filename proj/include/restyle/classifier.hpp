#pragma once

// SPDX-License-Identifier: Apache-2.0

// Style classifiers for transfer accuracy. Wire protocol of the HTTP
// classifier: POST {"text": ...} -> {"label": ..., "score": ...}.

#include <chrono>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "restyle/concurrency.hpp"
#include "restyle/error.hpp"
#include "restyle/http.hpp"
#include "restyle/lexicon.hpp"
#include "restyle/text.hpp"

namespace restyle {

struct Prediction {
  std::string label;
  double score = 0.0;
};

class Classifier {
 public:
  virtual ~Classifier() = default;
  virtual Prediction classify(const std::string& text) = 0;
};

/// Counts lexicon hits; ties are "neutral".
class LexiconClassifier : public Classifier {
 public:
  Prediction classify(const std::string& input) override {
    int pos = 0, neg = 0;
    for (const auto& tok : text::tokenize(input)) {
      pos += lexicon::is_positive(tok) ? 1 : 0;
      neg += lexicon::is_negative(tok) ? 1 : 0;
    }
    if (pos == neg) return {"neutral", 0.5};
    const double margin = static_cast<double>(pos > neg ? pos - neg : neg - pos) / (pos + neg);
    return {pos > neg ? "positive" : "negative", 0.5 + 0.5 * margin};
  }
};

class HttpClassifier : public Classifier {
 public:
  HttpClassifier(std::string endpoint, std::shared_ptr<HttpTransport> transport,
                 std::chrono::milliseconds timeout = std::chrono::milliseconds(5000),
                 RetryPolicy retry = {})
      : endpoint_(std::move(endpoint)),
        transport_(std::move(transport)),
        timeout_(timeout),
        retry_(retry) {
    parse_url(endpoint_);
    if (!transport_) transport_ = std::make_shared<HttplibTransport>();
  }

  Prediction classify(const std::string& input) override {
    const std::string body = nlohmann::json{{"text", input}}.dump();
    HttpResponse res = post_with_retry(*transport_, endpoint_, body,
                                       {{"Content-Type", "application/json"}}, timeout_, retry_);
    if (res.status < 200 || res.status >= 300)
      throw Error(ErrorCode::ClassifierUnavailable,
                  "classifier at " + endpoint_ + " returned status " + std::to_string(res.status));
    try {
      auto j = nlohmann::json::parse(res.body);
      return {j.at("label").get<std::string>(), j.value("score", 0.0)};
    } catch (const nlohmann::json::exception& ex) {
      throw Error(ErrorCode::ClassifierUnavailable, std::string("bad classifier reply: ") + ex.what());
    }
  }

 private:
  std::string endpoint_;
  std::shared_ptr<HttpTransport> transport_;
  std::chrono::milliseconds timeout_;
  RetryPolicy retry_;
};

/// A classifier plus the style -> expected label mapping used for scoring.
struct ClassifierClient {
  std::shared_ptr<Classifier> classifier;
  std::map<std::string, std::string> label_map;
  int parallelism = 4;

  const std::string& expected_label(const std::string& style) const {
    auto it = label_map.find(style);
    if (it == label_map.end())
      throw Error(ErrorCode::UnknownStyle, "no classifier label for style '" + style + "'");
    return it->second;
  }
};

struct StyledOutput {
  std::string text;
  std::string target_style;
};

/// Per-output correctness, in input order.
inline std::vector<bool> classify_outputs(const std::vector<StyledOutput>& outputs,
                                          const ClassifierClient& clf) {
  for (const auto& o : outputs) clf.expected_label(o.target_style);
  std::vector<char> hits(outputs.size(), 0);
  parallel_for(outputs.size(), clf.parallelism, [&](std::size_t i) {
    hits[i] = clf.classifier->classify(outputs[i].text).label ==
              clf.expected_label(outputs[i].target_style);
  });
  return {hits.begin(), hits.end()};
}

inline double transfer_accuracy(const std::vector<StyledOutput>& outputs,
                                const ClassifierClient& clf) {
  if (outputs.empty()) throw Error(ErrorCode::EmptyInput, "transfer_accuracy of no outputs");
  std::size_t correct = 0;
  for (bool b : classify_outputs(outputs, clf)) correct += b ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(outputs.size());
}

/// Binds the classifier wire protocol on `path`.
inline void mount_classifier(httplib::Server& server, std::shared_ptr<Classifier> clf,
                             const std::string& path = "/classify") {
  auto mu = std::make_shared<std::mutex>();
  server.Post(path, [clf, mu](const httplib::Request& req, httplib::Response& res) {
    nlohmann::json body = nlohmann::json::parse(req.body, nullptr, false);
    if (body.is_discarded() || !body.contains("text") || !body["text"].is_string()) {
      res.status = 400;
      res.set_content(R"({"error":"body must be {\"text\": string}"})", "application/json");
      return;
    }
    Prediction p;
    {
      std::lock_guard lock(*mu);
      p = clf->classify(body["text"].get<std::string>());
    }
    res.set_content(nlohmann::json{{"label", p.label}, {"score", p.score}}.dump(),
                    "application/json");
  });
}

}  // namespace restyle
