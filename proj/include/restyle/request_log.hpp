#pragma once

// SPDX-License-Identifier: Apache-2.0

/**
 * Append-only JSONL request log.
 *
 * Line types:
 *   {"type":"request","request_id","timestamp_ms","session_id","source_text",
 *    "instruction","mode","chosen_text","candidate_count","validity_count"}
 *   {"type":"feedback","request_id","timestamp_ms","accepted","chosen_index"}
 *
 * Feedback is an amendment line, never an in-place edit; when reading, the
 * last feedback line for a request wins. A single writer thread drains a
 * bounded queue, writes each batch and fsyncs before completing the
 * futures handed back by append(), so a resolved future means the line is
 * on disk.
 */

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <fstream>
#include <future>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "restyle/error.hpp"
#include "restyle/text.hpp"

namespace restyle {

struct RewriteLogEntry {
  std::string request_id;
  std::int64_t timestamp_ms = 0;
  std::string session_id;
  std::string source_text;
  std::string instruction;
  std::string mode;
  std::optional<std::string> chosen_text;
  std::optional<bool> accepted;
  std::optional<std::size_t> feedback_chosen_index;
  std::size_t candidate_count = 0;
  std::size_t validity_count = 0;
};

inline nlohmann::ordered_json request_line(const RewriteLogEntry& e) {
  return nlohmann::ordered_json{
      {"type", "request"},
      {"request_id", e.request_id},
      {"timestamp_ms", e.timestamp_ms},
      {"session_id", e.session_id},
      {"source_text", e.source_text},
      {"instruction", e.instruction},
      {"mode", e.mode},
      {"chosen_text", e.chosen_text ? nlohmann::ordered_json(*e.chosen_text) : nlohmann::ordered_json(nullptr)},
      {"candidate_count", e.candidate_count},
      {"validity_count", e.validity_count}};
}

inline nlohmann::ordered_json feedback_line(const std::string& request_id, std::int64_t ts,
                                            bool accepted, std::optional<std::size_t> chosen_index) {
  return nlohmann::ordered_json{
      {"type", "feedback"},
      {"request_id", request_id},
      {"timestamp_ms", ts},
      {"accepted", accepted},
      {"chosen_index", chosen_index ? nlohmann::ordered_json(*chosen_index) : nlohmann::ordered_json(nullptr)}};
}

/// Read-side view of a log: requests in file order with feedback applied.
struct LogState {
  std::vector<RewriteLogEntry> entries;
  std::map<std::string, std::size_t> index;

  void apply(const nlohmann::json& j) {
    const std::string type = j.at("type").get<std::string>();
    if (type == "request") {
      RewriteLogEntry e;
      e.request_id = j.at("request_id").get<std::string>();
      e.timestamp_ms = j.at("timestamp_ms").get<std::int64_t>();
      e.session_id = j.at("session_id").get<std::string>();
      e.source_text = j.at("source_text").get<std::string>();
      e.instruction = j.at("instruction").get<std::string>();
      e.mode = j.at("mode").get<std::string>();
      if (!j.at("chosen_text").is_null()) e.chosen_text = j.at("chosen_text").get<std::string>();
      e.candidate_count = j.at("candidate_count").get<std::size_t>();
      e.validity_count = j.at("validity_count").get<std::size_t>();
      index[e.request_id] = entries.size();
      entries.push_back(std::move(e));
    } else if (type == "feedback") {
      auto it = index.find(j.at("request_id").get<std::string>());
      if (it == index.end()) return;  // orphan amendment
      auto& e = entries[it->second];
      e.accepted = j.at("accepted").get<bool>();
      if (!j.at("chosen_index").is_null()) e.feedback_chosen_index = j.at("chosen_index").get<std::size_t>();
      else e.feedback_chosen_index.reset();
    }
  }

  static LogState read(const std::string& path) {
    LogState s;
    std::ifstream in(path);
    if (!in) return s;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (text::trim(line).empty()) continue;
      nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
      // A torn final line from a crash mid-write is skipped.
      if (j.is_discarded()) continue;
      try {
        s.apply(j);
      } catch (const nlohmann::json::exception& ex) {
        throw ParseError(lineno, std::string("bad log line: ") + ex.what());
      }
    }
    return s;
  }

  /// {total, unique_instructions (sorted), instruction_counts, feedback_count, acceptance_rate}
  nlohmann::ordered_json summary() const {
    std::map<std::string, std::size_t> counts;
    std::size_t feedback = 0, accepted = 0;
    for (const auto& e : entries) {
      ++counts[e.instruction];
      if (e.accepted) {
        ++feedback;
        accepted += *e.accepted ? 1 : 0;
      }
    }
    nlohmann::ordered_json uniques = nlohmann::ordered_json::array();
    nlohmann::ordered_json per = nlohmann::ordered_json::object();
    for (const auto& [instr, n] : counts) {
      uniques.push_back(instr);
      per[instr] = n;
    }
    return nlohmann::ordered_json{
        {"total", entries.size()},
        {"unique_instructions", std::move(uniques)},
        {"instruction_counts", std::move(per)},
        {"feedback_count", feedback},
        {"acceptance_rate", feedback ? nlohmann::ordered_json(static_cast<double>(accepted) /
                                                              static_cast<double>(feedback))
                                     : nlohmann::ordered_json(nullptr)}};
  }
};

class RequestLogWriter {
 public:
  explicit RequestLogWriter(const std::string& path, std::size_t queue_capacity = 1024)
      : path_(path), capacity_(queue_capacity) {
    fd_ = ::open(path.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
    if (fd_ < 0) throw Error(ErrorCode::IoError, "cannot open request log " + path);
    terminate_torn_line();
    worker_ = std::thread([this] { loop(); });
  }

  ~RequestLogWriter() {
    {
      std::lock_guard lock(mu_);
      stopping_ = true;
    }
    not_empty_.notify_all();
    if (worker_.joinable()) worker_.join();
    ::close(fd_);
  }

  RequestLogWriter(const RequestLogWriter&) = delete;
  RequestLogWriter& operator=(const RequestLogWriter&) = delete;

  /// Enqueues one line (newline added). Blocks while the queue is full.
  std::future<void> append(std::string line) {
    std::promise<void> done;
    auto fut = done.get_future();
    {
      std::unique_lock lock(mu_);
      not_full_.wait(lock, [&] { return queue_.size() < capacity_ || stopping_; });
      if (stopping_) throw Error(ErrorCode::IoError, "request log is closed");
      queue_.push_back({std::move(line), std::move(done)});
    }
    not_empty_.notify_one();
    return fut;
  }

  const std::string& path() const { return path_; }

 private:
  struct Pending {
    std::string line;
    std::promise<void> done;
  };

  void loop() {
    while (true) {
      std::deque<Pending> batch;
      {
        std::unique_lock lock(mu_);
        not_empty_.wait(lock, [&] { return !queue_.empty() || stopping_; });
        if (queue_.empty() && stopping_) return;
        batch.swap(queue_);
      }
      not_full_.notify_all();
      std::string buf;
      for (const auto& p : batch) buf += p.line + "\n";
      std::exception_ptr err;
      try {
        write_all(buf);
        if (::fsync(fd_) != 0) throw Error(ErrorCode::IoError, "fsync failed on " + path_);
      } catch (...) {
        err = std::current_exception();
      }
      for (auto& p : batch) {
        if (err) p.done.set_exception(err);
        else p.done.set_value();
      }
    }
  }

  // A crash mid-write can leave a final line without its newline; start
  // fresh so the next record is not glued onto it.
  void terminate_torn_line() {
    const int rfd = ::open(path_.c_str(), O_RDONLY | O_CLOEXEC);
    if (rfd < 0) return;
    char last = '\n';
    const off_t size = ::lseek(rfd, 0, SEEK_END);
    if (size > 0 && ::pread(rfd, &last, 1, size - 1) != 1) last = '\n';
    ::close(rfd);
    if (last != '\n') write_all("\n");
  }

  void write_all(const std::string& buf) {
    std::size_t off = 0;
    while (off < buf.size()) {
      const ssize_t n = ::write(fd_, buf.data() + off, buf.size() - off);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw Error(ErrorCode::IoError, "write failed on " + path_);
      }
      off += static_cast<std::size_t>(n);
    }
  }

  std::string path_;
  std::size_t capacity_;
  int fd_ = -1;
  std::mutex mu_;
  std::condition_variable not_empty_;
  std::condition_variable not_full_;
  std::deque<Pending> queue_;
  bool stopping_ = false;
  std::thread worker_;
};

}  // namespace restyle
