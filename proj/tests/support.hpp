#pragma once

// SPDX-License-Identifier: Apache-2.0

// Helpers shared by the unit tests and the acceptance binary.

#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <atomic>
#include <chrono>
#include <cstdio>
#include <deque>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "restyle/http.hpp"

#ifndef RESTYLE_SOURCE_DIR
#define RESTYLE_SOURCE_DIR "."
#endif

namespace testsupport {

inline std::string source_path(const std::string& rel) { return std::string(RESTYLE_SOURCE_DIR) + "/" + rel; }

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << content;
}

inline nlohmann::json read_json(const std::string& path) { return nlohmann::json::parse(read_file(path)); }

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("restyle-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++) + "-" +
             std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

/// Records every request and replies from a scripted queue (or a handler).
class CapturingTransport : public restyle::HttpTransport {
 public:
  struct Request {
    std::string url;
    std::string body;
    restyle::HttpHeaders headers;
  };

  std::function<restyle::HttpResponse(const Request&)> handler;
  std::deque<restyle::HttpResponse> scripted;

  restyle::HttpResponse post(const std::string& url, const std::string& body,
                             const restyle::HttpHeaders& headers, std::chrono::milliseconds) override {
    std::lock_guard lock(mu_);
    requests_.push_back({url, body, headers});
    if (!scripted.empty()) {
      auto r = scripted.front();
      scripted.pop_front();
      return r;
    }
    if (handler) return handler(requests_.back());
    return {503, "no scripted response"};
  }

  std::vector<Request> requests() const {
    std::lock_guard lock(mu_);
    return requests_;
  }

 private:
  mutable std::mutex mu_;
  std::vector<Request> requests_;
};

/// OpenAI-style completion reply with one choice per text.
inline restyle::HttpResponse completion_reply(const std::vector<std::string>& texts) {
  nlohmann::json j;
  j["choices"] = nlohmann::json::array();
  for (const auto& t : texts) j["choices"].push_back(nlohmann::json{{"text", t}});
  return {200, j.dump()};
}

inline restyle::HttpResponse chat_reply(const std::vector<std::string>& texts) {
  nlohmann::json j;
  j["choices"] = nlohmann::json::array();
  for (const auto& t : texts)
    j["choices"].push_back(nlohmann::json{{"message", {{"role", "assistant"}, {"content", t}}}});
  return {200, j.dump()};
}

struct CommandResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

/// Runs argv to completion, capturing stdout and stderr.
inline CommandResult run_command(const std::vector<std::string>& argv) {
  TempDir tmp;
  const std::string out_path = tmp.file("out"), err_path = tmp.file("err");
  const pid_t pid = ::fork();
  if (pid == 0) {
    std::freopen(out_path.c_str(), "w", stdout);
    std::freopen(err_path.c_str(), "w", stderr);
    std::vector<char*> args;
    for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
    args.push_back(nullptr);
    ::execv(args[0], args.data());
    std::_Exit(127);
  }
  int status = 0;
  ::waitpid(pid, &status, 0);
  CommandResult r;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : 128 + WTERMSIG(status);
  r.out = read_file(out_path);
  r.err = read_file(err_path);
  return r;
}

/// Background server process that announces "listening on http://host:port".
class ServerProcess {
 public:
  explicit ServerProcess(const std::vector<std::string>& argv) {
    int fds[2];
    if (::pipe(fds) != 0) throw std::runtime_error("pipe failed");
    pid_ = ::fork();
    if (pid_ == 0) {
      ::dup2(fds[1], STDOUT_FILENO);
      ::close(fds[0]);
      ::close(fds[1]);
      std::vector<char*> args;
      for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
      args.push_back(nullptr);
      ::execv(args[0], args.data());
      std::_Exit(127);
    }
    ::close(fds[1]);
    std::string line;
    char c;
    while (::read(fds[0], &c, 1) == 1 && c != '\n') line.push_back(c);
    ::close(fds[0]);
    const auto colon = line.rfind(':');
    if (line.rfind("listening on", 0) != 0 || colon == std::string::npos) {
      kill(SIGKILL);
      throw std::runtime_error("server did not start: '" + line + "'");
    }
    port_ = std::stoi(line.substr(colon + 1));
  }

  ~ServerProcess() { kill(SIGTERM); }

  int port() const { return port_; }

  /// Sends `sig` and reaps the child; returns the wait status.
  int kill(int sig) {
    if (pid_ <= 0) return 0;
    ::kill(pid_, sig);
    int status = 0;
    ::waitpid(pid_, &status, 0);
    pid_ = -1;
    return status;
  }

 private:
  pid_t pid_ = -1;
  int port_ = 0;
};

}  // namespace testsupport
