#pragma once

// SPDX-License-Identifier: Apache-2.0

// Minimal POST transport used by the HTTP backends and the classifier
// client. Tests substitute a capturing implementation.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <thread>
#include <utility>

#include <httplib.h>

#include "restyle/error.hpp"

namespace restyle {

struct HttpResponse {
  int status = 0;  // 0: connection-level failure
  std::string body;
};

using HttpHeaders = std::map<std::string, std::string>;

class HttpTransport {
 public:
  virtual ~HttpTransport() = default;
  virtual HttpResponse post(const std::string& url, const std::string& body,
                            const HttpHeaders& headers, std::chrono::milliseconds timeout) = 0;
};

struct ParsedUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

inline ParsedUrl parse_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos)
    throw Error(ErrorCode::InvalidConfig, "URL without scheme: " + url);
  const std::string scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https")
    throw Error(ErrorCode::InvalidConfig, "unsupported URL scheme: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  ParsedUrl out;
  out.origin = url.substr(0, path_start);
  out.path = path_start == std::string::npos ? "/" : url.substr(path_start);
  if (out.origin.size() <= scheme_end + 3)
    throw Error(ErrorCode::InvalidConfig, "URL without host: " + url);
  return out;
}

class HttplibTransport : public HttpTransport {
 public:
  HttpResponse post(const std::string& url, const std::string& body, const HttpHeaders& headers,
                    std::chrono::milliseconds timeout) override {
    const ParsedUrl u = parse_url(url);
    httplib::Client client(u.origin);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());
    httplib::Headers h;
    for (const auto& [k, v] : headers)
      if (k != "Content-Type") h.emplace(k, v);
    auto res = client.Post(u.path, h, body, "application/json");
    if (!res) return {0, httplib::to_string(res.error())};
    return {res->status, res->body};
  }
};

struct RetryPolicy {
  int max_attempts = 4;
  std::chrono::milliseconds base_delay{200};
  std::chrono::milliseconds max_delay{5000};
};

inline bool is_transient_status(int status) {
  return status == 0 || status == 408 || status == 429 || status >= 500;
}

/// POST with bounded exponential backoff on transient failures. Returns the
/// last response; callers decide what a non-2xx final status means.
inline HttpResponse post_with_retry(HttpTransport& transport, const std::string& url,
                                    const std::string& body, const HttpHeaders& headers,
                                    std::chrono::milliseconds timeout, const RetryPolicy& retry) {
  HttpResponse res;
  auto delay = retry.base_delay;
  for (int attempt = 1; attempt <= std::max(1, retry.max_attempts); ++attempt) {
    res = transport.post(url, body, headers, timeout);
    if (!is_transient_status(res.status)) return res;
    if (attempt < retry.max_attempts) {
      std::this_thread::sleep_for(delay);
      delay = std::min(retry.max_delay, delay * 2);
    }
  }
  return res;
}

}  // namespace restyle
