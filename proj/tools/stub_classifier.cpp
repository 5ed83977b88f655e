// SPDX-License-Identifier: Apache-2.0

// Deterministic sentiment classifier over HTTP, backed by the built-in
// lexicon. POST /classify {"text"} -> {"label","score"}.
//
//   stub_classifier [--port P] [--host H]

#include <csignal>
#include <cstdio>
#include <memory>
#include <string>

#include <CLI11.hpp>

#include "restyle/classifier.hpp"

namespace {
httplib::Server* g_server = nullptr;
void on_signal(int) {
  if (g_server) g_server->stop();
}
}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Lexicon sentiment classifier service"};
  int port = 0;
  std::string host = "127.0.0.1";
  app.add_option("--port", port, "Port, 0 for any")->check(CLI::Range(0, 65535));
  app.add_option("--host", host, "Bind address");
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::fprintf(stderr, "error: Usage: %s\n", e.what());
    return 2;
  }

  httplib::Server server;
  restyle::mount_classifier(server, std::make_shared<restyle::LexiconClassifier>());
  const int bound = port == 0 ? server.bind_to_any_port(host) : (server.bind_to_port(host, port) ? port : -1);
  if (bound < 0) {
    std::fprintf(stderr, "error: IoError: cannot bind %s:%d\n", host.c_str(), port);
    return 1;
  }
  g_server = &server;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::printf("listening on http://%s:%d\n", host.c_str(), bound);
  std::fflush(stdout);
  server.listen_after_bind();
  return 0;
}
