// SPDX-License-Identifier: Apache-2.0

// restyle: command-line front end.
//
//   restyle rewrite --text T --style S [--mode M] [--n N] [--strategy S] [--backend B]
//   restyle eval --config run.json [--strategy S] [--from-trace DIR] [--output DIR]
//   restyle compare a.json b.json [--json]
//   restyle serve [--port P] [--backend B] --log-path FILE [--static-dir DIR]
//   restyle bleu --hyp FILE --ref FILE [--ref FILE ...]
//   restyle ppl --text FILE --lm FILE [--order N] [--smoothing add_k|stupid_backoff]
//
// Exit status: 0 success, 1 runtime error, 2 usage error. Errors print one
// line to stderr: "error: <Code>: <message>".

#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "restyle/restyle.hpp"

#ifndef RESTYLE_DEFAULT_TEMPLATE
#define RESTYLE_DEFAULT_TEMPLATE "templates/aug_zero_v1.json"
#endif

namespace {

using namespace restyle;

// "mock" and "mock:<mode>" are shorthands; anything else is a config path.
BackendSpec backend_spec(const std::string& arg, std::optional<std::uint64_t> seed) {
  BackendSpec spec;
  if (arg == "mock" || arg.rfind("mock:", 0) == 0) {
    spec.kind = "mock";
    const std::string mode = arg == "mock" ? "synthetic" : arg.substr(5);
    if (mode == "synthetic") spec.mock_mode = MockMode::Synthetic;
    else if (mode == "echo") spec.mock_mode = MockMode::Echo;
    else throw Error(ErrorCode::InvalidConfig, "unknown mock shorthand: " + arg);
    spec.invalid_probability = 0.01;
  } else {
    spec = BackendSpec::load(arg);
  }
  if (seed && spec.kind == "mock") spec.seed = *seed;
  return spec;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::vector<std::string> file_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

struct RewriteArgs {
  std::string text, style, mode = "augmented_zero_shot", strategy = "max_bleu_to_source";
  std::string backend = "mock", template_path = RESTYLE_DEFAULT_TEMPLATE, exemplars;
  int n = 16;
  std::optional<std::uint64_t> seed;
  bool json = false;
};

int cmd_rewrite(const RewriteArgs& a) {
  const PromptTemplate tpl = PromptTemplate::load(a.template_path);
  RewriteRequest req;
  req.source_text = a.text;
  req.instruction = a.style;
  req.mode = parse_mode(a.mode);
  req.sampling = default_sampling(tpl.family);
  req.sampling.n_candidates = a.n;
  req.sampling.seed = a.seed;
  if (!a.exemplars.empty())
    for (auto& e : load_exemplars(a.exemplars))
      if (e.instruction == a.style) req.few_shot_exemplars.push_back(std::move(e));
  const auto strategy = parse_strategy(a.strategy);

  auto backend = register_backend(backend_spec(a.backend, a.seed));
  const RenderedPrompt prompt = render(req, tpl);
  const CompletionBatch batch = backend->complete(prompt, req.sampling);
  const auto candidates = parse_candidates(batch.raw_texts);
  const SelectionOutcome sel = select(candidates, a.text, strategy);

  if (a.json) {
    nlohmann::ordered_json j;
    j["backend"] = batch.backend_id;
    j["candidates"] = nlohmann::ordered_json::array();
    for (const auto& c : candidates) {
      nlohmann::ordered_json e{{"raw", c.raw}, {"valid", c.is_valid()}};
      e["parsed"] = c.parsed ? nlohmann::ordered_json(*c.parsed) : nlohmann::ordered_json(nullptr);
      if (c.failure) e["failure"] = std::string(to_string(*c.failure));
      j["candidates"].push_back(std::move(e));
    }
    j["strategy"] = std::string(to_string(strategy));
    j["chosen_index"] = sel.chosen_index ? nlohmann::ordered_json(*sel.chosen_index) : nlohmann::ordered_json(nullptr);
    j["chosen_text"] = sel.chosen_index ? nlohmann::ordered_json(*candidates[*sel.chosen_index].parsed)
                                        : nlohmann::ordered_json(nullptr);
    std::cout << j.dump(2) << "\n";
    return 0;
  }
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const auto& c = candidates[i];
    const char mark = sel.chosen_index == i ? '*' : ' ';
    if (c.is_valid()) std::printf("%c%2zu  %s\n", mark, i, c.parsed->c_str());
    else std::printf("%c%2zu  [%s] %s\n", mark, i, std::string(to_string(*c.failure)).c_str(),
                     nlohmann::json(c.raw).dump().c_str());
  }
  std::printf("valid: %zu/%zu\n", sel.valid_count, candidates.size());
  if (sel.chosen_index)
    std::printf("chosen: %zu (%s, bleu_to_source=%.4f)\n%s\n", *sel.chosen_index,
                std::string(to_string(strategy)).c_str(), *sel.score_of_chosen,
                candidates[*sel.chosen_index].parsed->c_str());
  else
    std::printf("chosen: none\n");
  return 0;
}

struct EvalArgs {
  std::string config, strategy, from_trace, output;
  bool json = false;
};

int cmd_eval(const EvalArgs& a) {
  RunConfig cfg = RunConfig::load(a.config);
  if (!a.output.empty()) cfg.output_dir = a.output;
  RunArtifact art;
  if (!a.from_trace.empty()) {
    const RunArtifact base = RunArtifact::load(a.from_trace);
    const auto strategy = a.strategy.empty() ? cfg.strategy : parse_strategy(a.strategy);
    art = rescore(base, strategy, build_scorers(cfg), cfg.system_name, cfg.parallelism);
    if (!cfg.output_dir.empty()) art.write(cfg.output_dir);
  } else {
    if (!a.strategy.empty()) cfg.strategy = parse_strategy(a.strategy);
    art = run(cfg);
  }
  if (a.json) std::cout << art.report_json().dump(2) << "\n";
  else std::cout << render_report_text(art.report);
  return 0;
}

int cmd_compare(const std::vector<std::string>& paths, bool json) {
  std::vector<EvalReport> reports;
  for (const auto& p : paths) {
    nlohmann::json j = nlohmann::json::parse(read_file(p), nullptr, false);
    if (j.is_discarded()) throw Error(ErrorCode::InvalidConfig, p + " is not JSON");
    reports.push_back(eval_report_from_json(j));
  }
  const ComparisonTable table = compare(reports);
  if (json) std::cout << table.to_json().dump(2) << "\n";
  else std::cout << table.render_text();
  return 0;
}

int cmd_bleu(const std::string& hyp, const std::vector<std::string>& refs, int max_order) {
  const auto hyps = file_lines(hyp);
  std::vector<std::vector<std::string>> ref_sets;
  for (const auto& r : refs) {
    ref_sets.push_back(file_lines(r));
    if (ref_sets.back().size() != hyps.size())
      throw Error(ErrorCode::InvalidConfig, r + " has " + std::to_string(ref_sets.back().size()) +
                                                " lines, hypothesis has " + std::to_string(hyps.size()));
  }
  std::vector<BleuPair> pairs(hyps.size());
  for (std::size_t i = 0; i < hyps.size(); ++i) {
    pairs[i].candidate = hyps[i];
    for (const auto& rs : ref_sets) pairs[i].references.push_back(rs[i]);
  }
  BleuConfig cfg;
  cfg.max_order = max_order;
  cfg.validate();
  std::printf("%.2f\n", 100.0 * corpus_bleu(pairs, cfg));
  return 0;
}

int cmd_ppl(const std::string& text, const std::string& lm, int order, const std::string& smoothing,
            double k, double alpha) {
  NgramLanguageModel::Params p{order, parse_lm_smoothing(smoothing), k, alpha};
  const auto model = NgramLanguageModel::train(read_lines(lm), p);
  LmScore total;
  for (const auto& line : read_lines(text)) {
    const LmScore s = model.score(line);
    total.nll_sum += s.nll_sum;
    total.token_count += s.token_count;
  }
  if (total.token_count == 0) throw Error(ErrorCode::EmptyText, text + " has no scorable lines");
  std::printf("%.6f\n", total.perplexity());
  return 0;
}

httplib::Server* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

struct ServeArgs {
  std::string host = "127.0.0.1", backend = "mock", log_path, static_dir, cors = "*";
  std::string template_path = RESTYLE_DEFAULT_TEMPLATE, exemplars;
  int port = 8080;
  std::size_t max_text_length = 2000;
  std::optional<std::uint64_t> seed;
};

int cmd_serve(const ServeArgs& a) {
  ServiceConfig cfg;
  cfg.prompt_template = PromptTemplate::load(a.template_path);
  cfg.sampling = default_sampling(cfg.prompt_template.family);
  cfg.sampling.seed = a.seed;
  if (!a.exemplars.empty()) cfg.few_shot_pool = load_exemplars(a.exemplars);
  cfg.max_text_length = a.max_text_length;
  cfg.log_path = a.log_path;
  RewriteService service(register_backend(backend_spec(a.backend, a.seed)), cfg);

  httplib::Server server;
  mount_service(server, service, HttpMountOptions{a.cors, a.static_dir});
  const int port = a.port == 0 ? server.bind_to_any_port(a.host) : a.port;
  if (a.port != 0 && !server.bind_to_port(a.host, a.port))
    throw Error(ErrorCode::IoError, "cannot bind " + a.host + ":" + std::to_string(a.port));
  if (port < 0) throw Error(ErrorCode::IoError, "cannot bind " + a.host);
  g_server = &server;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::printf("listening on http://%s:%d\n", a.host.c_str(), port);
  std::fflush(stdout);
  server.listen_after_bind();
  g_server = nullptr;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Style transfer by augmented zero-shot prompting"};
  app.require_subcommand(1);

  RewriteArgs rw;
  auto* rewrite = app.add_subcommand("rewrite", "Rewrite one text and print all candidates");
  rewrite->add_option("--text", rw.text, "Source text")->required();
  rewrite->add_option("--style", rw.style, "Instruction, e.g. \"more positive\"")->required();
  rewrite->add_option("--mode", rw.mode, "zero_shot | few_shot | augmented_zero_shot");
  rewrite->add_option("--n", rw.n, "Candidates to sample")->check(CLI::Range(1, 256));
  rewrite->add_option("--strategy", rw.strategy, "first_valid | max_bleu_to_source");
  rewrite->add_option("--backend", rw.backend, "Backend config file, or mock / mock:echo");
  rewrite->add_option("--template", rw.template_path, "Prompt template JSON");
  rewrite->add_option("--exemplars", rw.exemplars, "Few-shot exemplar JSON");
  rewrite->add_option("--seed", rw.seed, "Sampling seed");
  rewrite->add_flag("--json", rw.json, "Print JSON");

  EvalArgs ev;
  auto* eval = app.add_subcommand("eval", "Run the evaluation harness");
  eval->add_option("--config", ev.config, "Run config JSON")->required();
  eval->add_option("--strategy", ev.strategy, "Override the selection strategy");
  eval->add_option("--from-trace", ev.from_trace, "Rescore a stored run directory");
  eval->add_option("--output", ev.output, "Output directory");
  eval->add_flag("--json", ev.json, "Print report JSON");

  std::vector<std::string> cmp_paths;
  bool cmp_json = false;
  auto* cmp = app.add_subcommand("compare", "Side-by-side table of report.json files");
  cmp->add_option("reports", cmp_paths, "report.json files")->required()->expected(2, -1);
  cmp->add_flag("--json", cmp_json, "Print JSON");

  ServeArgs sv;
  auto* serve = app.add_subcommand("serve", "Run the rewrite HTTP service");
  serve->add_option("--port", sv.port, "Port, 0 for any")->check(CLI::Range(0, 65535));
  serve->add_option("--host", sv.host, "Bind address");
  serve->add_option("--backend", sv.backend, "Backend config file, or mock / mock:echo");
  serve->add_option("--log-path", sv.log_path, "Request log (JSONL)")->required();
  serve->add_option("--static-dir", sv.static_dir, "Directory served at /");
  serve->add_option("--template", sv.template_path, "Prompt template JSON");
  serve->add_option("--exemplars", sv.exemplars, "Few-shot exemplar JSON");
  serve->add_option("--cors-origin", sv.cors, "Access-Control-Allow-Origin value");
  serve->add_option("--max-text-length", sv.max_text_length, "Longest accepted text");
  serve->add_option("--seed", sv.seed, "Sampling seed");

  std::string hyp;
  std::vector<std::string> refs;
  int bleu_order = 4;
  auto* bleu = app.add_subcommand("bleu", "Corpus BLEU of line-aligned files, x100");
  bleu->add_option("--hyp", hyp, "Hypotheses, one per line")->required();
  bleu->add_option("--ref", refs, "References, one per line (repeatable)")->required();
  bleu->add_option("--max-order", bleu_order, "Largest n-gram order");

  std::string ppl_text, ppl_lm, ppl_smoothing = "add_k";
  int ppl_order = 3;
  double ppl_k = 0.1, ppl_alpha = 0.4;
  auto* ppl = app.add_subcommand("ppl", "Perplexity of a text file under an n-gram LM");
  ppl->add_option("--text", ppl_text, "Text to score, one sentence per line")->required();
  ppl->add_option("--lm", ppl_lm, "Training corpus, one sentence per line")->required();
  ppl->add_option("--order", ppl_order, "n-gram order");
  ppl->add_option("--smoothing", ppl_smoothing, "add_k | stupid_backoff");
  ppl->add_option("--k", ppl_k, "add_k pseudo-count");
  ppl->add_option("--alpha", ppl_alpha, "stupid_backoff factor");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::fprintf(stderr, "error: Usage: %s\n", e.what());
    return 2;
  }

  try {
    if (*rewrite) return cmd_rewrite(rw);
    if (*eval) return cmd_eval(ev);
    if (*cmp) return cmd_compare(cmp_paths, cmp_json);
    if (*serve) return cmd_serve(sv);
    if (*bleu) return cmd_bleu(hyp, refs, bleu_order);
    if (*ppl) return cmd_ppl(ppl_text, ppl_lm, ppl_order, ppl_smoothing, ppl_k, ppl_alpha);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s: %s\n", std::string(to_string(e.code())).c_str(), e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: Internal: %s\n", e.what());
    return 1;
  }
  return 2;
}
