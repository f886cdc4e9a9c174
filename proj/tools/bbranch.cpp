// bbranch: serve | replay | eval-corpus | bench | catalog

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <boost/asio/io_context.hpp>
#include <boost/asio/signal_set.hpp>

#include "CLI11.hpp"

#include "bbranch/bench.hpp"
#include "bbranch/evaluation.hpp"
#include "bbranch/eventlog.hpp"
#include "bbranch/gateway.hpp"

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_output(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

struct TranslatorOptions {
  std::string strategy = "rule";
  bbranch::EndpointConfig endpoint;
};

void add_translator_options(CLI::App* cmd, TranslatorOptions& o) {
  cmd->add_option("--translator", o.strategy, "rule | llm | hybrid")->check(CLI::IsMember({"rule", "llm", "hybrid"}));
  cmd->add_option("--endpoint-url", o.endpoint.url, "completion endpoint base URL");
  cmd->add_option("--endpoint-path", o.endpoint.path, "completion endpoint path");
  cmd->add_option("--model", o.endpoint.model, "model name sent to the endpoint");
  cmd->add_option("--api-key-env", o.endpoint.api_key_env, "environment variable holding the API key");
  cmd->add_option("--llm-timeout", o.endpoint.timeout_seconds, "endpoint timeout in seconds");
}

std::shared_ptr<const bbranch::Translator> make_translator(const TranslatorOptions& o) {
  const auto strategy = *bbranch::strategy_from_string(o.strategy);
  std::shared_ptr<bbranch::CompletionClient> client;
  if (strategy != bbranch::Strategy::RuleBased) client = std::make_shared<bbranch::HttpCompletionClient>(o.endpoint);
  return std::make_shared<const bbranch::Translator>(strategy, client);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Behavior-branch runtime: live command grafting for arena agents"};
  app.require_subcommand(1);

  // serve
  auto* serve = app.add_subcommand("serve", "run the gateway and the simulation loop");
  bbranch::GatewayConfig gw;
  std::string config_path;
  std::string log_path;
  std::uint16_t ws_port = 0;
  std::string policy = "scripted";
  TranslatorOptions serve_tr;
  serve->add_option("--config", config_path, "JSON config file (overridden by flags given explicitly)");
  auto* port_opt = serve->add_option("--port", gw.tcp_port, "TCP port (newline-delimited JSON)");
  auto* ws_opt = serve->add_option("--ws-port", ws_port, "WebSocket port");
  auto* rate_opt = serve->add_option("--tick-rate", gw.tick_rate, "ticks per second");
  auto* seed_opt = serve->add_option("--seed", gw.seed, "world seed");
  auto* host_opt = serve->add_option("--host", gw.host, "listen address");
  auto* policy_opt =
      serve->add_option("--opponent-policy", policy, "idle | scripted")->check(CLI::IsMember({"idle", "scripted"}));
  serve->add_option("--log", log_path, "write the event log here on shutdown");
  add_translator_options(serve, serve_tr);

  // replay
  auto* replay = app.add_subcommand("replay", "re-run an event log headlessly");
  std::string log_in;
  std::string trace_out;
  replay->add_option("log", log_in, "event log (JSONL)")->required();
  replay->add_option("--out", trace_out, "state trace output (default stdout)");

  // eval-corpus
  auto* eval = app.add_subcommand("eval-corpus", "judge a command corpus in scripted scenarios");
  std::string corpus_path;
  std::string report_out;
  bool timings = false;
  double min_ratio = -1;
  TranslatorOptions eval_tr;
  eval->add_option("corpus", corpus_path, "corpus file (JSONL)")->required();
  eval->add_option("--out", report_out, "report output (default stdout)");
  eval->add_flag("--timings", timings, "include translation latencies (makes the report non-deterministic)");
  eval->add_option("--min-ratio", min_ratio, "exit with status 1 when the good ratio is below this percentage");
  add_translator_options(eval, eval_tr);

  // bench
  auto* bench = app.add_subcommand("bench", "measure the non-LLM command pipeline and the tick");
  bbranch::BenchOptions bo;
  bool bench_json = false;
  bench->add_option("--ticks", bo.ticks, "ticks to run");
  bench->add_option("--command-every", bo.command_every, "send a command every N ticks");
  bench->add_option("--seed", bo.seed, "world seed");
  bench->add_flag("--json", bench_json, "machine-readable report");

  // catalog
  auto* cat = app.add_subcommand("catalog", "export the action and condition catalog");
  std::string catalog_out;
  cat->add_option("--out", catalog_out, "output path (default stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*serve) {
      if (!config_path.empty()) {
        bbranch::GatewayConfig file = bbranch::gateway_config_from_json(read_file(config_path));
        if (port_opt->count() == 0) gw.tcp_port = file.tcp_port;
        if (rate_opt->count() == 0) gw.tick_rate = file.tick_rate;
        if (seed_opt->count() == 0) gw.seed = file.seed;
        if (host_opt->count() == 0) gw.host = file.host;
        if (policy_opt->count() == 0) policy = std::string(bbranch::to_string(file.opponent_policy));
        if (ws_opt->count() == 0 && file.ws_port) ws_port = *file.ws_port;
        gw.sim = file.sim;
        gw.state_queue = file.state_queue;
        gw.translation_threads = file.translation_threads;
      }
      if (ws_opt->count() > 0 || ws_port != 0) gw.ws_port = ws_port;
      gw.opponent_policy = *bbranch::policy_from_string(policy);
      if (!log_path.empty()) gw.log_path = log_path;
      gw.validate();
      auto translator = make_translator(serve_tr);

      bbranch::Gateway gateway(gw, translator);
      gateway.start();
      std::cerr << "bbranch: listening on " << gw.host << ":" << gateway.tcp_port() << " (tcp)";
      if (gateway.ws_port()) std::cerr << ", " << gw.host << ":" << *gateway.ws_port() << " (websocket)";
      std::cerr << ", " << gw.tick_rate << " Hz, translator " << serve_tr.strategy << std::endl;

      boost::asio::io_context signals_io;
      boost::asio::signal_set signals(signals_io, SIGINT, SIGTERM);
      signals.async_wait([&](const boost::system::error_code&, int) { gateway.stop(); });
      signals_io.run();
      gateway.wait();
      return 0;
    }
    if (*replay) {
      const bbranch::Trace trace = bbranch::replay(bbranch::parse_log(read_file(log_in)));
      write_output(trace_out, trace.text());
      char digest[64];
      std::snprintf(digest, sizeof digest, "%016llx", static_cast<unsigned long long>(trace.digest()));
      std::cerr << "states " << trace.states.size() << ", digest fnv1a64:" << digest << "\n";
      return 0;
    }
    if (*eval) {
      auto translator = make_translator(eval_tr);
      const bbranch::Corpus corpus = bbranch::parse_corpus(read_file(corpus_path));
      const bbranch::EvalReport report = bbranch::eval_corpus(corpus, *translator);
      write_output(report_out, report.to_json(timings) + "\n");
      std::cerr << "good " << report.good() << "/" << report.entries.size() << " (" << report.good_ratio()
                << "%), matching expectation " << report.agreeing() << "/" << report.entries.size() << "\n";
      return min_ratio >= 0 && report.good_ratio() < min_ratio ? 1 : 0;
    }
    if (*bench) {
      const bbranch::BenchReport report = bbranch::bench(bo);
      std::cout << (bench_json ? report.to_json() + "\n" : report.to_text());
      return 0;
    }
    if (*cat) {
      write_output(catalog_out, bbranch::catalog().to_json() + "\n");
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "bbranch: error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
