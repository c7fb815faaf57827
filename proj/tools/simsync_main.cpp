// Command-line entry point: virtual-time bench runs, the violation study,
// and a live TCP server/client pair.

#include <chrono>
#include <cstdint>
#include <iomanip>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "simsync/scenario_json.hpp"
#include "simsync/simsync.hpp"
#include "simsync/tcp.hpp"

namespace {

// FNV-1a over the raw state bytes; lets server and client logs be compared.
std::uint64_t chain_digest(const std::vector<simsync::StateVector>& chain) {
  std::uint64_t h = 1469598103934665603ULL;
  for (const auto& state : chain) {
    for (double v : state.values) {
      const auto bits = std::bit_cast<std::uint64_t>(v);
      for (int i = 0; i < 8; ++i) {
        h ^= (bits >> (8 * i)) & 0xFF;
        h *= 1099511628211ULL;
      }
    }
  }
  return h;
}

int run_bench(const std::string& config_path, const std::string& out_path, bool summary) {
  using namespace simsync;
  const Scenario sc = config_path.empty() ? default_scenario() : load_scenario(config_path);
  const std::vector<BenchRow> rows = run_scenario(sc);
  if (!out_path.empty()) {
    emit_csv(rows, out_path);
    std::cout << "wrote " << rows.size() << " rows to " << out_path << "\n";
  } else {
    write_csv(rows, std::cout);
  }
  if (summary) emit_summary(rows, std::cout);
  return 0;
}

int run_violations(int reps, std::uint64_t seed, const std::string& out_path) {
  using namespace simsync;
  const Scenario sc = violations_scenario(reps, seed);
  const std::vector<BenchRow> rows = run_scenario(sc);
  if (!out_path.empty()) emit_csv(rows, out_path);
  std::cout << "q_max       violation_state_ratio  violation_point_fraction\n";
  for (const ViolationStats& st : violation_statistics(rows, sc.problem.n_t)) {
    std::cout << std::setw(10) << st.q_max << "  " << std::setw(20) << st.state_ratio_median
              << "  " << std::setw(22) << st.point_fraction_median << "\n";
  }
  return 0;
}

int run_serve(const std::string& addr, const std::string& config_path) {
  using namespace simsync;
  const Scenario sc = config_path.empty() ? default_scenario() : load_scenario(config_path);
  SessionConfig cfg = session_from_scenario(sc);

  std::cout << "listening on " << addr << " (strategy " << strategy_name(cfg.strategy.kind)
            << ", " << cfg.problem.n_t << " steps)\n";
  TcpListener listener(addr);
  TcpConnection conn = listener.accept_one();

  ServerSession server(cfg, sc.cost);
  conn.send_message(server.init_message());
  while (!server.done()) {
    ServerStepOutput out = server.step();
    conn.send_message(out.message);
  }
  std::cout << "sent " << (cfg.problem.n_t + 1) << " messages, tracked digest "
            << std::hex << chain_digest(server.tracked_chain()) << std::dec << "\n";
  return 0;
}

int run_client(const std::string& addr, const std::string& mode_name) {
  using namespace simsync;
  const ClientMode mode = mode_name == "pessimistic" ? ClientMode::Pessimistic
                                                     : ClientMode::Optimistic;
  TcpConnection conn = tcp_connect(addr);
  ClientSession client(mode);
  std::vector<StateVector> published;
  std::vector<double> latencies;

  const auto start = std::chrono::steady_clock::now();
  auto elapsed = [&start] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  };

  auto first = conn.recv_message();
  if (!first) throw ProtocolError("server closed before init");
  const auto* init = std::get_if<InitMessage>(&*first);
  if (!init) throw ProtocolError("expected init message first");
  published.push_back(client.on_init(*init));
  latencies.push_back(elapsed());

  while (client.expected_step() <= client.total_steps()) {
    if (mode == ClientMode::Optimistic) client.precompute_next();
    auto msg = conn.recv_message();
    if (!msg) throw ProtocolError("server closed mid-run");
    ClientStepResult r = client.on_message(*msg);
    published.push_back(std::move(r.published));
    latencies.push_back(elapsed());
  }

  double mean = 0.0;
  for (std::size_t i = 1; i < latencies.size(); ++i) {
    mean += latencies[i] - latencies[i - 1];
  }
  if (latencies.size() > 1) mean /= static_cast<double>(latencies.size() - 1);
  std::cout << "published " << published.size() << " states in " << latencies.back()
            << " s (mean inter-publish " << mean << " s)\n"
            << "published digest " << std::hex << chain_digest(published) << std::dec << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"surrogate-model state synchronization benchmark and demo driver"};
  app.require_subcommand(1);

  auto* bench = app.add_subcommand("bench", "virtual-time experiments");
  bench->require_subcommand(1);

  std::string config_path, out_path;
  bool summary = false;
  auto* bench_run = bench->add_subcommand("run", "run a scenario config");
  bench_run->add_option("config", config_path, "scenario JSON (defaults to the built-in scenario)");
  bench_run->add_option("--out", out_path, "CSV output path (stdout if omitted)");
  bench_run->add_flag("--summary", summary, "print per-sweep-value medians and speedups");

  int reps = 10;
  std::uint64_t seed = 1;
  std::string violations_out;
  auto* bench_violations = bench->add_subcommand("violations", "violation-statistics study");
  bench_violations->add_option("--reps", reps, "repetitions per q_max");
  bench_violations->add_option("--seed", seed, "base RNG seed");
  bench_violations->add_option("--out", violations_out, "also write the raw rows as CSV");

  std::string serve_addr = "127.0.0.1:7077", serve_config;
  auto* serve = app.add_subcommand("serve", "run the server over TCP");
  serve->add_option("--tcp", serve_addr, "listen address host:port");
  serve->add_option("--config", serve_config, "scenario JSON for the session parameters");

  std::string client_addr = "127.0.0.1:7077", client_mode = "optimistic";
  auto* client = app.add_subcommand("client", "run the mobile client over TCP");
  client->add_option("--tcp", client_addr, "server address host:port");
  client->add_option("--mode", client_mode, "optimistic or pessimistic");

  CLI11_PARSE(app, argc, argv);

  try {
    if (bench_run->parsed()) return run_bench(config_path, out_path, summary);
    if (bench_violations->parsed()) return run_violations(reps, seed, violations_out);
    if (serve->parsed()) return run_serve(serve_addr, serve_config);
    if (client->parsed()) return run_client(client_addr, client_mode);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
