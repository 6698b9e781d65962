// rmboc: run scenarios, print the FIFO sizing table, run the property campaign.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "rmboc/rmboc.hpp"

namespace fs = std::filesystem;
using namespace rmboc;

namespace {

struct RunOptions {
  std::string topo = "1d";
  int n = 4;
  int k = 4;
  int w = 16;
  std::string scenario;
  std::string out_dir;
  std::string trace_path;
  std::string stats_path;
  std::string emit_scenario;
  SimConfig sim;
  bool no_trace = false;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << text;
}

Topology build_topology(const RunOptions& o) {
  try {
    if (o.topo == "1d") return Topology::build_1d(o.n, o.k, o.w);
    if (o.topo == "2d") return Topology::build_2d(o.n, o.k, o.w);
  } catch (const InvalidParameter& e) {
    throw ConfigError(e.what());
  }
  throw ConfigError("unknown topology '" + o.topo + "'");
}

int cmd_run(RunOptions o) {
  Topology t = build_topology(o);
  std::vector<ScenarioEvent> events;
  if (!o.scenario.empty()) events = parse_scenario(read_file(o.scenario), t);
  o.sim.trace = !o.no_trace;

  Simulator sim(t, o.sim);
  sim.schedule(events);
  RunResult r = sim.run();

  const fs::path dir = o.out_dir.empty() ? fs::path(".") : fs::path(o.out_dir);
  const fs::path trace_path = o.trace_path.empty() ? dir / "trace.log" : fs::path(o.trace_path);
  const fs::path stats_path = o.stats_path.empty() ? dir / "stats.csv" : fs::path(o.stats_path);
  if (!o.no_trace) write_file(trace_path, r.trace);
  std::ostringstream csv;
  write_stats_csv(csv, r, t);
  write_file(stats_path, csv.str());
  if (!o.emit_scenario.empty()) write_file(o.emit_scenario, format_scenario(events, t));

  std::size_t established = 0;
  for (const auto& c : r.stats.connections)
    established += c.outcome == ConnectionOutcome::Established;
  std::cout << "end_cycle=" << r.stats.end_cycle << " quiescent=" << (r.stats.quiescent ? 1 : 0)
            << " connections=" << r.stats.connections.size() << " established=" << established
            << " fifo_drops=" << r.stats.fifo_drops << '\n';
  if (!o.no_trace) std::cout << "trace: " << trace_path.string() << '\n';
  std::cout << "stats: " << stats_path.string() << '\n';

  if (o.sim.audit) {
    if (!r.audit.clean()) {
      std::cerr << "audit: FAIL\n";
      for (const auto& d : r.audit.details) std::cerr << "  " << d << '\n';
      return 2;
    }
    std::cout << "audit: ok (" << r.audit.cycles_audited << " cycles)\n";
  }
  return 0;
}

std::pair<int, int> parse_range(const std::string& s) {
  auto number = [&](const std::string& part) {
    int v = 0;
    auto [p, ec] = std::from_chars(part.data(), part.data() + part.size(), v);
    if (ec != std::errc{} || p != part.data() + part.size())
      throw InvalidParameter("bad value '" + s + "' for --n");
    return v;
  };
  auto dots = s.find("..");
  if (dots == std::string::npos) {
    int v = number(s);
    return {v, v};
  }
  int lo = number(s.substr(0, dots));
  int hi = number(s.substr(dots + 2));
  if (hi < lo) throw InvalidParameter("empty range '" + s + "'");
  return {lo, hi};
}

int cmd_analyze(const std::string& range) {
  auto [lo, hi] = parse_range(range);
  require_n(lo);
  if (hi > kOracleLimit)
    throw InvalidParameter("oracle covers n <= " + std::to_string(kOracleLimit));
  bool all_ok = true;
  std::cout << "# n, max_total_comm, oracle, worst_case_latency, status\n";
  for (int n = lo; n <= hi; ++n) {
    const auto m = max_total_comm(n);
    const auto o = oracle_max_total_comm(n);
    const bool ok = m == o;
    all_ok = all_ok && ok;
    std::cout << n << ", " << m << ", " << o << ", " << worst_case_latency(n) << ", "
              << (ok ? "ok" : "MISMATCH") << '\n';
  }
  return all_ok ? 0 : 1;
}

int cmd_verify(const CampaignConfig& cc) {
  CampaignReport r = run_campaign(cc);
  for (const auto& p : r.properties) {
    std::cout << (p.passed ? "PASS " : "FAIL ") << p.name;
    if (!p.passed) std::cout << " (" << p.detail << ')';
    std::cout << '\n';
  }
  std::cout << "scenarios=" << r.scenarios << " cycles=" << r.cycles
            << " established=" << r.established << " fifo_drops=" << r.fifo_drops
            << " reconfig_losses=" << r.reconfig_losses
            << " retransmissions=" << r.retransmissions << '\n';
  return r.passed() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cycle-level simulator for reconfigurable multiple-bus networks on chip"};
  app.require_subcommand(1);

  RunOptions ro;
  if (const char* env = std::getenv("RMBOC_OUT_DIR")) ro.out_dir = env;
  auto* run = app.add_subcommand("run", "Simulate a scenario file");
  run->add_option("--topo", ro.topo, "1d or 2d")->check(CLI::IsMember({"1d", "2d"}));
  run->add_option("--n,--N", ro.n, "PEs per row (1d) or mesh side (2d)");
  run->add_option("--k", ro.k, "parallel bus segments per link");
  run->add_option("--w", ro.w, "data width in bits");
  run->add_option("--scenario", ro.scenario, "scenario file")->check(CLI::ExistingFile);
  run->add_option("--out-dir", ro.out_dir, "output directory (default $RMBOC_OUT_DIR or .)");
  run->add_option("--trace", ro.trace_path, "trace file (default <out-dir>/trace.log)");
  run->add_option("--stats", ro.stats_path, "CSV statistics (default <out-dir>/stats.csv)");
  run->add_option("--emit-scenario", ro.emit_scenario, "write the parsed events back as a scenario");
  run->add_flag("--no-trace", ro.no_trace, "skip trace recording");
  run->add_option("--fifo-depth", ro.sim.fifo_depth, "side FIFO depth (0: MaxTotalComm)");
  run->add_option("--pe-latency", ro.sim.pe_latency, "PE decision latency in cycles");
  run->add_option("--relay-latency", ro.sim.relay_latency, "PE relay latency in cycles (2d)");
  run->add_option("--timeout", ro.sim.timeout, "retransmission timeout (0: derived)");
  run->add_option("--retry-limit", ro.sim.retry_limit, "REQUEST retransmissions (0: unlimited)");
  run->add_option("--relay-capacity", ro.sim.relay_capacity, "relay entries per PE (0: 4k)");
  run->add_option("--max-cycles", ro.sim.max_cycles, "stop after this cycle");
  run->add_option("--seed", ro.sim.seed, "seed (recorded; the engine draws no randomness)");
  run->add_flag("--audit", ro.sim.audit, "check invariants every cycle; exit 2 on violation");

  std::string range = "4";
  auto* analyze = app.add_subcommand("analyze", "FIFO sizing and latency bound table");
  analyze->add_option("--n", range, "n or lo..hi")->required();

  CampaignConfig cc;
  auto* verify = app.add_subcommand("verify", "Randomised protocol property campaign");
  verify->add_option("--seed", cc.seed, "campaign seed");
  verify->add_option("--scenarios", cc.scenarios, "number of random scenarios");
  verify->add_option("--fifo-depth", cc.fifo_depth, "fixed FIFO depth (0: random per scenario)");
  verify->add_option("--max-n", cc.max_n, "largest 1d array")->check(CLI::Range(2, 64));
  verify->add_option("--max-mesh", cc.max_mesh, "largest 2d mesh side")->check(CLI::Range(0, 16));
  verify->add_option("--max-k", cc.max_k, "largest segment count")->check(CLI::Range(1, 64));
  verify->add_option("--path-mesh", cc.path_mesh_max, "largest mesh for the path check");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(ro);
    if (*analyze) return cmd_analyze(range);
    if (*verify) return cmd_verify(cc);
  } catch (const ConfigError& e) {
    std::cerr << "ConfigError: " << e.what() << '\n';
  } catch (const AddressError& e) {
    std::cerr << "AddressError: " << e.what() << '\n';
  } catch (const ParseError& e) {
    std::cerr << "ParseError: " << e.what() << '\n';
  } catch (const InvalidParameter& e) {
    std::cerr << "InvalidParameter: " << e.what() << '\n';
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
  }
  return 1;
}
