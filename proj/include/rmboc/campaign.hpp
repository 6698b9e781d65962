#pragma once

// Randomised property campaign behind `rmboc verify`: random topologies,
// workloads and fault patterns run with the per-cycle audit switched on.

#include <cstdint>
#include <cstdlib>
#include <random>
#include <string>
#include <vector>

#include "rmboc/analysis.hpp"
#include "rmboc/engine.hpp"
#include "rmboc/routing2d.hpp"
#include "rmboc/workloads.hpp"

namespace rmboc {

struct CampaignConfig {
  std::uint64_t seed = 1;
  int scenarios = 1000;
  int max_n = 8;       // 1D array sizes in [2, max_n]
  int max_mesh = 4;    // 2D mesh sizes in [2, max_mesh]
  int max_k = 4;
  std::size_t fifo_depth = 0;  // 0: random in [1, MaxTotalComm]
  int determinism_runs = 25;
  int path_mesh_max = 6;
};

struct PropertyResult {
  std::string name;
  bool passed = true;
  std::string detail;
};

struct CampaignReport {
  std::vector<PropertyResult> properties;
  int scenarios = 0;
  std::uint64_t cycles = 0;
  std::uint64_t fifo_drops = 0;
  std::uint64_t reconfig_losses = 0;
  std::uint64_t retransmissions = 0;
  std::uint64_t established = 0;

  bool passed() const {
    for (const auto& p : properties)
      if (!p.passed) return false;
    return true;
  }
};

// Violations of the 2D path rules over every ordered pair of an N x N mesh.
struct PathCheck {
  std::size_t pairs = 0;
  std::size_t violations = 0;
  std::string first_violation;
};

inline PathCheck check_paths(int N) {
  Topology t = Topology::build_2d(N, 1, 1);
  PathCheck out;
  auto fail = [&](const NodeAddress& s, const NodeAddress& d, const char* why) {
    if (out.violations++ == 0)
      out.first_violation = t.format(s) + " -> " + t.format(d) + ": " + why;
  };
  for (const auto& s : t.pes()) {
    for (const auto& d : t.pes()) {
      if (s == d) continue;
      ++out.pairs;
      PathPlan plan = plan_path(t, s, d);
      const int manhattan = std::abs(d.row - s.row) + std::abs(d.col - s.col);
      if (static_cast<int>(plan.hops.size()) != manhattan) fail(s, d, "not minimal");
      int turns = 0;
      NodeAddress pos = s;
      for (std::size_t i = 0; i < plan.hops.size(); ++i) {
        const PathHop& h = plan.hops[i];
        if (h.at != pos) fail(s, d, "hops not contiguous");
        if (h.move == Hop::Down && pos.col != d.col) fail(s, d, "Down outside destination column");
        if (i > 0 && orientation_of(port_of(h.move)) != orientation_of(port_of(plan.hops[i - 1].move)))
          ++turns;
        auto nb = t.neighbor(pos, port_of(h.move));
        if (!nb) {
          fail(s, d, "hop leaves the mesh");
          break;
        }
        pos = *nb;
      }
      if (pos != d) fail(s, d, "does not end at destination");
      if (turns > 1) fail(s, d, "more than one turn");

      // Local decisions, starting at the PE's chosen crosspoint, must agree.
      std::vector<PathHop> local;
      pos = s;
      Orientation o = first_orientation(s, d);
      int relays = 0;
      for (int guard = 0; guard < 4 * N; ++guard) {
        Hop h = next_hop_2d(pos, o, d);
        if (h == Hop::Pe) break;
        if (h == Hop::Relay) {
          o = o == Orientation::Row ? Orientation::Column : Orientation::Row;
          ++relays;
          continue;
        }
        local.push_back({pos, h});
        pos = *t.neighbor(pos, port_of(h));
      }
      if (local != plan.hops) fail(s, d, "next_hop_2d disagrees with plan_path");
      if (relays != (plan.turn ? 1 : 0)) fail(s, d, "relay count differs from plan turn");
    }
  }
  return out;
}

namespace detail {

// Platform-independent draws on top of mt19937_64.
class Draw {
 public:
  explicit Draw(std::uint64_t seed) : rng_(seed) {}
  std::uint64_t below(std::uint64_t n) { return rng_() % n; }
  int range(int lo, int hi) { return lo + static_cast<int>(below(static_cast<std::uint64_t>(hi - lo + 1))); }
  bool chance(int percent) { return below(100) < static_cast<std::uint64_t>(percent); }

 private:
  std::mt19937_64 rng_;
};

}  // namespace detail

struct RandomScenario {
  Topology topology;
  SimConfig config;
  std::vector<ScenarioEvent> events;
};

inline RandomScenario random_scenario(std::uint64_t seed, const CampaignConfig& cc) {
  detail::Draw draw(seed);
  const bool two_d = cc.max_mesh >= 2 && draw.chance(40);
  const int k = draw.range(1, cc.max_k);
  Topology t = two_d ? Topology::build_2d(draw.range(2, cc.max_mesh), k, 16)
                     : Topology::build_1d(draw.range(2, cc.max_n), k, 16);
  SimConfig cfg;
  const int max_depth = static_cast<int>(default_fifo_depth(t));
  cfg.fifo_depth = cc.fifo_depth != 0 ? cc.fifo_depth
                                      : static_cast<std::size_t>(draw.range(1, max_depth));
  const int limits[] = {0, 2, 8};
  cfg.retry_limit = limits[draw.below(3)];
  cfg.pe_latency = draw.range(1, 4);
  cfg.relay_latency = draw.range(1, 4);
  // Short timeouts provoke duplicate REQUESTs and trailing REPLYs.
  if (draw.chance(30)) cfg.timeout = worst_case_latency(load_size(t)) + draw.range(1, 200);
  if (two_d && draw.chance(30)) cfg.relay_capacity = static_cast<std::size_t>(draw.range(1, 3));
  cfg.audit = true;
  cfg.trace = false;
  cfg.record_residence = false;
  cfg.max_cycles = 20'000'000;

  const auto pes = t.pes();
  auto pick = [&] { return pes[draw.below(pes.size())]; };
  auto pick_pair = [&] {
    NodeAddress s = pick();
    NodeAddress d = pick();
    while (d == s) d = pick();
    return std::pair{s, d};
  };

  std::vector<ScenarioEvent> evs;
  const int count = draw.range(4, 48);
  const int horizon = draw.range(50, 3000);
  for (int i = 0; i < count; ++i) {
    const Cycle at = draw.range(0, horizon);
    const int roll = draw.range(0, 99);
    if (roll < 45) {
      auto [s, d] = pick_pair();
      evs.push_back({at, RequestAction{s, d}});
    } else if (roll < 65) {
      auto [s, d] = pick_pair();
      evs.push_back({at, DestroyAction{s, d}});
    } else if (roll < 77) {
      evs.push_back({at, ReconfigureAction{pick(), draw.range(1, 200)}});
    } else if (roll < 85) {
      evs.push_back({at, PolicyAction{pick(), draw.chance(60)}});
    } else {
      auto [s, d] = pick_pair();
      evs.push_back({at, SendAction{s, d, draw.below(1U << 16)}});
    }
  }
  std::stable_sort(evs.begin(), evs.end(),
                   [](const ScenarioEvent& a, const ScenarioEvent& b) { return a.at < b.at; });
  return {t, cfg, evs};
}

inline std::uint64_t scenario_seed(std::uint64_t campaign_seed, int index) {
  std::uint64_t x = campaign_seed * 0x9E3779B97F4A7C15ULL + static_cast<std::uint64_t>(index);
  x ^= x >> 31;
  x *= 0xBF58476D1CE4E5B9ULL;
  x ^= x >> 29;
  return x;
}

inline CampaignReport run_campaign(const CampaignConfig& cc) {
  CampaignReport rep;
  PropertyResult exclusivity{"segment exclusivity", true, ""};
  PropertyResult leaks{"leak freedom", true, ""};
  PropertyResult duplicates{"duplicate suppression", true, ""};
  PropertyResult determinism{"determinism", true, ""};
  PropertyResult paths{"2D path legality", true, ""};

  auto flag = [](PropertyResult& p, int index, const std::string& why) {
    if (p.passed) p.detail = "scenario " + std::to_string(index) + ": " + why;
    p.passed = false;
  };

  for (int i = 0; i < cc.scenarios; ++i) {
    RandomScenario sc = random_scenario(scenario_seed(cc.seed, i), cc);
    RunResult r = run(sc.topology, sc.events, sc.config);
    ++rep.scenarios;
    rep.cycles += static_cast<std::uint64_t>(r.stats.end_cycle);
    rep.fifo_drops += r.stats.fifo_drops;
    rep.reconfig_losses += r.stats.reconfig_losses;
    rep.retransmissions += r.stats.request_retransmissions + r.stats.destroy_retransmissions;
    for (const auto& c : r.stats.connections)
      if (c.outcome == ConnectionOutcome::Established) ++rep.established;
    const std::string first = r.audit.details.empty() ? "" : r.audit.details.front();
    if (r.audit.exclusivity_violations != 0) flag(exclusivity, i, first);
    if (r.audit.duplicate_entries != 0) flag(duplicates, i, first);
    if (!r.stats.quiescent) flag(leaks, i, "did not reach quiescence");
    else if (r.audit.leaked_entries != 0 || r.audit.leaked_segments != 0 ||
             r.audit.broken_circuits != 0)
      flag(leaks, i, first);

    if (i < cc.determinism_runs) {
      SimConfig traced = sc.config;
      traced.trace = true;
      RunResult a = run(sc.topology, sc.events, traced);
      RunResult b = run(sc.topology, sc.events, traced);
      if (a.trace != b.trace || a.stats.end_cycle != b.stats.end_cycle ||
          a.stats.commands_processed != b.stats.commands_processed)
        flag(determinism, i, "repeated run diverged");
    }
  }

  for (int N = 2; N <= cc.path_mesh_max; ++N) {
    PathCheck pc = check_paths(N);
    if (pc.violations != 0) {
      paths.passed = false;
      paths.detail = "N=" + std::to_string(N) + ": " + pc.first_violation;
      break;
    }
  }

  rep.properties = {exclusivity, leaks, duplicates, determinism, paths};
  return rep;
}

}  // namespace rmboc
