#pragma once

// Closed-form command-load and latency bounds for the 1D network, a
// brute-force oracle for the load bound, and a checker that holds measured
// per-crosspoint residence times against the latency bound.

#include <algorithm>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "rmboc/crosspoint.hpp"
#include "rmboc/error.hpp"
#include "rmboc/routing2d.hpp"
#include "rmboc/topology.hpp"

namespace rmboc {

// Largest number of simultaneous commands arriving at crosspoint j from each
// input direction.
struct CommandLoadProfile {
  int n = 0;
  int j = 0;
  std::int64_t left = 0;
  std::int64_t right = 0;
  std::int64_t pe = 0;

  std::int64_t total() const { return left + right + pe; }
};

inline void require_n(int n) {
  if (n < 2) throw InvalidParameter("n must be >= 2, got " + std::to_string(n));
}

inline CommandLoadProfile direction_maxima(int n, int j) {
  require_n(n);
  if (j < 1 || j > n)
    throw InvalidParameter("crosspoint position " + std::to_string(j) + " outside [1, n]");
  const std::int64_t nn = n;
  const std::int64_t jj = j;
  return {n, j, (jj - 1) * (nn - jj + 1), (nn - jj) * jj, nn - 1};
}

inline std::int64_t max_total_comm(int n) {
  require_n(n);
  const std::int64_t x = static_cast<std::int64_t>(n) * n + 2 * n - 4;
  return (x + 1) / 2;
}

inline Cycle worst_case_latency(int n) { return (max_total_comm(n) - 1) * 4 + 4; }

struct OracleResult {
  std::int64_t value = 0;
  std::vector<int> argmax;  // every j attaining the maximum
};

inline constexpr int kOracleLimit = 64;

// Enumerates every ordered (source, destination) pair and tallies the input
// direction it would arrive from at each crosspoint.
inline OracleResult oracle_max_total_comm_detail(int n) {
  require_n(n);
  if (n > kOracleLimit)
    throw InvalidParameter("oracle limited to n <= " + std::to_string(kOracleLimit));
  OracleResult best;
  best.value = -1;
  for (int j = 1; j <= n; ++j) {
    std::int64_t count = 0;
    for (int s = 1; s <= n; ++s) {
      for (int d = 1; d <= n; ++d) {
        if (s == d) continue;
        const bool from_pe = s == j;
        const bool from_left = s < j && d >= j;
        const bool from_right = s > j && d <= j;
        if (from_pe || from_left || from_right) ++count;
      }
    }
    if (count > best.value) {
      best.value = count;
      best.argmax = {j};
    } else if (count == best.value) {
      best.argmax.push_back(j);
    }
  }
  return best;
}

inline std::int64_t oracle_max_total_comm(int n) { return oracle_max_total_comm_detail(n).value; }

// One command's stay in one crosspoint: arrival in a side FIFO to the cycle
// its handler output was written.
struct ResidenceRecord {
  std::uint64_t uid = 0;
  int crosspoint = 0;
  CommandKind kind = CommandKind::Request;
  Cycle arrived = 0;
  Cycle completed = 0;

  Cycle residence() const { return completed - arrived; }
};

struct BoundReport {
  int n = 0;
  Cycle bound = 0;
  bool precondition_ok = true;
  std::string precondition_note;
  std::size_t records = 0;
  Cycle max_residence = 0;
  std::size_t bound_violations = 0;
  // Commands that waited (residence > 8) at more than one crosspoint.
  std::size_t repeated_waits = 0;
  std::size_t commands = 0;

  bool ok() const { return precondition_ok && bound_violations == 0 && repeated_waits == 0; }
};

inline BoundReport check_bound(const std::vector<ResidenceRecord>& records, int n,
                               std::size_t fifo_depth, std::uint64_t drops) {
  BoundReport rep;
  rep.n = n;
  rep.bound = worst_case_latency(n);
  rep.records = records.size();
  if (fifo_depth < static_cast<std::size_t>(max_total_comm(n))) {
    rep.precondition_ok = false;
    rep.precondition_note = "FIFO depth below MaxTotalComm";
  }
  if (drops != 0) {
    rep.precondition_ok = false;
    if (!rep.precondition_note.empty()) rep.precondition_note += "; ";
    rep.precondition_note += std::to_string(drops) + " commands dropped";
  }
  std::map<std::uint64_t, int> waits;
  for (const auto& r : records) {
    rep.max_residence = std::max(rep.max_residence, r.residence());
    if (r.residence() > rep.bound) ++rep.bound_violations;
    int& w = waits[r.uid];
    if (r.residence() > kIdleTurnaround) ++w;
  }
  rep.commands = waits.size();
  for (const auto& [uid, w] : waits)
    if (w > 1) ++rep.repeated_waits;
  if (!rep.precondition_ok) {
    // Bound is not asserted when its precondition fails.
    rep.bound_violations = 0;
    rep.repeated_waits = 0;
  }
  return rep;
}

// Segments an all-pairs workload (every ordered pair connected at once)
// needs on each link of the topology.
struct SegmentDemand {
  std::vector<int> per_link;
  int max_link = 0;
  std::int64_t total = 0;
};

inline SegmentDemand all_pairs_segment_demand(const Topology& t) {
  SegmentDemand d;
  d.per_link.assign(static_cast<std::size_t>(t.link_count()), 0);
  const auto pes = t.pes();
  for (const auto& s : pes) {
    for (const auto& e : pes) {
      if (s == e) continue;
      if (!t.is_2d()) {
        for (int c = std::min(s.col, e.col); c < std::max(s.col, e.col); ++c)
          ++d.per_link[static_cast<std::size_t>(c - 1)];
        continue;
      }
      for (const auto& hop : plan_path(t, s, e).hops) {
        Port p = port_of(hop.move);
        int cp = t.crosspoint_index({hop.at, orientation_of(p)});
        ++d.per_link[static_cast<std::size_t>(*t.link_at(cp, p))];
      }
    }
  }
  for (int v : d.per_link) {
    d.max_link = std::max(d.max_link, v);
    d.total += v;
  }
  return d;
}

}  // namespace rmboc
