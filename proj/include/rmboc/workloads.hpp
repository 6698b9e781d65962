#pragma once

// Canned scenarios used by the acceptance suite, the CLI and the tests.

#include <cstdint>
#include <vector>

#include "rmboc/event.hpp"
#include "rmboc/topology.hpp"

namespace rmboc {

// Every PE requests a circuit to every other PE in the same cycle.
inline std::vector<ScenarioEvent> all_pairs_burst(const Topology& t, Cycle at = 0) {
  std::vector<ScenarioEvent> evs;
  for (const auto& s : t.pes())
    for (const auto& d : t.pes())
      if (s != d) evs.push_back({at, RequestAction{s, d}});
  return evs;
}

// Two PEs open circuits to each other, then stream `pairs` coordinate/colour
// word pairs: a coordinate word one way, the colour the other way.
struct StreamingPlan {
  std::vector<ScenarioEvent> events;
  std::vector<std::uint64_t> forward;   // a -> b
  std::vector<std::uint64_t> backward;  // b -> a
};

inline StreamingPlan streaming_soak(const Topology& t, const NodeAddress& a, const NodeAddress& b,
                                    std::size_t pairs, Cycle start) {
  StreamingPlan plan;
  plan.events.push_back({0, RequestAction{a, b}});
  plan.events.push_back({0, RequestAction{b, a}});
  const std::uint64_t mask =
      t.data_width() >= 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << t.data_width()) - 1;
  for (std::size_t i = 0; i < pairs; ++i) {
    // 12-bit X and Y packed into one coordinate word, a 24-bit colour back.
    const std::uint64_t x = i % 640;
    const std::uint64_t y = (i / 640) % 480;
    const std::uint64_t coord = ((y << 12) | x) & mask;
    const std::uint64_t colour = ((x * 0x10101U) ^ (y << 8) ^ (i * 2654435761U)) & 0xFFFFFFU & mask;
    const Cycle at = start + static_cast<Cycle>(2 * i);
    plan.events.push_back({at, SendAction{a, b, coord}});
    plan.events.push_back({at + 1, SendAction{b, a, colour}});
    plan.forward.push_back(coord);
    plan.backward.push_back(colour);
  }
  return plan;
}

}  // namespace rmboc
