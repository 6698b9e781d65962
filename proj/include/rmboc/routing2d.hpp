#pragma once

// Path policy of the 2D mesh. A route climbs first when the destination sits
// on a higher level (smaller row), then runs along the destination row. When
// the destination is lower it runs along the source row first and only turns
// down once it has reached the destination column. Every route is minimal and
// turns at most once; the turn is performed by the PE at the corner, which
// relays the command from one orientation's crosspoint to the other.

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <map>
#include <optional>
#include <vector>

#include "rmboc/command.hpp"
#include "rmboc/error.hpp"
#include "rmboc/topology.hpp"

namespace rmboc {

enum class Hop : std::uint8_t { Up, Down, Left, Right, Pe, Relay };

inline const char* to_string(Hop h) {
  switch (h) {
    case Hop::Up: return "Up";
    case Hop::Down: return "Down";
    case Hop::Left: return "Left";
    case Hop::Right: return "Right";
    case Hop::Pe: return "PE";
    case Hop::Relay: return "Relay";
  }
  return "?";
}

inline Port port_of(Hop h) {
  switch (h) {
    case Hop::Up: return Port::Up;
    case Hop::Down: return Port::Down;
    case Hop::Left: return Port::Left;
    case Hop::Right: return Port::Right;
    default: return Port::Pe;
  }
}

struct PathHop {
  NodeAddress at;
  Hop move;
  friend bool operator==(const PathHop&, const PathHop&) = default;
};

struct PathPlan {
  std::vector<PathHop> hops;
  std::optional<NodeAddress> turn;
};

namespace detail {

inline void walk(std::vector<PathHop>& hops, NodeAddress& pos, Hop dir, int count) {
  for (int i = 0; i < count; ++i) {
    hops.push_back({pos, dir});
    switch (dir) {
      case Hop::Up: --pos.row; break;
      case Hop::Down: ++pos.row; break;
      case Hop::Left: --pos.col; break;
      case Hop::Right: ++pos.col; break;
      default: break;
    }
  }
}

// Direction of the first move from `self` toward `dst` (self != dst).
inline Hop first_move(const NodeAddress& self, const NodeAddress& dst) {
  if (dst.row < self.row) return Hop::Up;
  if (dst.col != self.col) return dst.col > self.col ? Hop::Right : Hop::Left;
  return Hop::Down;
}

}  // namespace detail

inline PathPlan plan_path(const Topology& t, const NodeAddress& src, const NodeAddress& dst) {
  if (!t.is_2d()) throw InvalidAddress("plan_path needs a 2D topology");
  t.require(src);
  t.require(dst);
  if (src == dst) throw InvalidAddress("source and destination coincide at " + t.format(src));

  PathPlan plan;
  NodeAddress pos = src;
  const int drow = dst.row - src.row;
  const int dcol = dst.col - src.col;
  const Hop horizontal = dcol > 0 ? Hop::Right : Hop::Left;

  if (drow < 0) {
    detail::walk(plan.hops, pos, Hop::Up, -drow);
    if (dcol != 0) {
      plan.turn = pos;
      detail::walk(plan.hops, pos, horizontal, std::abs(dcol));
    }
  } else if (drow > 0) {
    detail::walk(plan.hops, pos, horizontal, std::abs(dcol));
    if (dcol != 0) plan.turn = pos;
    detail::walk(plan.hops, pos, Hop::Down, drow);
  } else {
    detail::walk(plan.hops, pos, horizontal, std::abs(dcol));
  }
  return plan;
}

// Orientation of the crosspoint a PE uses to start a route toward `dst`.
inline Orientation first_orientation(const NodeAddress& src, const NodeAddress& dst) {
  return orientation_of(port_of(detail::first_move(src, dst)));
}

// Local decision at a crosspoint of the given orientation.
inline Hop next_hop_2d(const NodeAddress& self, Orientation orientation, const NodeAddress& dst) {
  if (self == dst) return Hop::Pe;
  Hop m = detail::first_move(self, dst);
  return orientation_of(port_of(m)) == orientation ? m : Hop::Relay;
}

// Per-PE stitching of circuits that turn at this PE. Mirrors the crosspoint
// channel table rules: one entry per (source, destination), sessions retired
// by teardown absorb trailing REPLYs.
class RelayTable {
 public:
  enum class Decision : std::uint8_t { Forward, Absorb, Fail };

  explicit RelayTable(std::size_t capacity = 0) : capacity_(capacity) {}

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return entries_.size(); }

  Decision on_reply(const Command& cmd) {
    const PairKey key = pair_of(cmd);
    if (auto it = retired_.find(key); it != retired_.end() && it->second.session >= cmd.session)
      return (it->second.failed && it->second.session == cmd.session) ? Decision::Fail
                                                                       : Decision::Absorb;
    if (auto it = entries_.find(key); it != entries_.end()) {
      it->second = std::max(it->second, cmd.session);
      return Decision::Forward;
    }
    if (capacity_ != 0 && entries_.size() >= capacity_) {
      mark(key, cmd.session, true);
      return Decision::Fail;
    }
    entries_.emplace(key, cmd.session);
    return Decision::Forward;
  }

  // Returns true when an entry was removed.
  bool on_destroy(const Command& cmd) {
    const PairKey key = pair_of(cmd);
    bool removed = false;
    if (auto it = entries_.find(key); it != entries_.end() && it->second <= cmd.session) {
      entries_.erase(it);
      removed = true;
    }
    if (cmd.origin == Origin::Endpoint) mark(key, cmd.session, false);
    return removed;
  }

  const std::map<PairKey, std::uint32_t>& entries() const { return entries_; }

 private:
  struct Mark {
    std::uint32_t session;
    bool failed;
  };

  void mark(const PairKey& key, std::uint32_t session, bool failed) {
    auto [it, inserted] = retired_.try_emplace(key, Mark{session, failed});
    if (inserted) return;
    if (session > it->second.session || (session == it->second.session && !failed))
      it->second = {session, failed};
  }

  std::size_t capacity_;
  std::map<PairKey, std::uint32_t> entries_;
  std::map<PairKey, Mark> retired_;
};

}  // namespace rmboc
