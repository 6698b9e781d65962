#pragma once

// Crosspoint controller logic. Each handler is a pure state transition over a
// single crosspoint's channel table: given a command and the local routing
// decision it returns the commands to emit and mutates the table.
//
// REQUEST leaves no state. REPLY walks back from the destination and binds one
// segment per link, reusing an existing entry for the same (source,
// destination) pair instead of allocating twice. DESTROY frees the pair's
// entry. Sessions let stale REPLYs that trail a completed teardown be absorbed
// instead of re-creating channels nobody will ever free.

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "rmboc/command.hpp"
#include "rmboc/error.hpp"
#include "rmboc/topology.hpp"

namespace rmboc {

enum class EntryState : std::uint8_t { Allocated, Active };

// One configuration register of the crossbar. The dst side is where the REPLY
// came in (toward the destination), the src side is where it went out.
struct ChannelEntry {
  NodeAddress source;
  NodeAddress destination;
  std::uint32_t session = 0;
  Port dst_port = Port::Pe;
  std::optional<SegmentIndex> dst_segment;
  Port src_port = Port::Pe;
  std::optional<SegmentIndex> src_segment;
  EntryState state = EntryState::Allocated;

  PairKey pair() const { return {source, destination}; }
};

enum class RetireKind : std::uint8_t { TornDown, Failed };

struct Retirement {
  std::uint32_t session = 0;
  RetireKind kind = RetireKind::TornDown;
  CancelReason reason = CancelReason::NoFreeSegment;
};

class ChannelTable {
 public:
  const std::vector<ChannelEntry>& entries() const { return entries_; }
  bool empty() const { return entries_.empty(); }

  const ChannelEntry* find(const PairKey& key) const {
    auto it = std::find_if(entries_.begin(), entries_.end(),
                           [&](const ChannelEntry& e) { return e.pair() == key; });
    return it == entries_.end() ? nullptr : &*it;
  }
  ChannelEntry* find(const PairKey& key) {
    return const_cast<ChannelEntry*>(std::as_const(*this).find(key));
  }

  void insert(ChannelEntry e) { entries_.push_back(std::move(e)); }

  bool erase(const PairKey& key) {
    auto it = std::find_if(entries_.begin(), entries_.end(),
                           [&](const ChannelEntry& e) { return e.pair() == key; });
    if (it == entries_.end()) return false;
    entries_.erase(it);
    return true;
  }

  // Segments this table binds on the link behind port p.
  SegmentSet segments_on(Port p) const {
    SegmentSet s;
    for (const auto& e : entries_) {
      if (e.dst_port == p && e.dst_segment) s.insert(*e.dst_segment);
      if (e.src_port == p && e.src_segment) s.insert(*e.src_segment);
    }
    return s;
  }

  const Retirement* retired(const PairKey& key) const {
    auto it = retired_.find(key);
    return it == retired_.end() ? nullptr : &it->second;
  }

  void retire(const PairKey& key, Retirement r) {
    auto [it, inserted] = retired_.try_emplace(key, r);
    if (inserted) return;
    Retirement& cur = it->second;
    if (r.session > cur.session || (r.session == cur.session && r.kind == RetireKind::TornDown))
      cur = r;
  }

  // Pairs with more than one entry; always empty when the at-most-one rule holds.
  std::vector<PairKey> duplicate_pairs() const {
    std::vector<PairKey> keys;
    for (const auto& e : entries_) keys.push_back(e.pair());
    std::sort(keys.begin(), keys.end());
    std::vector<PairKey> dups;
    for (std::size_t i = 1; i < keys.size(); ++i)
      if (keys[i] == keys[i - 1] && (dups.empty() || dups.back() != keys[i]))
        dups.push_back(keys[i]);
    return dups;
  }

  friend bool operator==(const ChannelTable& a, const ChannelTable& b) {
    auto same_entry = [](const ChannelEntry& x, const ChannelEntry& y) {
      return x.pair() == y.pair() && x.session == y.session && x.dst_port == y.dst_port &&
             x.dst_segment == y.dst_segment && x.src_port == y.src_port &&
             x.src_segment == y.src_segment && x.state == y.state;
    };
    if (a.entries_.size() != b.entries_.size() || a.retired_.size() != b.retired_.size())
      return false;
    for (std::size_t i = 0; i < a.entries_.size(); ++i)
      if (!same_entry(a.entries_[i], b.entries_[i])) return false;
    for (auto ia = a.retired_.begin(), ib = b.retired_.begin(); ia != a.retired_.end(); ++ia, ++ib)
      if (ia->first != ib->first || ia->second.session != ib->second.session ||
          ia->second.kind != ib->second.kind)
        return false;
    return true;
  }

 private:
  std::vector<ChannelEntry> entries_;
  std::map<PairKey, Retirement> retired_;
};

// Local routing decision for the command being handled.
struct Routes {
  Port toward_source = Port::Pe;
  Port toward_destination = Port::Pe;
  // True when this crosspoint's PE is the command's source (REPLY completes).
  bool at_source = false;
};

struct Emit {
  Port port;
  Command cmd;
};

enum class Effect : std::uint8_t { None, Allocated, Reused, Freed, NoFreeSegment, Absorbed };

inline const char* to_string(Effect e) {
  switch (e) {
    case Effect::None: return "none";
    case Effect::Allocated: return "alloc";
    case Effect::Reused: return "reuse";
    case Effect::Freed: return "free";
    case Effect::NoFreeSegment: return "nofree";
    case Effect::Absorbed: return "absorb";
  }
  return "?";
}

struct Outcome {
  std::vector<Emit> emits;
  Effect effect = Effect::None;
  // Segment allocated/reused on the source side, or freed segments.
  std::vector<SegmentIndex> segments;
};

inline Port decide_direction_1d(const NodeAddress& self, const NodeAddress& dest) {
  if (dest.col == self.col) return Port::Pe;
  return dest.col > self.col ? Port::Right : Port::Left;
}

// Highest free bus, i.e. the smallest index.
inline SegmentIndex allocate_segment(SegmentSet free) {
  if (free.empty()) throw NoFreeSegment();
  return free.first();
}

inline Outcome handle_request(const ChannelTable& /*table*/, const Command& cmd,
                              const Routes& routes) {
  return Outcome{{Emit{routes.toward_destination, cmd}}, Effect::None, {}};
}

// Commands emitted when the circuit cannot be extended: clean up toward the
// destination, tell the source. Fresh commands carry uid 0; the engine
// assigns identities.
inline std::vector<Emit> failure_emits(const Command& reply, Port toward_dst, Port toward_src,
                                       CancelReason reason) {
  Command destroy{CommandKind::Destroy, reply.source, reply.destination, reply.session,
                  std::nullopt, reason, Origin::Crosspoint, 0};
  Command cancel{CommandKind::Cancel, reply.source, reply.destination, reply.session,
                 std::nullopt, reason, Origin::Crosspoint, 0};
  return {Emit{toward_dst, destroy}, Emit{toward_src, cancel}};
}

// free_src_side: free segments on the link behind routes.toward_source
// (ignored when that port is the PE).
inline Outcome handle_reply(ChannelTable& table, const Command& cmd, Port arrival,
                            const Routes& routes, SegmentSet free_src_side) {
  const PairKey key = pair_of(cmd);
  Outcome out;

  if (const Retirement* r = table.retired(key); r && r->session >= cmd.session) {
    if (r->kind == RetireKind::Failed && r->session == cmd.session) {
      out.effect = Effect::NoFreeSegment;
      out.emits = failure_emits(cmd, arrival, routes.toward_source, r->reason);
    } else {
      out.effect = Effect::Absorbed;
    }
    return out;
  }

  if (ChannelEntry* e = table.find(key)) {
    e->session = std::max(e->session, cmd.session);
    e->dst_segment = cmd.downstream_segment;
    Command fwd = cmd;
    fwd.downstream_segment = e->src_segment;
    out.effect = Effect::Reused;
    if (e->src_segment) out.segments.push_back(*e->src_segment);
    out.emits.push_back(Emit{e->src_port, fwd});
    return out;
  }

  ChannelEntry entry{cmd.source, cmd.destination, cmd.session, arrival,
                     cmd.downstream_segment, routes.toward_source, std::nullopt,
                     EntryState::Allocated};
  Command fwd = cmd;
  fwd.downstream_segment.reset();
  if (routes.toward_source != Port::Pe) {
    if (free_src_side.empty()) {
      table.retire(key, {cmd.session, RetireKind::Failed, CancelReason::NoFreeSegment});
      out.effect = Effect::NoFreeSegment;
      out.emits = failure_emits(cmd, arrival, routes.toward_source, CancelReason::NoFreeSegment);
      return out;
    }
    SegmentIndex seg = allocate_segment(free_src_side);
    entry.src_segment = seg;
    fwd.downstream_segment = seg;
    out.segments.push_back(seg);
  } else if (routes.at_source) {
    entry.state = EntryState::Active;
  }
  table.insert(entry);
  out.effect = Effect::Allocated;
  out.emits.push_back(Emit{routes.toward_source, fwd});
  return out;
}

inline Outcome handle_cancel(const ChannelTable& /*table*/, const Command& cmd,
                             const Routes& routes) {
  return Outcome{{Emit{routes.toward_source, cmd}}, Effect::None, {}};
}

// Idempotent: a DESTROY with no matching entry just travels on.
inline Outcome handle_destroy(ChannelTable& table, const Command& cmd, const Routes& routes) {
  const PairKey key = pair_of(cmd);
  Outcome out;
  if (const ChannelEntry* e = table.find(key); e && e->session <= cmd.session) {
    if (e->dst_segment) out.segments.push_back(*e->dst_segment);
    if (e->src_segment) out.segments.push_back(*e->src_segment);
    table.erase(key);
    out.effect = Effect::Freed;
  }
  if (cmd.origin == Origin::Endpoint) table.retire(key, {cmd.session, RetireKind::TornDown, {}});
  out.emits.push_back(Emit{routes.toward_destination, cmd});
  return out;
}

inline Outcome handle_confirm(const ChannelTable& /*table*/, const Command& cmd,
                              const Routes& routes) {
  return Outcome{{Emit{routes.toward_source, cmd}}, Effect::None, {}};
}

inline Outcome process(ChannelTable& table, const Command& cmd, Port arrival, const Routes& routes,
                       SegmentSet free_src_side) {
  switch (cmd.kind) {
    case CommandKind::Request: return handle_request(table, cmd, routes);
    case CommandKind::Reply: return handle_reply(table, cmd, arrival, routes, free_src_side);
    case CommandKind::Cancel: return handle_cancel(table, cmd, routes);
    case CommandKind::Destroy: return handle_destroy(table, cmd, routes);
    case CommandKind::Confirm: return handle_confirm(table, cmd, routes);
  }
  return {};
}

}  // namespace rmboc
