#pragma once

#include <bit>
#include <cstdint>
#include <optional>
#include <vector>

#include "rmboc/topology.hpp"

namespace rmboc {

enum class CommandKind : std::uint8_t { Request, Reply, Cancel, Destroy, Confirm };

inline const char* to_string(CommandKind k) {
  switch (k) {
    case CommandKind::Request: return "REQUEST";
    case CommandKind::Reply: return "REPLY";
    case CommandKind::Cancel: return "CANCEL";
    case CommandKind::Destroy: return "DESTROY";
    case CommandKind::Confirm: return "CONFIRM";
  }
  return "?";
}

// Why a CANCEL was raised. Refusals come from the destination PE, the rest
// from a crosspoint or relaying PE that could not extend the circuit.
enum class CancelReason : std::uint8_t { Refused, NoFreeSegment, RelayFull };

// DESTROY initiated by the source endpoint is acknowledged with CONFIRM and
// retires the session at every crosspoint it passes. Cleanup sweeps raised by
// a failed allocation are neither.
enum class Origin : std::uint8_t { Endpoint, Crosspoint };

struct Command {
  CommandKind kind = CommandKind::Request;
  NodeAddress source;
  NodeAddress destination;
  // Connection attempt counter, chosen by the source. Strictly increasing per
  // (source, destination) pair.
  std::uint32_t session = 0;
  // REPLY only: the segment the previous hop allocated toward this crosspoint.
  std::optional<SegmentIndex> downstream_segment;
  CancelReason reason = CancelReason::Refused;
  Origin origin = Origin::Endpoint;
  // Trace identity; forwarded hops keep it, new commands get a fresh one.
  std::uint64_t uid = 0;
};

inline Command make_command(CommandKind kind, const NodeAddress& src, const NodeAddress& dst,
                            std::uint32_t session) {
  Command c;
  c.kind = kind;
  c.source = src;
  c.destination = dst;
  c.session = session;
  return c;
}

struct PairKey {
  NodeAddress source;
  NodeAddress destination;
  friend constexpr auto operator<=>(const PairKey&, const PairKey&) = default;
};

inline PairKey pair_of(const Command& c) { return {c.source, c.destination}; }

// Set of segment indices on one link, k <= 64.
class SegmentSet {
 public:
  constexpr SegmentSet() = default;
  static constexpr SegmentSet all(int k) {
    return SegmentSet(k >= 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << k) - 1);
  }
  static SegmentSet of(std::initializer_list<SegmentIndex> xs) {
    SegmentSet s;
    for (auto x : xs) s.insert(x);
    return s;
  }

  constexpr bool contains(SegmentIndex i) const { return (bits_ >> i) & 1U; }
  constexpr void insert(SegmentIndex i) { bits_ |= std::uint64_t{1} << i; }
  constexpr void erase(SegmentIndex i) { bits_ &= ~(std::uint64_t{1} << i); }
  constexpr bool empty() const { return bits_ == 0; }
  constexpr int size() const { return std::popcount(bits_); }
  // Lowest index, i.e. the highest free bus.
  constexpr SegmentIndex first() const { return std::countr_zero(bits_); }

  constexpr SegmentSet operator|(SegmentSet o) const { return SegmentSet(bits_ | o.bits_); }
  constexpr SegmentSet operator&(SegmentSet o) const { return SegmentSet(bits_ & o.bits_); }
  constexpr SegmentSet minus(SegmentSet o) const { return SegmentSet(bits_ & ~o.bits_); }
  constexpr std::uint64_t bits() const { return bits_; }

  std::vector<SegmentIndex> to_vector() const {
    std::vector<SegmentIndex> out;
    for (std::uint64_t b = bits_; b != 0; b &= b - 1) out.push_back(std::countr_zero(b));
    return out;
  }

  friend constexpr bool operator==(SegmentSet, SegmentSet) = default;

 private:
  constexpr explicit SegmentSet(std::uint64_t bits) : bits_(bits) {}
  std::uint64_t bits_ = 0;
};

}  // namespace rmboc
