#pragma once

// Static structure of an RMBoC instance: processing elements, crosspoints and
// the k-segment links between lattice-adjacent crosspoints.
//
// A 1D array with n PEs has one crosspoint per PE and n-1 links. A 2D N x N
// mesh attaches every PE to two crosspoints, one serving its row (Left/Right
// links) and one serving its column (Up/Down links). Row 0 is the topmost
// level; segment index 0 is the topmost bus of a link.

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rmboc/error.hpp"

namespace rmboc {

using Cycle = std::int64_t;
using SegmentIndex = int;

// 1D addresses use row 0 and col = j in [1, n]; 2D addresses are (row, col)
// in [0, N)^2.
struct NodeAddress {
  int row = 0;
  int col = 0;

  static constexpr NodeAddress linear(int j) { return {0, j}; }
  static constexpr NodeAddress grid(int r, int c) { return {r, c}; }

  friend constexpr auto operator<=>(const NodeAddress&, const NodeAddress&) = default;
};

enum class Port : std::uint8_t { Left, Right, Up, Down, Pe };

enum class Orientation : std::uint8_t { Row, Column };

enum class TopologyKind : std::uint8_t { OneD, TwoD };

constexpr Port opposite(Port p) {
  switch (p) {
    case Port::Left: return Port::Right;
    case Port::Right: return Port::Left;
    case Port::Up: return Port::Down;
    case Port::Down: return Port::Up;
    case Port::Pe: return Port::Pe;
  }
  return Port::Pe;
}

constexpr Orientation orientation_of(Port p) {
  return (p == Port::Up || p == Port::Down) ? Orientation::Column : Orientation::Row;
}

inline const char* to_string(Port p) {
  switch (p) {
    case Port::Left: return "Left";
    case Port::Right: return "Right";
    case Port::Up: return "Up";
    case Port::Down: return "Down";
    case Port::Pe: return "PE";
  }
  return "?";
}

// Identifies one crosspoint: the PE it serves and which network it belongs to.
struct CrosspointId {
  NodeAddress pe;
  Orientation orientation = Orientation::Row;

  friend constexpr auto operator<=>(const CrosspointId&, const CrosspointId&) = default;
};

struct LinkEnds {
  int cp_a;     // lower/left-hand crosspoint index
  Port port_a;  // Right or Down
  int cp_b;
  Port port_b;  // Left or Up
};

class Topology {
 public:
  static Topology build_1d(int n, int k, int w) {
    if (n < 2) throw InvalidParameter("1D topology needs n >= 2, got " + std::to_string(n));
    check_common(k, w);
    return Topology(TopologyKind::OneD, n, k, w);
  }

  static Topology build_2d(int N, int k, int w) {
    if (N < 2) throw InvalidParameter("2D topology needs N >= 2, got " + std::to_string(N));
    check_common(k, w);
    return Topology(TopologyKind::TwoD, N, k, w);
  }

  TopologyKind kind() const { return kind_; }
  bool is_2d() const { return kind_ == TopologyKind::TwoD; }
  // n for 1D, N for 2D.
  int size() const { return size_; }
  int segments() const { return k_; }
  int data_width() const { return w_; }

  int pe_count() const { return is_2d() ? size_ * size_ : size_; }
  int crosspoint_count() const { return is_2d() ? 2 * size_ * size_ : size_; }
  int link_count() const { return is_2d() ? 2 * size_ * (size_ - 1) : size_ - 1; }
  int total_segments() const { return link_count() * k_; }

  bool contains(const NodeAddress& a) const {
    if (is_2d()) return a.row >= 0 && a.row < size_ && a.col >= 0 && a.col < size_;
    return a.row == 0 && a.col >= 1 && a.col <= size_;
  }

  void require(const NodeAddress& a) const {
    if (!contains(a)) throw InvalidAddress("address " + format(a) + " outside topology");
  }

  std::vector<NodeAddress> pes() const {
    std::vector<NodeAddress> out;
    out.reserve(static_cast<std::size_t>(pe_count()));
    if (is_2d()) {
      for (int r = 0; r < size_; ++r)
        for (int c = 0; c < size_; ++c) out.push_back(NodeAddress::grid(r, c));
    } else {
      for (int j = 1; j <= size_; ++j) out.push_back(NodeAddress::linear(j));
    }
    return out;
  }

  int pe_index(const NodeAddress& a) const {
    return is_2d() ? a.row * size_ + a.col : a.col - 1;
  }

  NodeAddress pe_at(int index) const {
    return is_2d() ? NodeAddress::grid(index / size_, index % size_)
                   : NodeAddress::linear(index + 1);
  }

  // Adjacent PE address in direction d, or none at the boundary. Up/Down do
  // not exist in 1D.
  std::optional<NodeAddress> neighbor(const NodeAddress& a, Port d) const {
    NodeAddress b = a;
    switch (d) {
      case Port::Left: b.col -= 1; break;
      case Port::Right: b.col += 1; break;
      case Port::Up:
        if (!is_2d()) return std::nullopt;
        b.row -= 1;
        break;
      case Port::Down:
        if (!is_2d()) return std::nullopt;
        b.row += 1;
        break;
      case Port::Pe: return std::nullopt;
    }
    if (!contains(b)) return std::nullopt;
    return b;
  }

  // Row crosspoints occupy [0, PEs), column crosspoints [PEs, 2*PEs) in 2D.
  int crosspoint_index(const CrosspointId& id) const {
    int base = pe_index(id.pe);
    return (is_2d() && id.orientation == Orientation::Column) ? base + pe_count() : base;
  }

  CrosspointId crosspoint_at(int index) const {
    if (is_2d() && index >= pe_count())
      return {pe_at(index - pe_count()), Orientation::Column};
    return {pe_at(index), Orientation::Row};
  }

  // Ports of a crosspoint in selector order: first side, second side, PE.
  std::array<Port, 3> ports(Orientation o) const {
    if (o == Orientation::Column) return {Port::Up, Port::Down, Port::Pe};
    return {Port::Left, Port::Right, Port::Pe};
  }

  // Crosspoint on the far side of port p, if the link exists.
  std::optional<int> crosspoint_across(int cp, Port p) const {
    if (p == Port::Pe) return std::nullopt;
    CrosspointId id = crosspoint_at(cp);
    if (orientation_of(p) != id.orientation) return std::nullopt;
    auto nb = neighbor(id.pe, p);
    if (!nb) return std::nullopt;
    return crosspoint_index({*nb, id.orientation});
  }

  std::optional<int> link_at(int cp, Port p) const {
    auto other = crosspoint_across(cp, p);
    if (!other) return std::nullopt;
    CrosspointId id = crosspoint_at(cp);
    NodeAddress a = id.pe;
    if (p == Port::Left) a.col -= 1;
    if (p == Port::Up) a.row -= 1;
    if (!is_2d()) return a.col - 1;
    if (id.orientation == Orientation::Row) return a.row * (size_ - 1) + a.col;
    return size_ * (size_ - 1) + a.row * size_ + a.col;
  }

  LinkEnds link_ends(int link) const {
    if (!is_2d()) return {link, Port::Right, link + 1, Port::Left};
    int horizontal = size_ * (size_ - 1);
    if (link < horizontal) {
      int r = link / (size_ - 1);
      int c = link % (size_ - 1);
      return {crosspoint_index({NodeAddress::grid(r, c), Orientation::Row}), Port::Right,
              crosspoint_index({NodeAddress::grid(r, c + 1), Orientation::Row}), Port::Left};
    }
    int v = link - horizontal;
    int r = v / size_;
    int c = v % size_;
    return {crosspoint_index({NodeAddress::grid(r, c), Orientation::Column}), Port::Down,
            crosspoint_index({NodeAddress::grid(r + 1, c), Orientation::Column}), Port::Up};
  }

  std::string format(const NodeAddress& a) const {
    if (is_2d()) return std::to_string(a.row) + "," + std::to_string(a.col);
    return std::to_string(a.col);
  }

  std::string format_crosspoint(int cp) const {
    CrosspointId id = crosspoint_at(cp);
    if (!is_2d()) return format(id.pe);
    return format(id.pe) + (id.orientation == Orientation::Row ? "/row" : "/col");
  }

 private:
  Topology(TopologyKind kind, int size, int k, int w) : kind_(kind), size_(size), k_(k), w_(w) {}

  static void check_common(int k, int w) {
    if (k < 1 || k > 64)
      throw InvalidParameter("segment count k must be in [1, 64], got " + std::to_string(k));
    if (w < 1 || w > 64)
      throw InvalidParameter("data width w must be in [1, 64], got " + std::to_string(w));
  }

  TopologyKind kind_;
  int size_;
  int k_;
  int w_;
};

}  // namespace rmboc
