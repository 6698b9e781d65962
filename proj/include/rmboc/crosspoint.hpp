#pragma once

// Cycle model of one crosspoint: three side FIFOs feed a round-robin selector
// that writes into the main FIFO; the controller reads the main FIFO,
// processes the command and writes the result to an output FIFO.
//
// Stage 1 (side FIFO read + main FIFO write) and stage 2 (controller read +
// process + output write) each hold a command for 4 cycles and overlap for
// different commands, so an idle crosspoint turns a command around in 8
// cycles and a busy one completes one command every 4 cycles.

#include <array>
#include <cstdint>
#include <deque>
#include <optional>

#include "rmboc/command.hpp"
#include "rmboc/protocol.hpp"
#include "rmboc/topology.hpp"

namespace rmboc {

inline constexpr Cycle kStageCycles = 4;
inline constexpr Cycle kIdleTurnaround = 2 * kStageCycles;

// A command waiting in or moving through a crosspoint.
struct Pending {
  Command cmd;
  Port arrival = Port::Pe;
  Cycle arrived_at = 0;
};

class SideFifo {
 public:
  explicit SideFifo(std::size_t capacity = 1) : capacity_(capacity) {}

  bool push(Pending p) {
    if (queue_.size() >= capacity_) {
      ++drops_;
      return false;
    }
    queue_.push_back(std::move(p));
    return true;
  }

  Pending pop() {
    Pending p = std::move(queue_.front());
    queue_.pop_front();
    return p;
  }

  bool empty() const { return queue_.empty(); }
  std::size_t size() const { return queue_.size(); }
  std::size_t capacity() const { return capacity_; }
  std::uint64_t drops() const { return drops_; }
  std::size_t clear() {
    std::size_t n = queue_.size();
    queue_.clear();
    return n;
  }
  const std::deque<Pending>& contents() const { return queue_; }

 private:
  std::size_t capacity_;
  std::deque<Pending> queue_;
  std::uint64_t drops_ = 0;
};

// Round-robin over slots 0 (Left/Up), 1 (Right/Down), 2 (PE).
struct SelectorState {
  int last_served = 2;
};

// First non-empty slot after the last served one; advances only on a pick.
inline std::optional<int> selector_pick(SelectorState& state, const std::array<bool, 3>& non_empty) {
  for (int step = 1; step <= 3; ++step) {
    int slot = (state.last_served + step) % 3;
    if (non_empty[static_cast<std::size_t>(slot)]) {
      state.last_served = slot;
      return slot;
    }
  }
  return std::nullopt;
}

struct StageSlot {
  Pending item;
  Cycle done_at = 0;
};

struct PipelineState {
  std::optional<StageSlot> stage1;
  std::optional<StageSlot> stage2;
};

enum class EnqueueResult : std::uint8_t { Accepted, Dropped };

class Crosspoint {
 public:
  Crosspoint(CrosspointId id, std::array<Port, 3> ports, std::size_t fifo_depth)
      : id_(id), ports_(ports), sides_{SideFifo(fifo_depth), SideFifo(fifo_depth), SideFifo(fifo_depth)} {}

  const CrosspointId& id() const { return id_; }
  const std::array<Port, 3>& ports() const { return ports_; }

  EnqueueResult enqueue(Port port, const Command& cmd, Cycle now) {
    SideFifo& fifo = sides_[slot_of(port)];
    if (reconfiguring_) {
      ++reconfig_losses_;
      return EnqueueResult::Dropped;
    }
    return fifo.push(Pending{cmd, port, now}) ? EnqueueResult::Accepted : EnqueueResult::Dropped;
  }

  // Stage 2 result finishing at `now`, ready for the controller handler.
  std::optional<Pending> take_completed(Cycle now) {
    if (!pipe_.stage2 || pipe_.stage2->done_at != now) return std::nullopt;
    Pending p = std::move(pipe_.stage2->item);
    pipe_.stage2.reset();
    return p;
  }

  // Moves commands between stages. Call after take_completed for the same cycle.
  void advance(Cycle now) {
    if (reconfiguring_) return;
    if (pipe_.stage1 && pipe_.stage1->done_at == now) {
      main_.push_back(std::move(pipe_.stage1->item));
      pipe_.stage1.reset();
    }
    if (!pipe_.stage2 && !main_.empty()) {
      pipe_.stage2 = StageSlot{std::move(main_.front()), now + kStageCycles};
      main_.pop_front();
    }
    if (!pipe_.stage1) {
      std::array<bool, 3> non_empty{!sides_[0].empty(), !sides_[1].empty(), !sides_[2].empty()};
      if (auto slot = selector_pick(selector_, non_empty))
        pipe_.stage1 = StageSlot{sides_[static_cast<std::size_t>(*slot)].pop(), now + kStageCycles};
    }
  }

  bool idle() const {
    return !pipe_.stage1 && !pipe_.stage2 && main_.empty() && sides_[0].empty() &&
           sides_[1].empty() && sides_[2].empty();
  }

  // Transient state is lost; the channel table persists.
  std::size_t begin_reconfiguration() {
    std::size_t lost = sides_[0].clear() + sides_[1].clear() + sides_[2].clear() + main_.size();
    main_.clear();
    if (pipe_.stage1) ++lost;
    if (pipe_.stage2) ++lost;
    pipe_ = {};
    reconfig_losses_ += lost;
    reconfiguring_ = true;
    return lost;
  }
  void end_reconfiguration() { reconfiguring_ = false; }
  bool reconfiguring() const { return reconfiguring_; }

  ChannelTable& table() { return table_; }
  const ChannelTable& table() const { return table_; }
  const SideFifo& side(Port p) const { return sides_[slot_of(p)]; }
  const SideFifo& side_slot(std::size_t slot) const { return sides_[slot]; }
  const PipelineState& pipeline() const { return pipe_; }
  const SelectorState& selector() const { return selector_; }
  std::uint64_t reconfig_losses() const { return reconfig_losses_; }

  std::size_t slot_of(Port p) const {
    for (std::size_t i = 0; i < 3; ++i)
      if (ports_[i] == p) return i;
    throw InvalidParameter(std::string("port ") + to_string(p) + " not on this crosspoint");
  }

 private:
  CrosspointId id_;
  std::array<Port, 3> ports_;
  std::array<SideFifo, 3> sides_;
  SelectorState selector_;
  std::deque<Pending> main_;
  PipelineState pipe_;
  ChannelTable table_;
  bool reconfiguring_ = false;
  std::uint64_t reconfig_losses_ = 0;
};

}  // namespace rmboc
