#pragma once

// Deterministic cycle-driven simulation of a whole RMBoC network.
//
// Every processed cycle runs the same phases in a fixed order:
//   1. reconfiguration windows that end now are closed
//   2. data words injected last cycle are delivered
//   3. source timers expire (REQUEST / DESTROY retransmission)
//   4. delayed PE actions (decisions, relays, CONFIRMs) inject commands
//   5. scenario events scheduled for this cycle are applied
//   6. every crosspoint, in index order, completes its stage-2 command and
//      hands the handler output to the neighbour FIFO or the attached PE
//   7. every crosspoint advances its pipeline
//   8. optional audit of the global segment invariants
// Cycles where nothing can change are skipped.

#include <algorithm>
#include <array>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <queue>
#include <set>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "rmboc/analysis.hpp"
#include "rmboc/command.hpp"
#include "rmboc/crosspoint.hpp"
#include "rmboc/error.hpp"
#include "rmboc/event.hpp"
#include "rmboc/protocol.hpp"
#include "rmboc/routing2d.hpp"
#include "rmboc/topology.hpp"

namespace rmboc {

struct SimConfig {
  std::size_t fifo_depth = 0;      // 0: MaxTotalComm of the topology
  Cycle pe_latency = 2;            // accept/refuse decision, CONFIRM, sweep start
  Cycle relay_latency = 2;         // 2D turn relay
  Cycle timeout = 0;               // 0: derived from the worst-case path delay
  int retry_limit = 8;             // REQUEST retransmissions; 0 = unlimited
  int backoff_cap = 3;             // timeout doubles per retry up to 2^cap
  std::size_t relay_capacity = 0;  // 0: 4 * k entries per PE
  Cycle max_cycles = 10'000'000;
  std::uint64_t seed = 1;
  bool audit = false;
  bool trace = true;
  bool record_residence = true;
};

// Commands a crosspoint may have to hold at once; N*N PEs stand in for n in 2D.
inline int load_size(const Topology& t) { return t.is_2d() ? t.size() * t.size() : t.size(); }

// Crosspoints visited by the longest route (a 2D turn visits two at one PE).
inline int max_path_crosspoints(const Topology& t) { return t.is_2d() ? 2 * t.size() : t.size(); }

inline std::size_t default_fifo_depth(const Topology& t) {
  return static_cast<std::size_t>(max_total_comm(load_size(t)));
}

// Round trip where every crosspoint on the longest path hits its worst case.
inline Cycle default_timeout(const Topology& t, const SimConfig& c) {
  return 2 * max_path_crosspoints(t) * worst_case_latency(load_size(t)) + 2 * c.pe_latency +
         2 * c.relay_latency;
}

inline SimConfig resolve_config(const Topology& t, SimConfig c) {
  if (c.fifo_depth == 0) c.fifo_depth = default_fifo_depth(t);
  if (c.relay_capacity == 0) c.relay_capacity = 4 * static_cast<std::size_t>(t.segments());
  if (c.pe_latency < 1) throw ConfigError("PE latency must be >= 1");
  if (c.relay_latency < 1) throw ConfigError("relay latency must be >= 1");
  if (c.retry_limit < 0) throw ConfigError("retry limit must be >= 0");
  if (c.backoff_cap < 0 || c.backoff_cap > 16) throw ConfigError("backoff cap must be in [0, 16]");
  if (c.max_cycles < 1) throw ConfigError("max cycles must be >= 1");
  if (c.timeout == 0) c.timeout = default_timeout(t, c);
  if (c.timeout <= worst_case_latency(load_size(t)))
    throw ConfigError("timeout must exceed the worst-case crosspoint latency of " +
                      std::to_string(worst_case_latency(load_size(t))) + " cycles");
  return c;
}

enum class ConnectionOutcome : std::uint8_t {
  Pending,
  Established,
  Refused,
  NoFreeSegment,
  RelayFull,
  Failed,
  Aborted
};

inline const char* to_string(ConnectionOutcome o) {
  switch (o) {
    case ConnectionOutcome::Pending: return "pending";
    case ConnectionOutcome::Established: return "established";
    case ConnectionOutcome::Refused: return "refused";
    case ConnectionOutcome::NoFreeSegment: return "no_free_segment";
    case ConnectionOutcome::RelayFull: return "relay_full";
    case ConnectionOutcome::Failed: return "failed";
    case ConnectionOutcome::Aborted: return "aborted";
  }
  return "?";
}

// One connection attempt (one session) as seen by its source.
struct ConnectionRecord {
  NodeAddress source;
  NodeAddress destination;
  std::uint32_t session = 0;
  Cycle requested_at = 0;
  ConnectionOutcome outcome = ConnectionOutcome::Pending;
  std::optional<Cycle> established_at;
  int retransmissions = 0;
  std::optional<Cycle> teardown_started;
  std::optional<Cycle> teardown_confirmed;
  int destroy_retransmissions = 0;

  std::optional<Cycle> setup_latency() const {
    if (!established_at) return std::nullopt;
    return *established_at - requested_at;
  }
};

struct StreamStats {
  std::uint64_t sent = 0;
  std::uint64_t delivered = 0;
  std::uint64_t lost = 0;
};

struct Stats {
  std::vector<ConnectionRecord> connections;
  std::uint64_t requests_rejected_self = 0;
  std::uint64_t requests_ignored_busy = 0;
  std::uint64_t cancels_refused = 0;
  std::uint64_t cancels_no_free_segment = 0;
  std::uint64_t cancels_relay_full = 0;
  std::uint64_t request_retransmissions = 0;
  std::uint64_t destroy_retransmissions = 0;
  std::uint64_t fifo_drops = 0;
  std::uint64_t reconfig_losses = 0;
  std::uint64_t stale_absorbed = 0;
  std::uint64_t stray_at_source = 0;
  std::uint64_t commands_processed = 0;
  std::vector<std::array<std::uint64_t, 3>> fifo_drops_per_crosspoint;
  std::vector<std::uint64_t> link_busy_cycles;  // summed over the link's segments
  std::map<PairKey, StreamStats> streams;
  std::uint64_t words_sent = 0;
  std::uint64_t words_delivered = 0;
  std::uint64_t words_lost = 0;
  Cycle end_cycle = 0;
  bool quiescent = false;
};

struct AuditReport {
  std::uint64_t cycles_audited = 0;
  std::uint64_t exclusivity_violations = 0;
  std::uint64_t duplicate_entries = 0;
  std::uint64_t leaked_entries = 0;
  std::uint64_t leaked_segments = 0;
  std::uint64_t broken_circuits = 0;
  bool final_checked = false;
  std::vector<std::string> details;

  bool clean() const {
    return exclusivity_violations == 0 && duplicate_entries == 0 && leaked_entries == 0 &&
           leaked_segments == 0 && broken_circuits == 0;
  }
};

struct DataReceipt {
  Cycle injected_at = 0;
  Cycle delivered_at = 0;
  bool delivered = false;
};

struct DataWord {
  std::uint64_t value = 0;
  Cycle epoch = 0;
};

struct RunResult {
  Stats stats;
  std::string trace;
  std::vector<ResidenceRecord> residences;
  AuditReport audit;
};

enum class ConnectionState : std::uint8_t { Idle, Pending, Active, TearingDown };

class Simulator {
 public:
  Simulator(Topology topology, SimConfig config = {})
      : topo_(std::move(topology)), cfg_(resolve_config(topo_, config)) {
    for (int i = 0; i < topo_.crosspoint_count(); ++i) {
      CrosspointId id = topo_.crosspoint_at(i);
      cps_.emplace_back(id, topo_.ports(id.orientation), cfg_.fifo_depth);
    }
    for (const auto& a : topo_.pes()) pes_.push_back(PeModel{a, true, 0, {}, RelayTable(cfg_.relay_capacity)});
    stats_.fifo_drops_per_crosspoint.assign(cps_.size(), {0, 0, 0});
    stats_.link_busy_cycles.assign(static_cast<std::size_t>(topo_.link_count()), 0);
  }

  const Topology& topology() const { return topo_; }
  const SimConfig& config() const { return cfg_; }
  Cycle now() const { return now_; }
  const Stats& stats() const { return stats_; }
  const AuditReport& audit() const { return audit_; }
  std::string trace() const { return trace_.str(); }
  const std::vector<ResidenceRecord>& residences() const { return residences_; }
  const Crosspoint& crosspoint(int index) const { return cps_.at(static_cast<std::size_t>(index)); }
  const Crosspoint& crosspoint(const CrosspointId& id) const {
    return crosspoint(topo_.crosspoint_index(id));
  }
  const RelayTable& relay_table(const NodeAddress& pe) const { return pe_model(pe).relay; }

  // Events may be added at any time for cycles >= now().
  void schedule(const ScenarioEvent& ev) {
    validate(ev);
    if (ev.at < now_) throw ConfigError("event scheduled in the past");
    events_.emplace(std::pair{ev.at, event_seq_++}, ev);
  }

  void schedule(const std::vector<ScenarioEvent>& evs) {
    for (const auto& e : evs) schedule(e);
  }

  ConnectionState connection_state(const NodeAddress& src, const NodeAddress& dst) const {
    const PeModel& pe = pe_model(src);
    auto it = pe.outgoing.find(dst);
    return it == pe.outgoing.end() ? ConnectionState::Idle : it->second.state;
  }

  const std::vector<DataWord>& received(const NodeAddress& src, const NodeAddress& dst) const {
    static const std::vector<DataWord> none;
    auto it = received_.find({src, dst});
    return it == received_.end() ? none : it->second;
  }
  void keep_received_words(bool keep) { keep_words_ = keep; }

  // Drives one word over an established circuit. The data network is
  // combinational: the word reaches the destination one cycle later.
  DataReceipt transfer_data(const NodeAddress& src, const NodeAddress& dst, std::uint64_t value) {
    topo_.require(src);
    topo_.require(dst);
    if (topo_.data_width() < 64 && (value >> topo_.data_width()) != 0)
      throw InvalidParameter("word does not fit in " + std::to_string(topo_.data_width()) + " bits");
    StreamStats& st = stats_.streams[{src, dst}];
    ++st.sent;
    ++stats_.words_sent;
    if (connection_state(src, dst) != ConnectionState::Active) {
      ++st.lost;
      ++stats_.words_lost;
      trace_line(pe_name(src), "data.lost", src, dst, std::nullopt);
      throw NotConnected("no active circuit " + topo_.format(src) + " -> " + topo_.format(dst));
    }
    DataReceipt r{now_, now_ + 1, false};
    if (!circuit_complete(src, dst)) {
      ++st.lost;
      ++stats_.words_lost;
      trace_line(pe_name(src), "data.lost", src, dst, std::nullopt);
      return r;
    }
    r.delivered = true;
    deliveries_.push_back({now_ + 1, src, dst, DataWord{value, now_}});
    trace_line(pe_name(src), "data.send", src, dst, std::nullopt);
    return r;
  }

  // True when following the crossbar settings from the source PE reaches the
  // destination PE.
  bool circuit_complete(const NodeAddress& src, const NodeAddress& dst) const {
    const PairKey key{src, dst};
    Orientation o = topo_.is_2d() ? first_orientation(src, dst) : Orientation::Row;
    int cp = topo_.crosspoint_index({src, o});
    const ChannelEntry* e = cps_[static_cast<std::size_t>(cp)].table().find(key);
    if (!e || e->src_port != Port::Pe) return false;
    for (int guard = 0; guard <= 2 * topo_.crosspoint_count(); ++guard) {
      if (e->dst_port == Port::Pe) {
        CrosspointId id = topo_.crosspoint_at(cp);
        if (id.pe == dst) return true;
        if (!topo_.is_2d()) return false;
        if (!pe_model(id.pe).relay.entries().contains(key)) return false;
        Orientation other =
            id.orientation == Orientation::Row ? Orientation::Column : Orientation::Row;
        cp = topo_.crosspoint_index({id.pe, other});
        e = cps_[static_cast<std::size_t>(cp)].table().find(key);
        if (!e || e->src_port != Port::Pe) return false;
        continue;
      }
      auto nb = topo_.crosspoint_across(cp, e->dst_port);
      if (!nb || !e->dst_segment) return false;
      const ChannelEntry* next = cps_[static_cast<std::size_t>(*nb)].table().find(key);
      if (!next || next->src_port != opposite(e->dst_port) || next->src_segment != e->dst_segment)
        return false;
      cp = *nb;
      e = next;
    }
    return false;
  }

  bool quiescent() const {
    if (!events_.empty() || !actions_.empty() || !timers_.empty() || !deliveries_.empty() ||
        !reconfig_ends_.empty())
      return false;
    return std::all_of(cps_.begin(), cps_.end(), [](const Crosspoint& c) { return c.idle(); });
  }

  // Processes cycle now() and moves to the next cycle where something can happen.
  void step() {
    process_cycle();
    Cycle next = next_interesting_cycle();
    account_busy(next - now_);
    now_ = next;
  }

  // Steps until the given cycle has been processed (or nothing remains).
  void run_until(Cycle last) {
    while (now_ <= last) {
      if (quiescent()) {
        account_busy(last + 1 - now_);
        now_ = last + 1;
        break;
      }
      process_cycle();
      Cycle next = std::min(next_interesting_cycle(), last + 1);
      account_busy(next - now_);
      now_ = next;
    }
  }

  RunResult run() {
    while (!quiescent() && now_ <= cfg_.max_cycles) step();
    return finish();
  }

  // Closes the run: final leak audit when quiescent, totals copied out.
  RunResult finish() {
    stats_.end_cycle = now_;
    stats_.quiescent = quiescent();
    if (cfg_.audit) {
      audit_cycle();
      if (stats_.quiescent) final_audit();
    }
    stats_.fifo_drops = 0;
    stats_.reconfig_losses = pe_reconfig_losses_;
    for (std::size_t i = 0; i < cps_.size(); ++i) {
      for (std::size_t s = 0; s < 3; ++s) {
        stats_.fifo_drops_per_crosspoint[i][s] = cps_[i].side_slot(s).drops();
        stats_.fifo_drops += cps_[i].side_slot(s).drops();
      }
      stats_.reconfig_losses += cps_[i].reconfig_losses();
    }
    return RunResult{stats_, trace_.str(), residences_, audit_};
  }

  // Segments currently bound on a link, derived from both endpoint tables.
  SegmentSet busy_segments(int link) const {
    LinkEnds ends = topo_.link_ends(link);
    return cps_[static_cast<std::size_t>(ends.cp_a)].table().segments_on(ends.port_a) |
           cps_[static_cast<std::size_t>(ends.cp_b)].table().segments_on(ends.port_b);
  }

  int allocated_segments() const {
    int total = 0;
    for (int l = 0; l < topo_.link_count(); ++l) total += busy_segments(l).size();
    return total;
  }

  int allocated_segments(const PairKey& key) const {
    int total = 0;
    for (int l = 0; l < topo_.link_count(); ++l) {
      LinkEnds ends = topo_.link_ends(l);
      SegmentSet s;
      for (auto [cp, port] : {std::pair{ends.cp_a, ends.port_a}, std::pair{ends.cp_b, ends.port_b}}) {
        if (const ChannelEntry* e = cps_[static_cast<std::size_t>(cp)].table().find(key)) {
          if (e->dst_port == port && e->dst_segment) s.insert(*e->dst_segment);
          if (e->src_port == port && e->src_segment) s.insert(*e->src_segment);
        }
      }
      total += s.size();
    }
    return total;
  }

 private:
  struct Connection {
    ConnectionState state = ConnectionState::Idle;
    std::uint32_t session = 0;
    int attempts = 0;
    int teardown_attempts = 0;
    Cycle deadline = 0;
    std::size_t record = 0;
  };

  struct PeModel {
    NodeAddress address;
    bool accept = true;
    Cycle reconfig_until = 0;  // exclusive; PE is down while now < reconfig_until
    std::map<NodeAddress, Connection> outgoing;
    RelayTable relay;
  };

  struct TimerKey {
    Cycle at;
    int pe;
    NodeAddress dst;
    friend auto operator<=>(const TimerKey&, const TimerKey&) = default;
  };

  struct Injection {
    int crosspoint;
    Command cmd;
  };

  struct Delivery {
    Cycle at;
    NodeAddress src;
    NodeAddress dst;
    DataWord word;
  };

  // --- lookup helpers -----------------------------------------------------

  PeModel& pe_model(const NodeAddress& a) { return pes_[static_cast<std::size_t>(topo_.pe_index(a))]; }
  const PeModel& pe_model(const NodeAddress& a) const {
    return pes_[static_cast<std::size_t>(topo_.pe_index(a))];
  }

  bool pe_down(const NodeAddress& a) const { return now_ < pe_model(a).reconfig_until; }

  std::string pe_name(const NodeAddress& a) const { return "pe" + topo_.format(a); }

  // Crosspoint a PE injects into when sending toward `target`.
  int entry_crosspoint(const NodeAddress& pe, const NodeAddress& target) const {
    Orientation o = topo_.is_2d() ? first_orientation(pe, target) : Orientation::Row;
    return topo_.crosspoint_index({pe, o});
  }

  Port route(int cp, const NodeAddress& target) const {
    CrosspointId id = topo_.crosspoint_at(cp);
    if (!topo_.is_2d()) return decide_direction_1d(id.pe, target);
    return port_of(next_hop_2d(id.pe, id.orientation, target));
  }

  SegmentSet free_segments(int cp, Port p) const {
    auto link = topo_.link_at(cp, p);
    if (!link) return {};
    return SegmentSet::all(topo_.segments()).minus(busy_segments(*link));
  }

  void validate(const ScenarioEvent& ev) const {
    std::visit(
        [&](const auto& a) {
          using T = std::decay_t<decltype(a)>;
          if constexpr (std::is_same_v<T, ReconfigureAction> || std::is_same_v<T, PolicyAction>) {
            topo_.require(a.pe);
          } else {
            topo_.require(a.source);
            topo_.require(a.destination);
          }
        },
        ev.action);
  }

  // --- tracing ------------------------------------------------------------

  void trace_line(const std::string& where, const std::string& event, const NodeAddress& src,
                  const NodeAddress& dst, std::optional<SegmentIndex> seg) {
    if (!cfg_.trace) return;
    trace_ << "cycle=" << now_ << " cp=" << where << " event=" << event
           << " src=" << topo_.format(src) << " dst=" << topo_.format(dst) << " seg=";
    if (seg)
      trace_ << *seg;
    else
      trace_ << '-';
    trace_ << '\n';
  }

  void trace_cmd(const std::string& where, const Command& c, const char* what,
                 std::optional<SegmentIndex> seg) {
    if (!cfg_.trace) return;
    trace_line(where, std::string(to_string(c.kind)) + "." + what, c.source, c.destination, seg);
  }

  // --- command movement ---------------------------------------------------

  Command fresh(Command c) {
    c.uid = next_uid_++;
    return c;
  }

  void enqueue(int cp, Port port, const Command& cmd) {
    Crosspoint& x = cps_[static_cast<std::size_t>(cp)];
    const std::string name = topo_.format_crosspoint(cp);
    if (x.reconfiguring()) {
      x.enqueue(port, cmd, now_);
      trace_cmd(name, cmd, "lost", cmd.downstream_segment);
      return;
    }
    if (x.enqueue(port, cmd, now_) == EnqueueResult::Dropped) {
      trace_cmd(name, cmd, "drop", cmd.downstream_segment);
      return;
    }
    trace_cmd(name, cmd, "arrive", cmd.downstream_segment);
  }

  void inject_from_pe(const NodeAddress& pe, const NodeAddress& target, const Command& cmd) {
    enqueue(entry_crosspoint(pe, target), Port::Pe, cmd);
  }

  void schedule_injection(Cycle at, int cp, const Command& cmd) {
    actions_.emplace(std::pair{at, action_seq_++}, Injection{cp, cmd});
  }

  // --- phases -------------------------------------------------------------

  void process_cycle() {
    end_reconfigurations();
    deliver_data();
    expire_timers();
    run_actions();
    apply_events();
    for (int i = 0; i < static_cast<int>(cps_.size()); ++i) complete_stage2(i);
    for (auto& c : cps_) c.advance(now_);
    if (cfg_.audit) audit_cycle();
  }

  void end_reconfigurations() {
    while (!reconfig_ends_.empty() && reconfig_ends_.begin()->first <= now_) {
      int pe = reconfig_ends_.begin()->second;
      reconfig_ends_.erase(reconfig_ends_.begin());
      PeModel& p = pes_[static_cast<std::size_t>(pe)];
      if (p.reconfig_until > now_) continue;  // extended by a later window
      for (int cp : crosspoints_of(p.address)) cps_[static_cast<std::size_t>(cp)].end_reconfiguration();
      trace_line(pe_name(p.address), "reconfig.end", p.address, p.address, std::nullopt);
    }
  }

  std::vector<int> crosspoints_of(const NodeAddress& pe) const {
    if (!topo_.is_2d()) return {topo_.crosspoint_index({pe, Orientation::Row})};
    return {topo_.crosspoint_index({pe, Orientation::Row}),
            topo_.crosspoint_index({pe, Orientation::Column})};
  }

  void deliver_data() {
    auto due = std::stable_partition(deliveries_.begin(), deliveries_.end(),
                                     [&](const Delivery& d) { return d.at <= now_; });
    for (auto it = deliveries_.begin(); it != due; ++it) {
      StreamStats& st = stats_.streams[{it->src, it->dst}];
      ++st.delivered;
      ++stats_.words_delivered;
      if (keep_words_) received_[{it->src, it->dst}].push_back(it->word);
      trace_line(pe_name(it->dst), "data.deliver", it->src, it->dst, std::nullopt);
    }
    deliveries_.erase(deliveries_.begin(), due);
  }

  void set_timer(int pe, const NodeAddress& dst, Connection& c, Cycle at) {
    timers_.erase(TimerKey{c.deadline, pe, dst});
    c.deadline = at;
    timers_.insert(TimerKey{at, pe, dst});
  }

  void clear_timer(int pe, const NodeAddress& dst, Connection& c) {
    timers_.erase(TimerKey{c.deadline, pe, dst});
  }

  Cycle backoff(int retries) const {
    return cfg_.timeout << std::min(retries, cfg_.backoff_cap);
  }

  void expire_timers() {
    while (!timers_.empty() && timers_.begin()->at <= now_) {
      TimerKey key = *timers_.begin();
      timers_.erase(timers_.begin());
      PeModel& pe = pes_[static_cast<std::size_t>(key.pe)];
      Connection& c = pe.outgoing.at(key.dst);
      ConnectionRecord& rec = stats_.connections[c.record];
      if (c.state == ConnectionState::Pending) {
        const int retransmissions = c.attempts - 1;
        if (cfg_.retry_limit != 0 && retransmissions >= cfg_.retry_limit) {
          rec.outcome = ConnectionOutcome::Failed;
          trace_line(pe_name(pe.address), "conn.failed", pe.address, key.dst, std::nullopt);
          begin_teardown(key.pe, key.dst, now_);
          continue;
        }
        ++c.attempts;
        ++rec.retransmissions;
        ++stats_.request_retransmissions;
        Command req = fresh(make_command(CommandKind::Request, pe.address, key.dst, c.session));
        trace_cmd(pe_name(pe.address), req, "retransmit", std::nullopt);
        inject_from_pe(pe.address, key.dst, req);
        c.deadline = now_ + backoff(c.attempts - 1);
        timers_.insert(TimerKey{c.deadline, key.pe, key.dst});
      } else if (c.state == ConnectionState::TearingDown) {
        ++c.teardown_attempts;
        ++rec.destroy_retransmissions;
        ++stats_.destroy_retransmissions;
        Command d = fresh(make_command(CommandKind::Destroy, pe.address, key.dst, c.session));
        trace_cmd(pe_name(pe.address), d, "retransmit", std::nullopt);
        inject_from_pe(pe.address, key.dst, d);
        c.deadline = now_ + backoff(c.teardown_attempts - 1);
        timers_.insert(TimerKey{c.deadline, key.pe, key.dst});
      }
    }
  }

  // Source-tracked DESTROY sweep that only ends when CONFIRM comes back.
  void begin_teardown(int pe_index, const NodeAddress& dst, Cycle at) {
    PeModel& pe = pes_[static_cast<std::size_t>(pe_index)];
    Connection& c = pe.outgoing.at(dst);
    c.state = ConnectionState::TearingDown;
    c.teardown_attempts = 1;
    ConnectionRecord& rec = stats_.connections[c.record];
    rec.teardown_started = at;
    Command d = fresh(make_command(CommandKind::Destroy, pe.address, dst, c.session));
    if (at == now_) {
      trace_cmd(pe_name(pe.address), d, "issue", std::nullopt);
      inject_from_pe(pe.address, dst, d);
    } else {
      schedule_injection(at, entry_crosspoint(pe.address, dst), d);
    }
    set_timer(pe_index, dst, c, at + cfg_.timeout);
  }

  void run_actions() {
    while (!actions_.empty() && actions_.begin()->first.first <= now_) {
      Injection inj = actions_.begin()->second;
      actions_.erase(actions_.begin());
      CrosspointId id = topo_.crosspoint_at(inj.crosspoint);
      trace_cmd(pe_name(id.pe), inj.cmd, "issue", std::nullopt);
      enqueue(inj.crosspoint, Port::Pe, inj.cmd);
    }
  }

  void apply_events() {
    while (!events_.empty() && events_.begin()->first.first <= now_) {
      ScenarioEvent ev = events_.begin()->second;
      events_.erase(events_.begin());
      std::visit([&](const auto& a) { apply(a); }, ev.action);
    }
  }

  void apply(const RequestAction& a) {
    if (a.source == a.destination) {
      ++stats_.requests_rejected_self;
      trace_line(pe_name(a.source), "request.rejected", a.source, a.destination, std::nullopt);
      return;
    }
    const int pe_index = topo_.pe_index(a.source);
    PeModel& pe = pes_[static_cast<std::size_t>(pe_index)];
    Connection& c = pe.outgoing[a.destination];
    if (c.state != ConnectionState::Idle) {
      ++stats_.requests_ignored_busy;
      trace_line(pe_name(a.source), "request.ignored", a.source, a.destination, std::nullopt);
      return;
    }
    c.state = ConnectionState::Pending;
    ++c.session;
    c.attempts = 1;
    c.teardown_attempts = 0;
    c.record = stats_.connections.size();
    ConnectionRecord rec;
    rec.source = a.source;
    rec.destination = a.destination;
    rec.session = c.session;
    rec.requested_at = now_;
    stats_.connections.push_back(rec);
    Command req = fresh(make_command(CommandKind::Request, a.source, a.destination, c.session));
    trace_cmd(pe_name(a.source), req, "issue", std::nullopt);
    inject_from_pe(a.source, a.destination, req);
    set_timer(pe_index, a.destination, c, now_ + cfg_.timeout);
  }

  void apply(const DestroyAction& a) {
    const int pe_index = topo_.pe_index(a.source);
    PeModel& pe = pes_[static_cast<std::size_t>(pe_index)];
    auto it = pe.outgoing.find(a.destination);
    if (it == pe.outgoing.end()) return;
    Connection& c = it->second;
    if (c.state == ConnectionState::Pending) {
      stats_.connections[c.record].outcome = ConnectionOutcome::Aborted;
      begin_teardown(pe_index, a.destination, now_);
    } else if (c.state == ConnectionState::Active) {
      begin_teardown(pe_index, a.destination, now_);
    }
  }

  void apply(const SendAction& a) {
    try {
      transfer_data(a.source, a.destination, a.word);
    } catch (const NotConnected&) {
      // counted as lost by transfer_data
    }
  }

  void apply(const ReconfigureAction& a) {
    if (a.duration <= 0) return;
    PeModel& pe = pe_model(a.pe);
    pe.reconfig_until = std::max(pe.reconfig_until, now_ + a.duration);
    for (int cp : crosspoints_of(a.pe)) cps_[static_cast<std::size_t>(cp)].begin_reconfiguration();
    reconfig_ends_.insert({pe.reconfig_until, topo_.pe_index(a.pe)});
    trace_line(pe_name(a.pe), "reconfig.begin", a.pe, a.pe, std::nullopt);
  }

  void apply(const PolicyAction& a) {
    pe_model(a.pe).accept = a.accept;
    trace_line(pe_name(a.pe), a.accept ? "policy.accept" : "policy.refuse", a.pe, a.pe, std::nullopt);
  }

  void complete_stage2(int cp) {
    Crosspoint& x = cps_[static_cast<std::size_t>(cp)];
    auto done = x.take_completed(now_);
    if (!done) return;
    ++stats_.commands_processed;
    const Command& cmd = done->cmd;
    CrosspointId id = x.id();
    Routes r{route(cp, cmd.source), route(cp, cmd.destination), id.pe == cmd.source};
    SegmentSet free = r.toward_source == Port::Pe ? SegmentSet{} : free_segments(cp, r.toward_source);
    Outcome out = process(x.table(), cmd, done->arrival, r, free);

    if (cfg_.record_residence)
      residences_.push_back({cmd.uid, cp, cmd.kind, done->arrived_at, now_});
    const std::string name = topo_.format_crosspoint(cp);
    std::optional<SegmentIndex> seg;
    if (!out.segments.empty()) seg = out.segments.front();
    trace_cmd(name, cmd, out.effect == Effect::None ? "done" : to_string(out.effect), seg);
    if (out.effect == Effect::Absorbed) ++stats_.stale_absorbed;

    for (Emit& em : out.emits) {
      if (em.cmd.uid == 0) em.cmd = fresh(em.cmd);
      if (em.port == Port::Pe) {
        deliver_to_pe(id, em.cmd);
      } else {
        auto nb = topo_.crosspoint_across(cp, em.port);
        if (!nb) throw Error("route leaves the network at " + name);
        enqueue(*nb, opposite(em.port), em.cmd);
      }
    }
  }

  // --- PE behaviour -------------------------------------------------------

  void relay(const NodeAddress& pe, const NodeAddress& target, const Command& cmd) {
    schedule_injection(now_ + cfg_.relay_latency, entry_crosspoint(pe, target), cmd);
  }

  void deliver_to_pe(const CrosspointId& from, const Command& cmd) {
    const NodeAddress& self = from.pe;
    const std::string name = pe_name(self);
    if (pe_down(self)) {
      ++pe_reconfig_losses_;
      trace_cmd(name, cmd, "lost", std::nullopt);
      return;
    }
    trace_cmd(name, cmd, "deliver", std::nullopt);
    PeModel& pe = pe_model(self);
    switch (cmd.kind) {
      case CommandKind::Request: {
        if (self != cmd.destination) {
          relay(self, cmd.destination, cmd);
          return;
        }
        Command resp = cmd;
        resp.uid = 0;
        if (pe.accept) {
          resp.kind = CommandKind::Reply;
          resp.downstream_segment.reset();
        } else {
          resp.kind = CommandKind::Cancel;
          resp.reason = CancelReason::Refused;
          resp.origin = Origin::Endpoint;
        }
        schedule_injection(now_ + cfg_.pe_latency, entry_crosspoint(self, cmd.source), fresh(resp));
        return;
      }
      case CommandKind::Reply: {
        if (self != cmd.source) {
          switch (pe.relay.on_reply(cmd)) {
            case RelayTable::Decision::Forward: relay(self, cmd.source, cmd); break;
            case RelayTable::Decision::Absorb:
              ++stats_.stale_absorbed;
              trace_cmd(name, cmd, "absorb", std::nullopt);
              break;
            case RelayTable::Decision::Fail:
              trace_cmd(name, cmd, "relayfull", std::nullopt);
              for (const Emit& em :
                   failure_emits(cmd, Port::Pe, Port::Pe, CancelReason::RelayFull)) {
                const NodeAddress& target =
                    em.cmd.kind == CommandKind::Destroy ? cmd.destination : cmd.source;
                relay(self, target, fresh(em.cmd));
              }
              break;
          }
          return;
        }
        on_reply_at_source(cmd);
        return;
      }
      case CommandKind::Cancel:
        if (self != cmd.source) {
          relay(self, cmd.source, cmd);
          return;
        }
        on_cancel_at_source(cmd);
        return;
      case CommandKind::Destroy:
        if (self != cmd.destination) {
          pe.relay.on_destroy(cmd);
          relay(self, cmd.destination, cmd);
          return;
        }
        if (cmd.origin == Origin::Endpoint) {
          Command confirm = cmd;
          confirm.kind = CommandKind::Confirm;
          confirm.uid = 0;
          schedule_injection(now_ + cfg_.pe_latency, entry_crosspoint(self, cmd.source), fresh(confirm));
        }
        return;
      case CommandKind::Confirm:
        if (self != cmd.source) {
          relay(self, cmd.source, cmd);
          return;
        }
        on_confirm_at_source(cmd);
        return;
    }
  }

  Connection* current(const Command& cmd, ConnectionState expected) {
    PeModel& pe = pe_model(cmd.source);
    auto it = pe.outgoing.find(cmd.destination);
    if (it == pe.outgoing.end()) return nullptr;
    Connection& c = it->second;
    if (c.state != expected || c.session != cmd.session) return nullptr;
    return &c;
  }

  void on_reply_at_source(const Command& cmd) {
    Connection* c = current(cmd, ConnectionState::Pending);
    if (!c) {
      ++stats_.stray_at_source;
      return;
    }
    c->state = ConnectionState::Active;
    clear_timer(topo_.pe_index(cmd.source), cmd.destination, *c);
    ConnectionRecord& rec = stats_.connections[c->record];
    rec.outcome = ConnectionOutcome::Established;
    rec.established_at = now_;
    trace_line(pe_name(cmd.source), "conn.established", cmd.source, cmd.destination, std::nullopt);
  }

  void on_cancel_at_source(const Command& cmd) {
    Connection* c = current(cmd, ConnectionState::Pending);
    if (!c) {
      ++stats_.stray_at_source;
      return;
    }
    ConnectionRecord& rec = stats_.connections[c->record];
    switch (cmd.reason) {
      case CancelReason::Refused:
        ++stats_.cancels_refused;
        rec.outcome = ConnectionOutcome::Refused;
        break;
      case CancelReason::NoFreeSegment:
        ++stats_.cancels_no_free_segment;
        rec.outcome = ConnectionOutcome::NoFreeSegment;
        break;
      case CancelReason::RelayFull:
        ++stats_.cancels_relay_full;
        rec.outcome = ConnectionOutcome::RelayFull;
        break;
    }
    trace_line(pe_name(cmd.source), "conn.cancelled", cmd.source, cmd.destination, std::nullopt);
    const int pe_index = topo_.pe_index(cmd.source);
    // A first-attempt refusal never allocated anything; every other ending may
    // have left segments behind and is swept.
    if (cmd.reason == CancelReason::Refused && c->attempts == 1) {
      clear_timer(pe_index, cmd.destination, *c);
      c->state = ConnectionState::Idle;
      return;
    }
    clear_timer(pe_index, cmd.destination, *c);
    begin_teardown(pe_index, cmd.destination, now_ + cfg_.pe_latency);
  }

  void on_confirm_at_source(const Command& cmd) {
    Connection* c = current(cmd, ConnectionState::TearingDown);
    if (!c) {
      ++stats_.stray_at_source;
      return;
    }
    clear_timer(topo_.pe_index(cmd.source), cmd.destination, *c);
    c->state = ConnectionState::Idle;
    stats_.connections[c->record].teardown_confirmed = now_;
    trace_line(pe_name(cmd.source), "conn.closed", cmd.source, cmd.destination, std::nullopt);
  }

  // --- time keeping -------------------------------------------------------

  Cycle next_interesting_cycle() const {
    const Cycle soon = now_ + 1;
    if (std::any_of(cps_.begin(), cps_.end(), [](const Crosspoint& c) { return !c.idle(); }))
      return soon;
    Cycle next = std::numeric_limits<Cycle>::max();
    if (!events_.empty()) next = std::min(next, events_.begin()->first.first);
    if (!actions_.empty()) next = std::min(next, actions_.begin()->first.first);
    if (!timers_.empty()) next = std::min(next, timers_.begin()->at);
    if (!reconfig_ends_.empty()) next = std::min(next, reconfig_ends_.begin()->first);
    for (const auto& d : deliveries_) next = std::min(next, d.at);
    if (next == std::numeric_limits<Cycle>::max()) return soon;
    return std::max(next, soon);
  }

  void account_busy(Cycle span) {
    if (span <= 0) return;
    for (int l = 0; l < topo_.link_count(); ++l)
      stats_.link_busy_cycles[static_cast<std::size_t>(l)] +=
          static_cast<std::uint64_t>(busy_segments(l).size()) * static_cast<std::uint64_t>(span);
  }

  // --- auditing -----------------------------------------------------------

  void note(const std::string& what) {
    if (audit_.details.size() < 32)
      audit_.details.push_back("cycle " + std::to_string(now_) + ": " + what);
  }

  void audit_cycle() {
    ++audit_.cycles_audited;
    for (std::size_t i = 0; i < cps_.size(); ++i) {
      auto dups = cps_[i].table().duplicate_pairs();
      if (!dups.empty()) {
        audit_.duplicate_entries += dups.size();
        note("duplicate entry at " + topo_.format_crosspoint(static_cast<int>(i)));
      }
    }
    for (int l = 0; l < topo_.link_count(); ++l) {
      LinkEnds ends = topo_.link_ends(l);
      for (int s = 0; s < topo_.segments(); ++s) {
        std::optional<PairKey> owner;
        bool bad = false;
        for (auto [cp, port] :
             {std::pair{ends.cp_a, ends.port_a}, std::pair{ends.cp_b, ends.port_b}}) {
          int refs = 0;
          for (const auto& e : cps_[static_cast<std::size_t>(cp)].table().entries()) {
            bool uses = (e.dst_port == port && e.dst_segment == s) ||
                        (e.src_port == port && e.src_segment == s);
            if (!uses) continue;
            ++refs;
            if (owner && *owner != e.pair()) bad = true;
            owner = e.pair();
          }
          if (refs > 1) bad = true;
        }
        if (bad) {
          ++audit_.exclusivity_violations;
          note("segment " + std::to_string(s) + " of link " + std::to_string(l) +
               " bound to more than one connection");
        }
      }
    }
  }

  // At quiescence every binding must belong to a circuit its source holds open.
  void final_audit() {
    audit_.final_checked = true;
    auto owned = [&](const PairKey& key, std::uint32_t session) {
      const PeModel& pe = pe_model(key.source);
      auto it = pe.outgoing.find(key.destination);
      return it != pe.outgoing.end() && it->second.state == ConnectionState::Active &&
             it->second.session == session;
    };
    for (std::size_t i = 0; i < cps_.size(); ++i) {
      for (const auto& e : cps_[i].table().entries()) {
        if (owned(e.pair(), e.session)) continue;
        ++audit_.leaked_entries;
        audit_.leaked_segments += (e.dst_segment ? 1 : 0) + (e.src_segment ? 1 : 0);
        note("leaked entry " + topo_.format(e.source) + "->" + topo_.format(e.destination) +
             " at " + topo_.format_crosspoint(static_cast<int>(i)));
      }
    }
    for (const auto& pe : pes_) {
      for (const auto& [key, session] : pe.relay.entries()) {
        if (owned(key, session)) continue;
        ++audit_.leaked_entries;
        note("leaked relay entry at " + pe_name(pe.address));
      }
      for (const auto& [dst, c] : pe.outgoing) {
        if (c.state == ConnectionState::Active && !circuit_complete(pe.address, dst)) {
          ++audit_.broken_circuits;
          note("broken circuit " + topo_.format(pe.address) + "->" + topo_.format(dst));
        }
      }
    }
  }

  Topology topo_;
  SimConfig cfg_;
  std::vector<Crosspoint> cps_;
  std::vector<PeModel> pes_;
  Cycle now_ = 0;

  std::map<std::pair<Cycle, std::uint64_t>, ScenarioEvent> events_;
  std::uint64_t event_seq_ = 0;
  std::map<std::pair<Cycle, std::uint64_t>, Injection> actions_;
  std::uint64_t action_seq_ = 0;
  std::set<TimerKey> timers_;
  std::set<std::pair<Cycle, int>> reconfig_ends_;
  std::vector<Delivery> deliveries_;
  std::map<PairKey, std::vector<DataWord>> received_;
  bool keep_words_ = true;

  std::uint64_t next_uid_ = 1;
  std::uint64_t pe_reconfig_losses_ = 0;
  Stats stats_;
  AuditReport audit_;
  std::ostringstream trace_;
  std::vector<ResidenceRecord> residences_;
};

inline RunResult run(const Topology& t, const std::vector<ScenarioEvent>& events,
                     const SimConfig& config = {}) {
  Simulator sim(t, config);
  sim.schedule(events);
  return sim.run();
}

}  // namespace rmboc
