#pragma once

// CSV statistics. The connection table columns are frozen; new information is
// only ever appended to the summary block.

#include <optional>
#include <ostream>
#include <string>

#include "rmboc/engine.hpp"

namespace rmboc {

inline constexpr const char* kConnectionCsvHeader =
    "source,destination,session,requested_at,outcome,established_at,setup_latency,"
    "retransmissions,teardown_started,teardown_confirmed,destroy_retransmissions";

namespace detail {
inline std::string opt(const std::optional<Cycle>& v) { return v ? std::to_string(*v) : ""; }

// Addresses contain commas in 2D, so they are quoted there.
inline std::string csv_address(const Topology& t, const NodeAddress& a) {
  return t.is_2d() ? "\"" + t.format(a) + "\"" : t.format(a);
}
}  // namespace detail

inline void write_stats_csv(std::ostream& out, const RunResult& r, const Topology& t) {
  const Stats& s = r.stats;
  out << kConnectionCsvHeader << '\n';
  for (const auto& c : s.connections) {
    out << detail::csv_address(t, c.source) << ',' << detail::csv_address(t, c.destination) << ','
        << c.session << ',' << c.requested_at << ',' << to_string(c.outcome) << ','
        << detail::opt(c.established_at) << ',' << detail::opt(c.setup_latency()) << ','
        << c.retransmissions << ',' << detail::opt(c.teardown_started) << ','
        << detail::opt(c.teardown_confirmed) << ',' << c.destroy_retransmissions << '\n';
  }
  out << "\n# summary\nkey,value\n";
  auto kv = [&](const char* k, auto v) { out << k << ',' << v << '\n'; };
  kv("end_cycle", s.end_cycle);
  kv("quiescent", s.quiescent ? 1 : 0);
  kv("commands_processed", s.commands_processed);
  kv("cancels_refused", s.cancels_refused);
  kv("cancels_no_free_segment", s.cancels_no_free_segment);
  kv("cancels_relay_full", s.cancels_relay_full);
  kv("request_retransmissions", s.request_retransmissions);
  kv("destroy_retransmissions", s.destroy_retransmissions);
  kv("requests_rejected_self", s.requests_rejected_self);
  kv("requests_ignored_busy", s.requests_ignored_busy);
  kv("fifo_drops", s.fifo_drops);
  kv("reconfig_losses", s.reconfig_losses);
  kv("stale_absorbed", s.stale_absorbed);
  kv("stray_at_source", s.stray_at_source);
  kv("words_sent", s.words_sent);
  kv("words_delivered", s.words_delivered);
  kv("words_lost", s.words_lost);
  for (std::size_t l = 0; l < s.link_busy_cycles.size(); ++l)
    out << "link_busy_cycles[" << l << "]," << s.link_busy_cycles[l] << '\n';
  if (r.audit.cycles_audited > 0) {
    kv("audit_cycles", r.audit.cycles_audited);
    kv("audit_exclusivity_violations", r.audit.exclusivity_violations);
    kv("audit_duplicate_entries", r.audit.duplicate_entries);
    kv("audit_leaked_segments", r.audit.leaked_segments);
    kv("audit_broken_circuits", r.audit.broken_circuits);
  }
}

}  // namespace rmboc
