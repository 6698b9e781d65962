#include <gtest/gtest.h>

#include <sstream>

#include "rmboc/engine.hpp"
#include "rmboc/workloads.hpp"

using namespace rmboc;

namespace {

NodeAddress L(int j) { return NodeAddress::linear(j); }
NodeAddress G(int r, int c) { return NodeAddress::grid(r, c); }

SimConfig audited() {
  SimConfig c;
  c.audit = true;
  return c;
}

bool has_line(const std::string& trace, const std::string& needle) {
  return trace.find(needle) != std::string::npos;
}

std::size_t count_outcome(const Stats& s, ConnectionOutcome o) {
  std::size_t n = 0;
  for (const auto& c : s.connections) n += c.outcome == o;
  return n;
}

}  // namespace

TEST(Engine, SingleRequestHandTrace) {
  Topology t = Topology::build_1d(4, 4, 16);
  RunResult r = run(t, {{0, RequestAction{L(1), L(4)}}}, audited());
  // Four hops out at 8 cycles each, 2 cycles at the destination, four back.
  const Cycle expected = 4 * 8 + 2 + 4 * 8;
  EXPECT_TRUE(has_line(r.trace, "cycle=" + std::to_string(expected) +
                                    " cp=pe1 event=REPLY.deliver src=1 dst=4 seg=-"));
  EXPECT_TRUE(has_line(r.trace, "cycle=66 cp=pe1 event=conn.established"));
  ASSERT_EQ(r.stats.connections.size(), 1U);
  EXPECT_EQ(r.stats.connections[0].setup_latency(), 66);
  EXPECT_TRUE(r.audit.clean());
  for (const auto& rec : r.residences) EXPECT_EQ(rec.residence(), 8);
}

TEST(Engine, SegmentsAfterSetup) {
  Topology t = Topology::build_1d(4, 4, 16);
  Simulator sim(t, audited());
  sim.schedule({0, RequestAction{L(1), L(4)}});
  sim.run();
  EXPECT_EQ(sim.connection_state(L(1), L(4)), ConnectionState::Active);
  EXPECT_EQ(sim.allocated_segments(), 3);
  for (int l = 0; l < 3; ++l) EXPECT_EQ(sim.busy_segments(l), SegmentSet::of({0}));
  EXPECT_TRUE(sim.circuit_complete(L(1), L(4)));
}

TEST(Engine, DataTakesOneCycle) {
  Topology t = Topology::build_1d(4, 4, 24);
  Simulator sim(t, audited());
  sim.keep_received_words(true);
  sim.schedule({0, RequestAction{L(1), L(4)}});
  sim.run_until(99);
  ASSERT_EQ(sim.now(), 100);
  DataReceipt d = sim.transfer_data(L(1), L(4), 0x00BEEF);
  EXPECT_TRUE(d.delivered);
  EXPECT_EQ(d.delivered_at, 101);
  sim.run_until(101);
  ASSERT_EQ(sim.received(L(1), L(4)).size(), 1U);
  EXPECT_EQ(sim.received(L(1), L(4))[0].value, 0x00BEEFU);
}

TEST(Engine, SendWithoutCircuit) {
  Topology t = Topology::build_1d(4, 4, 16);
  Simulator sim(t);
  EXPECT_THROW(sim.transfer_data(L(1), L(4), 1), NotConnected);
  sim.schedule({0, RequestAction{L(1), L(4)}});
  sim.schedule({100, DestroyAction{L(1), L(4)}});
  sim.run();
  EXPECT_THROW(sim.transfer_data(L(1), L(4), 1), NotConnected);
  EXPECT_THROW(sim.transfer_data(L(1), L(4), 1U << 16), InvalidParameter);
}

TEST(Engine, EmptyScenarioIsQuiescent) {
  RunResult r = run(Topology::build_1d(4, 4, 16), {}, audited());
  EXPECT_TRUE(r.stats.quiescent);
  EXPECT_EQ(r.stats.end_cycle, 0);
  EXPECT_EQ(r.stats.commands_processed, 0U);
  EXPECT_TRUE(r.trace.empty());
}

TEST(Engine, SharedLinkConflictSingleSegment) {
  Topology t = Topology::build_1d(4, 1, 8);
  RunResult r =
      run(t, {{0, RequestAction{L(1), L(3)}}, {0, RequestAction{L(2), L(4)}}}, audited());
  EXPECT_EQ(count_outcome(r.stats, ConnectionOutcome::Established), 1U);
  EXPECT_EQ(count_outcome(r.stats, ConnectionOutcome::NoFreeSegment), 1U);
  EXPECT_EQ(r.stats.cancels_no_free_segment, 1U);
  EXPECT_TRUE(r.audit.clean());
  EXPECT_TRUE(r.stats.quiescent);
}

TEST(Engine, RefusalIsNotANoFree) {
  Topology t = Topology::build_1d(4, 2, 8);
  RunResult r = run(t, {{0, PolicyAction{L(4), false}}, {0, RequestAction{L(1), L(4)}}}, audited());
  EXPECT_EQ(r.stats.cancels_refused, 1U);
  EXPECT_EQ(r.stats.cancels_no_free_segment, 0U);
  EXPECT_EQ(count_outcome(r.stats, ConnectionOutcome::Refused), 1U);
  EXPECT_TRUE(r.audit.clean());
}

TEST(Engine, SelfRequestRejected) {
  Topology t = Topology::build_1d(4, 2, 8);
  RunResult r = run(t, {{0, RequestAction{L(2), L(2)}}});
  EXPECT_EQ(r.stats.requests_rejected_self, 1U);
  EXPECT_TRUE(r.stats.connections.empty());
}

TEST(Engine, DestroyGetsConfirm) {
  Topology t = Topology::build_1d(4, 4, 16);
  RunResult r = run(t, {{0, RequestAction{L(1), L(4)}}, {100, DestroyAction{L(1), L(4)}}}, audited());
  ASSERT_EQ(r.stats.connections.size(), 1U);
  const auto& c = r.stats.connections[0];
  EXPECT_EQ(c.teardown_started, 100);
  ASSERT_TRUE(c.teardown_confirmed);
  EXPECT_EQ(c.destroy_retransmissions, 0);
  EXPECT_TRUE(has_line(r.trace, "event=CONFIRM.deliver src=1 dst=4"));
  EXPECT_TRUE(r.audit.clean());
  EXPECT_EQ(r.audit.leaked_segments, 0U);
}

// REQUEST for 1->4 is inside cp2's pipeline (cycles 8..16) when PE 2 starts
// reconfiguring.
TEST(Engine, RequestLostInReconfigurationIsRetried) {
  Topology t = Topology::build_1d(4, 4, 16);
  RunResult r = run(t, {{0, RequestAction{L(1), L(4)}}, {10, ReconfigureAction{L(2), 20}}},
                    audited());
  ASSERT_EQ(r.stats.connections.size(), 1U);
  EXPECT_EQ(r.stats.connections[0].outcome, ConnectionOutcome::Established);
  EXPECT_GE(r.stats.connections[0].retransmissions, 1);
  EXPECT_GE(r.stats.reconfig_losses, 1U);
  EXPECT_TRUE(r.audit.clean());
  EXPECT_TRUE(r.stats.quiescent);
}

// DESTROY issued at 100 sits in cp3 over cycles 116..124.
TEST(Engine, DestroyLostInReconfigurationIsReissued) {
  Topology t = Topology::build_1d(4, 4, 16);
  RunResult r = run(t,
                    {{0, RequestAction{L(1), L(4)}},
                     {100, DestroyAction{L(1), L(4)}},
                     {118, ReconfigureAction{L(3), 10}}},
                    audited());
  const auto& c = r.stats.connections.at(0);
  EXPECT_GE(c.destroy_retransmissions, 1);
  EXPECT_TRUE(c.teardown_confirmed);
  EXPECT_TRUE(r.audit.clean());
  EXPECT_EQ(r.audit.leaked_segments, 0U);
}

TEST(Engine, IdleReconfigurationIsInvisible) {
  Topology t = Topology::build_1d(4, 4, 16);
  RunResult a = run(t, {{0, RequestAction{L(1), L(2)}}});
  RunResult b = run(t, {{0, RequestAction{L(1), L(2)}}, {0, ReconfigureAction{L(4), 50}}});
  EXPECT_EQ(a.stats.connections[0].established_at, b.stats.connections[0].established_at);
  EXPECT_EQ(b.stats.reconfig_losses, 0U);
}

TEST(Engine, RetryLimitEndsInFailure) {
  Topology t = Topology::build_1d(4, 4, 16);
  SimConfig c = audited();
  c.retry_limit = 3;
  RunResult r =
      run(t, {{0, ReconfigureAction{L(4), 1'000'000}}, {1, RequestAction{L(1), L(4)}}}, c);
  ASSERT_EQ(r.stats.connections.size(), 1U);
  EXPECT_EQ(r.stats.connections[0].outcome, ConnectionOutcome::Failed);
  EXPECT_EQ(r.stats.connections[0].retransmissions, 3);
  EXPECT_EQ(r.stats.request_retransmissions, 3U);
  EXPECT_TRUE(r.audit.clean());
}

TEST(Engine, NoRetransmissionWhenAnswered) {
  Topology t = Topology::build_1d(4, 4, 16);
  RunResult r = run(t, {{0, RequestAction{L(1), L(4)}}, {100, DestroyAction{L(1), L(4)}}});
  EXPECT_EQ(r.stats.request_retransmissions, 0U);
  EXPECT_EQ(r.stats.destroy_retransmissions, 0U);
}

TEST(Engine, ShortTimeoutDuplicatesStayClean) {
  Topology t = Topology::build_1d(6, 2, 16);
  SimConfig c = audited();
  c.timeout = worst_case_latency(6) + 1;
  RunResult r = run(t, all_pairs_burst(t), c);
  EXPECT_GT(r.stats.request_retransmissions, 0U);
  EXPECT_TRUE(r.audit.clean()) << (r.audit.details.empty() ? "" : r.audit.details.front());
  EXPECT_TRUE(r.stats.quiescent);
}

TEST(Engine, AllPairsBurstNoDrops) {
  for (int n : {4, 6, 8}) {
    Topology t = Topology::build_1d(n, n * n, 16);
    SimConfig c = audited();
    c.trace = false;
    RunResult r = run(t, all_pairs_burst(t), c);
    EXPECT_EQ(r.stats.fifo_drops, 0U) << "n=" << n;
    EXPECT_TRUE(r.audit.clean());
    EXPECT_EQ(count_outcome(r.stats, ConnectionOutcome::Established),
              static_cast<std::size_t>(n * (n - 1)));
  }
}

TEST(Engine, TurnRelaysAtCornerPe) {
  Topology t = Topology::build_2d(4, 2, 16);
  Simulator sim(t, audited());
  sim.schedule({0, RequestAction{G(3, 1), G(1, 3)}});
  sim.run();
  const std::string tr = sim.trace();
  EXPECT_TRUE(has_line(tr, "cp=pe1,1 event=REQUEST.deliver src=3,1 dst=1,3"));
  EXPECT_TRUE(has_line(tr, "cp=1,1/row event=REQUEST.arrive src=3,1 dst=1,3"));
  EXPECT_FALSE(has_line(tr, "cp=pe1,2 event=REQUEST.deliver"));
  EXPECT_EQ(sim.connection_state(G(3, 1), G(1, 3)), ConnectionState::Active);
  EXPECT_TRUE(sim.relay_table(G(1, 1)).entries().contains({G(3, 1), G(1, 3)}));
  EXPECT_TRUE(sim.relay_table(G(1, 3)).entries().empty());
  EXPECT_TRUE(sim.circuit_complete(G(3, 1), G(1, 3)));
  EXPECT_EQ(sim.allocated_segments(), 4);
  EXPECT_TRUE(sim.audit().clean());
}

TEST(Engine, TwoDimensionalAllPairs) {
  Topology t = Topology::build_2d(3, 8, 16);
  SimConfig c = audited();
  c.trace = false;
  Simulator sim(t, c);
  sim.schedule(all_pairs_burst(t));
  RunResult r = sim.run();
  EXPECT_TRUE(r.audit.clean()) << (r.audit.details.empty() ? "" : r.audit.details.front());
  for (const auto& s : t.pes())
    for (const auto& d : t.pes())
      if (s != d && sim.connection_state(s, d) == ConnectionState::Active) {
        EXPECT_TRUE(sim.circuit_complete(s, d));
      }
}

TEST(Engine, Deterministic) {
  Topology t = Topology::build_1d(5, 2, 16);
  std::vector<ScenarioEvent> evs = all_pairs_burst(t);
  evs.push_back({30, ReconfigureAction{L(3), 40}});
  evs.push_back({200, DestroyAction{L(1), L(5)}});
  RunResult a = run(t, evs, audited());
  RunResult b = run(t, evs, audited());
  EXPECT_EQ(a.trace, b.trace);
  EXPECT_FALSE(a.trace.empty());
}

TEST(Engine, ConfigValidation) {
  Topology t = Topology::build_1d(4, 4, 16);
  SimConfig c;
  c.pe_latency = 0;
  EXPECT_THROW(Simulator(t, c), ConfigError);
  c = {};
  c.timeout = 40;
  EXPECT_THROW(Simulator(t, c), ConfigError);
  c = {};
  EXPECT_EQ(Simulator(t, c).config().fifo_depth, 10U);
  Simulator sim(t);
  EXPECT_THROW(sim.schedule({0, RequestAction{L(1), L(9)}}), InvalidAddress);
}

TEST(Engine, StreamingSoak) {
  Topology t = Topology::build_1d(4, 4, 24);
  StreamingPlan plan = streaming_soak(t, L(1), L(4), 100'000, 200);
  SimConfig c;
  c.trace = false;
  c.record_residence = false;
  Simulator sim(t, c);
  sim.keep_received_words(true);
  sim.schedule(plan.events);
  RunResult r = sim.run();
  EXPECT_EQ(r.stats.words_sent, 200'000U);
  EXPECT_EQ(r.stats.words_delivered, 200'000U);
  EXPECT_EQ(r.stats.words_lost, 0U);
  const auto& fwd = sim.received(L(1), L(4));
  const auto& back = sim.received(L(4), L(1));
  ASSERT_EQ(fwd.size(), plan.forward.size());
  ASSERT_EQ(back.size(), plan.backward.size());
  for (std::size_t i = 0; i < fwd.size(); ++i) {
    ASSERT_EQ(fwd[i].value, plan.forward[i]);
    ASSERT_EQ(back[i].value, plan.backward[i]);
  }
}
