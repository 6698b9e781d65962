#include <gtest/gtest.h>

#include "rmboc/analysis.hpp"

using namespace rmboc;

namespace {

// Independent count: one REQUEST per ordered pair whose path touches
// crosspoint j, split by the side it arrives from.
std::int64_t brute_force_max(int n) {
  std::int64_t best = 0;
  for (int j = 1; j <= n; ++j) {
    std::int64_t total = 0;
    for (int s = 1; s <= n; ++s)
      for (int d = 1; d <= n; ++d) {
        if (s == d) continue;
        const int lo = std::min(s, d), hi = std::max(s, d);
        if (j >= lo && j <= hi) ++total;
      }
    best = std::max(best, total);
  }
  return best;
}

}  // namespace

TEST(DirectionMaxima, Values) {
  auto a = direction_maxima(4, 2);
  EXPECT_EQ(a.right, 4);
  EXPECT_EQ(a.left, 3);
  EXPECT_EQ(a.pe, 3);
  EXPECT_EQ(a.total(), 10);
  auto b = direction_maxima(2, 1);
  EXPECT_EQ(b.right, 1);
  EXPECT_EQ(b.left, 0);
  EXPECT_EQ(b.pe, 1);
  auto c = direction_maxima(4, 4);
  EXPECT_EQ(c.right, 0);
  EXPECT_EQ(c.left, 3);
  EXPECT_EQ(c.pe, 3);
  EXPECT_THROW(direction_maxima(4, 5), InvalidParameter);
}

TEST(MaxTotalComm, SpotValues) {
  EXPECT_EQ(max_total_comm(4), 10);
  EXPECT_EQ(max_total_comm(3), 6);
  EXPECT_EQ(max_total_comm(2), 2);
  EXPECT_EQ(max_total_comm(16), 142);
  EXPECT_THROW(max_total_comm(1), InvalidParameter);
}

TEST(WorstCaseLatency, SpotValues) {
  EXPECT_EQ(worst_case_latency(4), 40);
  EXPECT_EQ(worst_case_latency(2), 8);
  EXPECT_EQ(worst_case_latency(3), 24);
}

TEST(Oracle, MatchesClosedFormAndBruteForce) {
  std::int64_t prev = 0;
  for (int n = 2; n <= 64; ++n) {
    const auto o = oracle_max_total_comm_detail(n);
    EXPECT_EQ(o.value, max_total_comm(n)) << "n=" << n;
    EXPECT_EQ(o.value, brute_force_max(n)) << "n=" << n;
    EXPECT_GT(o.value, prev);
    prev = o.value;
    for (int j : o.argmax) {
      EXPECT_GE(j, n / 2);
      EXPECT_LE(j, (n + 1) / 2 + 1);
    }
  }
  EXPECT_EQ(oracle_max_total_comm(16), 142);
}

TEST(CheckBound, IsolatedCommand) {
  std::vector<ResidenceRecord> recs;
  for (int cp = 0; cp < 4; ++cp) recs.push_back({1, cp, CommandKind::Request, cp * 8, cp * 8 + 8});
  BoundReport r = check_bound(recs, 4, 10, 0);
  EXPECT_TRUE(r.ok());
  EXPECT_EQ(r.max_residence, 8);
}

TEST(CheckBound, FlagsViolations) {
  std::vector<ResidenceRecord> recs{{1, 0, CommandKind::Request, 0, 41},
                                    {2, 0, CommandKind::Request, 0, 12},
                                    {2, 1, CommandKind::Request, 12, 24}};
  BoundReport r = check_bound(recs, 4, 10, 0);
  EXPECT_EQ(r.bound_violations, 1U);
  EXPECT_EQ(r.repeated_waits, 1U);
  EXPECT_FALSE(r.ok());
}

TEST(CheckBound, PreconditionGuard) {
  std::vector<ResidenceRecord> recs{{1, 0, CommandKind::Request, 0, 100}};
  BoundReport r = check_bound(recs, 4, 1, 3);
  EXPECT_FALSE(r.precondition_ok);
  EXPECT_EQ(r.bound_violations, 0U);
  EXPECT_FALSE(r.precondition_note.empty());
}
