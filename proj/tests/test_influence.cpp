#include <gtest/gtest.h>

#include "sdvc/influence.hpp"

using namespace sdvc;

namespace {

VehicleState at(VehicleId id, int i, int l, int v, VehicleClass c = VehicleClass::Ov) {
  VehicleState s;
  s.id = id;
  s.cls = c;
  s.i = i;
  s.l = l;
  s.v = v;
  s.initial_speed = v;
  return s;
}

InfluenceResult judge(const VehicleState& n, const std::vector<VehicleState>& nb, const GridSpec& g,
                      const ScenarioConfig& cfg = {}) {
  return is_influenced(build_view(n, nb, g, cfg), g, cfg);
}

}  // namespace

TEST(Platoon, Singleton) {
  ScenarioConfig cfg;
  const auto p = find_platoon(at(1, 10, 1, 2), {at(2, 20, 2, 2)}, cfg);
  ASSERT_EQ(p.members.size(), 1U);
  EXPECT_EQ(p.head().id, 1U);
  EXPECT_EQ(p.tail().id, 1U);
}

TEST(Platoon, ConsecutiveCells) {
  ScenarioConfig cfg;
  const auto p = find_platoon(at(2, 11, 2, 2), {at(1, 10, 2, 2), at(3, 12, 2, 2), at(4, 13, 2, 3)}, cfg);
  ASSERT_EQ(p.members.size(), 3U);
  EXPECT_EQ(p.tail().i, 10);
  EXPECT_EQ(p.head().i, 12);
}

TEST(Platoon, GapSplits) {
  ScenarioConfig cfg;
  EXPECT_EQ(find_platoon(at(1, 10, 1, 2), {at(2, 15, 1, 2)}, cfg).members.size(), 1U);
  cfg.platoon_gap = 5;
  EXPECT_EQ(find_platoon(at(1, 10, 1, 2), {at(2, 15, 1, 2)}, cfg).members.size(), 2U);
}

TEST(Influence, EmvBehindInOwnLane) {
  GridSpec g;
  g.lanes = 1;
  const auto r = judge(at(1, 10, 1, 2), {at(0, 5, 1, 3, VehicleClass::Emv)}, g);
  EXPECT_TRUE(r.influenced);
  EXPECT_EQ(r.trigger, VehicleId{0});
  EXPECT_TRUE(r.trigger_is_emv);
  EXPECT_EQ(r.violation_tau, 2);
}

TEST(Influence, EqualSpeedsKeepTheGap) {
  GridSpec g;
  EXPECT_FALSE(judge(at(1, 10, 1, 2), {at(2, 20, 1, 2)}, g).influenced);
}

TEST(Influence, ConditionTwoPicksWhoYields) {
  GridSpec g;
  // mean of {3, 1, 0, 0} = 1: n deviates more and must act
  const auto slow = judge(at(1, 10, 1, 3), {at(2, 12, 1, 1), at(3, 1, 1, 0), at(4, 3, 1, 0)}, g);
  EXPECT_TRUE(slow.influenced);
  EXPECT_EQ(slow.trigger, VehicleId{2});
  EXPECT_EQ(slow.violation_tau, 1);
  // mean of {3, 1, 5, 3} = 3: the leader is the outlier
  const auto fast = judge(at(1, 10, 1, 3), {at(2, 12, 1, 1), at(3, 60, 1, 5), at(4, 40, 1, 3)}, g);
  EXPECT_FALSE(fast.influenced);
}

TEST(Influence, StrictInequality) {
  GridSpec g;
  // n at the lane mean never yields to a neighbour whose speed differs
  for (int vj = 0; vj <= 5; ++vj) {
    if (vj == 2) continue;
    const auto n = at(1, 10, 1, 2);
    // a third vehicle balances the mean at 2
    const auto other = at(3, 1, 1, 4 - vj);
    if (4 - vj < 0 || 4 - vj > 5) continue;
    EXPECT_FALSE(judge(n, {at(2, 11, 1, vj), other}, g).influenced) << "vj " << vj;
  }
}

TEST(Influence, ConditionOneIsNecessary) {
  GridSpec g;
  // far apart in every lane: no predicted violation
  EXPECT_FALSE(judge(at(1, 30, 2, 0), {at(2, 1, 1, 5), at(3, 60, 2, 1), at(4, 20, 3, 5)}, g).influenced);
}

TEST(Influence, PlatoonUniform) {
  GridSpec g;
  const std::vector<VehicleState> lane{at(1, 10, 2, 3), at(2, 11, 2, 3), at(3, 12, 2, 3), at(4, 15, 2, 1),
                                       at(5, 2, 2, 0), at(6, 4, 2, 0)};
  std::optional<bool> verdict;
  for (std::size_t k = 0; k < 3; ++k) {
    std::vector<VehicleState> nb;
    for (std::size_t q = 0; q < lane.size(); ++q)
      if (q != k) nb.push_back(lane[q]);
    const auto r = judge(lane[k], nb, g);
    if (!verdict) verdict = r.influenced;
    EXPECT_EQ(r.influenced, *verdict) << "member " << k;
    if (r.influenced) {
      EXPECT_EQ(r.trigger, VehicleId{4});
    }
  }
  EXPECT_TRUE(*verdict);
}

TEST(Influence, CooperatingNeighbourSkipsConditionTwo) {
  GridSpec g;
  // follower at the mean would not yield to an ordinary vehicle, but does to
  // one escorting an EMV
  auto behind = at(2, 8, 1, 4);
  const auto n = at(1, 10, 1, 2);
  const auto balance = at(3, 40, 1, 0);
  EXPECT_FALSE(judge(n, {behind, balance}, g).influenced);
  behind.cooperating = true;
  const auto r = judge(n, {behind, balance}, g);
  EXPECT_TRUE(r.influenced);
  EXPECT_FALSE(r.trigger_is_emv);
}
