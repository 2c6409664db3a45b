#include <gtest/gtest.h>

#include "sdvc/baseline_idm.hpp"
#include "sdvc/io.hpp"

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

}  // namespace

TEST(IdmAccel, FreeRoad) {
  ScenarioConfig cfg;
  IdmParams p;
  EXPECT_EQ(idm_accel(at(1, 10, 1, 3), std::nullopt, p, cfg), 0);
  auto stopped = at(1, 10, 1, 0);
  stopped.initial_speed = 5;
  EXPECT_EQ(idm_accel(stopped, std::nullopt, p, cfg), 1);
  auto fast = at(1, 10, 1, 5);
  fast.initial_speed = 3;
  EXPECT_EQ(idm_accel(fast, std::nullopt, p, cfg), -1);
}

TEST(IdmAccel, LeaderAtMinimumGap) {
  ScenarioConfig cfg;
  IdmParams p;
  auto f = at(1, 10, 1, 0);
  f.initial_speed = 5;
  // s0 = 1, gap 1, dv = 0
  EXPECT_LE(idm_accel(f, at(2, 11, 1, 0), p, cfg), 0);
}

TEST(IdmAccel, ZeroGapBrakes) {
  ScenarioConfig cfg;
  IdmParams p;
  EXPECT_EQ(idm_accel(at(1, 10, 1, 2), at(2, 10, 1, 2), p, cfg), -cfg.decel);
}

TEST(IdmAccel, LevelsStayInRange) {
  ScenarioConfig cfg;
  IdmParams p;
  for (int v = 0; v <= 5; ++v)
    for (int v0 = 0; v0 <= 5; ++v0)
      for (int vl = 0; vl <= 5; ++vl)
        for (int gap = 1; gap <= 12; ++gap) {
          auto f = at(1, 10, 1, v);
          f.initial_speed = v0;
          const int a = idm_accel(f, at(2, 10 + gap, 1, vl), p, cfg);
          EXPECT_GE(a, -1);
          EXPECT_LE(a, 1);
        }
}

TEST(Baseline, NoLaneChangesForOvs) {
  const auto sc = gen_scenario({107, 2, 3, 600, 1, 4});
  const auto r = run_baseline(sc);
  std::map<VehicleId, int> lane;
  for (const auto& row : r.trajectory) {
    if (row.cls != VehicleClass::Ov) continue;
    auto [it, fresh] = lane.emplace(row.id, row.l);
    if (!fresh) {
      EXPECT_EQ(it->second, row.l) << "vehicle " << row.id;
    }
  }
  EXPECT_EQ(r.metrics.ov_lane_changes, 0);
}

TEST(Baseline, EmptyRoadHoldsDesiredSpeed) {
  Scenario sc;
  sc.grid.cells = 200;
  sc.config.horizon = 20;
  sc.vehicles = {at(1, 1, 1, 3), at(2, 50, 2, 4)};
  const auto r = run_baseline(sc);
  for (const auto& row : r.trajectory) EXPECT_EQ(row.v, row.id == 1 ? 3 : 4);
}

TEST(Baseline, EmvLeavesTheBusyLane) {
  Scenario sc;
  sc.grid.cells = 60;
  sc.grid.lanes = 2;
  sc.config.horizon = 30;
  sc.vehicles = {at(0, 1, 1, 3, VehicleClass::Emv), at(1, 12, 1, 1), at(2, 30, 1, 1)};
  const auto r = run_baseline(sc);
  EXPECT_EQ(r.metrics.emv_lane_changes, 1);
  EXPECT_EQ(r.metrics.ov_lane_changes, 0);
  EXPECT_TRUE(r.metrics.collision_ids.empty());
}
