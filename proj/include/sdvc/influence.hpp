#pragma once

// Decides whether an ordinary vehicle has to deviate from constant motion this
// tick: some neighbour's forecast must break the gap rule against the
// vehicle's platoon boundary, and the vehicle must be the one whose speed is
// further from its lane's mean.

#include <algorithm>
#include <optional>
#include <set>
#include <vector>

#include "sdvc/prediction.hpp"
#include "sdvc/safety.hpp"

namespace sdvc {

/// Maximal same-lane, same-speed chain through a vehicle.
struct Platoon {
  std::vector<VehicleState> members;  // increasing i
  int lane = 1;
  int speed = 0;

  const VehicleState& tail() const { return members.front(); }
  const VehicleState& head() const { return members.back(); }
  bool contains(VehicleId id) const {
    return std::any_of(members.begin(), members.end(), [id](const VehicleState& s) { return s.id == id; });
  }
};

inline Platoon find_platoon(const VehicleState& n, const std::vector<VehicleState>& neighbors,
                            const ScenarioConfig& cfg) {
  std::vector<VehicleState> lane;
  lane.push_back(n);
  for (const auto& s : neighbors)
    if (s.l == n.l) lane.push_back(s);
  std::sort(lane.begin(), lane.end(), [](const VehicleState& a, const VehicleState& b) {
    return a.i != b.i ? a.i < b.i : a.id < b.id;
  });
  const auto self = static_cast<std::size_t>(
      std::find_if(lane.begin(), lane.end(), [&](const VehicleState& s) { return s.id == n.id; }) - lane.begin());
  auto linked = [&](const VehicleState& back, const VehicleState& front) {
    return back.v == n.v && front.v == n.v && front.i - back.i <= cfg.platoon_gap;
  };
  std::size_t lo = self;
  while (lo > 0 && linked(lane[lo - 1], lane[lo])) --lo;
  std::size_t hi = self;
  while (hi + 1 < lane.size() && linked(lane[hi], lane[hi + 1])) ++hi;
  Platoon p;
  p.lane = n.l;
  p.speed = n.v;
  p.members.assign(lane.begin() + static_cast<std::ptrdiff_t>(lo), lane.begin() + static_cast<std::ptrdiff_t>(hi) + 1);
  return p;
}

struct InfluenceResult {
  bool influenced = false;
  std::optional<VehicleId> trigger;
  bool trigger_is_emv = false;
  std::optional<int> violation_tau;
};

/// Forecast of neighbour `j` as the observer of `view` would make it.
inline PredictedTrack forecast(const VehicleState& j, const LocalView& view, int horizon, const ScenarioConfig& cfg) {
  return j.is_emv() ? predict_emv(j, view.emv_target(j), horizon, cfg) : predict_const(j, horizon);
}

inline InfluenceResult is_influenced(const LocalView& view, const GridSpec& grid, const ScenarioConfig& cfg) {
  const VehicleState& n = view.observer;
  const Platoon platoon = find_platoon(n, view.neighbors, cfg);
  const Rational lane_mean = view.mean_speed(n.l);
  const Rational own_dev = abs(Rational(n.v) - lane_mean);

  for (const auto& j : view.neighbors) {
    if (platoon.contains(j.id)) continue;
    // Speed-deviation test does not depend on tau, so check it first. It
    // picks which of the two yields; a neighbour that cannot brake (EMV or
    // escorting OV) never can, so the test is skipped for it.
    const bool cannot_yield = j.is_emv() || j.cooperating;
    if (!cannot_yield && !(own_dev > abs(Rational(j.v) - lane_mean))) continue;
    const int horizon = prediction_horizon(j, n, cfg);
    const PredictedTrack other = forecast(j, view, horizon, cfg);
    const VehicleState& check = j.i < platoon.tail().i ? platoon.tail() : platoon.head();
    const PredictedTrack self = predict_const(check, horizon);
    for (int tau = 1; tau <= horizon; ++tau) {
      const auto k = static_cast<std::size_t>(tau - 1);
      const Move mine{tau == 1 ? check : self.states[k - 1], self.states[k]};
      const Move theirs{tau == 1 ? j : other.states[k - 1], other.states[k]};
      if (moves_conflict(mine, theirs, grid)) return {true, j.id, j.is_emv(), tau};
    }
  }
  return {};
}

}  // namespace sdvc
