#pragma once

// What a vehicle knows about its surroundings: the communication set, lane
// densities and mean speeds inside it, and short motion forecasts of
// neighbours.

#include <algorithm>
#include <cstdlib>
#include <vector>

#include "sdvc/domain.hpp"

namespace sdvc {

inline int comm_range_cells(const GridSpec& grid, const ScenarioConfig& cfg) {
  return static_cast<int>(std::floor(cfg.comm_range_m / grid.cell_length_m));
}

/// Active vehicles sorted by longitudinal position, for range queries.
class SpatialIndex {
 public:
  explicit SpatialIndex(const StateMap& world) {
    sorted_.reserve(world.size());
    for (const auto& [id, s] : world) sorted_.push_back(s);
    std::sort(sorted_.begin(), sorted_.end(), [](const VehicleState& a, const VehicleState& b) {
      return a.i != b.i ? a.i < b.i : a.id < b.id;
    });
  }

  /// Vehicles with lo <= i <= hi, in (i, id) order.
  template <typename Fn>
  void for_each_in(int lo, int hi, Fn&& fn) const {
    auto it = std::lower_bound(sorted_.begin(), sorted_.end(), lo,
                               [](const VehicleState& s, int key) { return s.i < key; });
    for (; it != sorted_.end() && it->i <= hi; ++it) fn(*it);
  }

 private:
  std::vector<VehicleState> sorted_;
};

/// Neighbours of `n` within longitudinal communication range, any lane,
/// sorted by id.
inline std::vector<VehicleState> comm_set(const VehicleState& n, const SpatialIndex& index, const GridSpec& grid,
                                          const ScenarioConfig& cfg) {
  const int r = comm_range_cells(grid, cfg);
  std::vector<VehicleState> out;
  index.for_each_in(n.i - r, n.i + r, [&](const VehicleState& s) {
    if (s.id != n.id) out.push_back(s);
  });
  std::sort(out.begin(), out.end(), [](const VehicleState& a, const VehicleState& b) { return a.id < b.id; });
  return out;
}

inline std::vector<VehicleState> comm_set(VehicleId n, const StateMap& world, const GridSpec& grid,
                                          const ScenarioConfig& cfg) {
  const auto& self = world.at(n);
  const int r = comm_range_cells(grid, cfg);
  std::vector<VehicleState> out;
  for (const auto& [id, s] : world)
    if (id != n && std::abs(s.i - self.i) <= r) out.push_back(s);
  return out;
}

/// Forecast horizon used by `n` when checking neighbour `j`. Vehicles that
/// will not brake (EMVs and OVs escorting one) need the longer bound.
inline int prediction_horizon(const VehicleState& j, const VehicleState& n, const ScenarioConfig& cfg) {
  auto ceil_div = [](int a, int b) { return (a + b - 1) / b; };
  int f;
  if (j.is_emv() || j.cooperating)
    f = ceil_div(std::max(cfg.v_max - n.v, 0), cfg.accel);
  else
    f = ceil_div(std::abs(j.v - n.v), cfg.accel + cfg.decel);
  return std::max(1, f);
}

/// Vehicles in `lane` among the neighbours, plus the observer when given.
inline int lane_density(int lane, const std::vector<VehicleState>& neighbors, const VehicleState* observer = nullptr) {
  int k = observer != nullptr && observer->l == lane ? 1 : 0;
  for (const auto& s : neighbors)
    if (s.l == lane) ++k;
  return k;
}

/// Least dense lane; ties go to the lane nearest `current_lane`, then to the
/// lower index. `densities[l - 1]` is the count for lane l.
inline int emv_target_lane(const std::vector<int>& densities, int current_lane) {
  int best = 1;
  for (int l = 2; l <= static_cast<int>(densities.size()); ++l) {
    const int k = densities[l - 1];
    const int kb = densities[best - 1];
    if (k < kb || (k == kb && std::abs(l - current_lane) < std::abs(best - current_lane))) best = l;
  }
  return best;
}

/// Target lane of EMV `m` given densities that count `m` itself: the EMV
/// is not traffic in its own way, so its cell is left out.
inline int emv_target_lane_for(const VehicleState& m, std::vector<int> densities) {
  auto& own = densities[static_cast<std::size_t>(m.l - 1)];
  own = std::max(own - 1, 0);
  return emv_target_lane(densities, m.l);
}

/// Forecast states for tau = 1..F, subject at index tau - 1.
struct PredictedTrack {
  VehicleId subject = 0;
  std::vector<VehicleState> states;
};

/// EMV forecast: full acceleration toward v_max, one lane step per tick toward
/// the target lane.
inline PredictedTrack predict_emv(const VehicleState& m, int target_lane, int horizon, const ScenarioConfig& cfg) {
  PredictedTrack track{m.id, {}};
  track.states.reserve(static_cast<std::size_t>(horizon));
  VehicleState s = m;
  for (int tau = 0; tau < horizon; ++tau) {
    const int step = std::clamp(target_lane - s.l, -1, 1);
    s = with_pose(s, s.i + s.v, std::min(s.v + cfg.accel, cfg.v_max), s.l + step);
    track.states.push_back(s);
  }
  return track;
}

/// Constant-motion forecast: same lane, same speed.
inline PredictedTrack predict_const(const VehicleState& x, int horizon) {
  PredictedTrack track{x.id, {}};
  track.states.reserve(static_cast<std::size_t>(horizon));
  for (int tau = 1; tau <= horizon; ++tau) track.states.push_back(with_pose(x, x.i + tau * x.v, x.v, x.l));
  return track;
}

/// An observer's snapshot of its communication set.
struct LocalView {
  VehicleState observer;
  std::vector<VehicleState> neighbors;   // sorted by id, observer excluded
  std::vector<int> lane_density;         // index lane - 1, observer counted
  std::vector<Rational> lane_mean_speed; // index lane - 1

  int lanes() const { return static_cast<int>(lane_density.size()); }
  const Rational& mean_speed(int lane) const { return lane_mean_speed[static_cast<std::size_t>(lane - 1)]; }

  /// Target lane this observer attributes to the EMV `m`.
  int emv_target(const VehicleState& m) const { return emv_target_lane_for(m, lane_density); }
};

/// Lane mean speed as seen from the observer: v_max when an EMV behind the
/// observer heads for this lane, else the mean speed of the lane's vehicles
/// (observer included), else the observer's own speed for an empty lane.
inline Rational lane_mean_speed(int lane, const VehicleState& observer, const std::vector<VehicleState>& neighbors,
                                const std::vector<int>& densities, const ScenarioConfig& cfg) {
  for (const auto& s : neighbors)
    if (s.is_emv() && s.i < observer.i && emv_target_lane_for(s, densities) == lane) return Rational(cfg.v_max);
  std::int64_t sum = 0;
  std::int64_t count = 0;
  if (observer.l == lane) {
    sum += observer.v;
    ++count;
  }
  for (const auto& s : neighbors) {
    if (s.l != lane) continue;
    sum += s.v;
    ++count;
  }
  if (count == 0) return Rational(observer.v);
  return Rational(sum, count);
}

inline LocalView build_view(const VehicleState& observer, std::vector<VehicleState> neighbors, const GridSpec& grid,
                            const ScenarioConfig& cfg) {
  LocalView view;
  view.observer = observer;
  view.neighbors = std::move(neighbors);
  view.lane_density.resize(static_cast<std::size_t>(grid.lanes));
  for (int l = 1; l <= grid.lanes; ++l)
    view.lane_density[static_cast<std::size_t>(l - 1)] = lane_density(l, view.neighbors, &view.observer);
  view.lane_mean_speed.reserve(static_cast<std::size_t>(grid.lanes));
  for (int l = 1; l <= grid.lanes; ++l)
    view.lane_mean_speed.push_back(lane_mean_speed(l, view.observer, view.neighbors, view.lane_density, cfg));
  return view;
}

/// One-step forecast of neighbour `j` from the view's observer.
inline VehicleState predict_next(const VehicleState& j, const LocalView& view, const ScenarioConfig& cfg) {
  if (j.is_emv()) return predict_emv(j, view.emv_target(j), 1, cfg).states.front();
  return predict_const(j, 1).states.front();
}

}  // namespace sdvc
