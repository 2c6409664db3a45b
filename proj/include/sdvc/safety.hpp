#pragma once

// Operational safety rules on the cell grid: the same-lane minimum gap, the
// per-tick successor set, and collision detection between committed ticks.

#include <algorithm>
#include <set>
#include <utility>
#include <vector>

#include "sdvc/domain.hpp"

namespace sdvc {

/// Lane-major one-dimensional coordinate, d = i + I * (l - 1).
inline int one_d_coordinate(const VehicleState& s, const GridSpec& grid) { return s.i + grid.cells * (s.l - 1); }

/// Ordering constants of the mixed-integer formulation. The runtime predicates
/// below never use them; they only document the encoding.
inline int big_m_lateral(const GridSpec& grid) { return grid.cells; }
inline int big_m_ordering(const GridSpec& grid) { return 3 * grid.cells; }

struct SafetyVerdict {
  bool ok = true;
  std::pair<VehicleId, VehicleId> pair{};
  int required_gap = 0;
  int actual_gap = 0;
};

/// Same-lane vehicles need leader.i - follower.i >= follower.v - leader.v + 1.
/// Vehicles in different lanes never constrain each other.
inline SafetyVerdict safety_ok(const VehicleState& a, const VehicleState& b) {
  SafetyVerdict verdict;
  verdict.pair = {a.id, b.id};
  if (a.l != b.l) return verdict;
  if (a.i == b.i) {
    verdict.ok = false;
    verdict.required_gap = std::max(1, std::abs(a.v - b.v) + 1);
    verdict.actual_gap = 0;
    return verdict;
  }
  const VehicleState& follower = a.i < b.i ? a : b;
  const VehicleState& leader = a.i < b.i ? b : a;
  verdict.required_gap = follower.v - leader.v + 1;
  verdict.actual_gap = leader.i - follower.i;
  verdict.ok = verdict.actual_gap >= verdict.required_gap;
  return verdict;
}

/// All admissible next states. Position advances by the current speed; speed
/// and lane each move within their limits.
inline std::vector<VehicleState> successors(const VehicleState& s, const GridSpec& grid, const ScenarioConfig& cfg) {
  std::vector<VehicleState> out;
  const int v_lo = std::max(s.v - cfg.decel, 0);
  const int v_hi = std::min(s.v + cfg.accel, cfg.v_max);
  const int l_lo = std::max(s.l - 1, 1);
  const int l_hi = std::min(s.l + 1, grid.lanes);
  out.reserve(static_cast<std::size_t>((v_hi - v_lo + 1) * (l_hi - l_lo + 1)));
  for (int l = l_lo; l <= l_hi; ++l)
    for (int v = v_lo; v <= v_hi; ++v) out.push_back(with_pose(s, s.i + s.v, v, l));
  return out;
}

inline VehicleState maintain(const VehicleState& s) { return with_pose(s, s.i + s.v, s.v, s.l); }

inline bool is_successor(const VehicleState& cur, const VehicleState& next, const GridSpec& grid,
                         const ScenarioConfig& cfg) {
  return next.i == cur.i + cur.v && next.v >= std::max(cur.v - cfg.decel, 0) &&
         next.v <= std::min(cur.v + cfg.accel, cfg.v_max) && std::abs(next.l - cur.l) <= 1 && next.l >= 1 &&
         next.l <= grid.lanes;
}

/// A vehicle's transition over one tick.
struct Move {
  VehicleState from;
  VehicleState to;
};

/// Two vehicles that share a lane before and after the tick and whose
/// longitudinal order is strictly reversed have driven through each other.
/// Overtaking while changing lane is not a swap.
inline bool passes_through(const Move& a, const Move& b) {
  if (a.from.l != b.from.l || a.to.l != b.to.l) return false;
  const int before = a.from.i - b.from.i;
  const int after = a.to.i - b.to.i;
  return (before < 0 && after > 0) || (before > 0 && after < 0);
}

inline bool exits(const VehicleState& s, const GridSpec& grid) { return s.i > grid.cells; }

/// Conflict between two transitions: the end states break the gap rule, or
/// the paths cross within a lane. A vehicle leaving the segment conflicts
/// with nothing.
inline bool moves_conflict(const Move& a, const Move& b, const GridSpec& grid) {
  if (exits(a.to, grid) || exits(b.to, grid)) return false;
  return !safety_ok(a.to, b.to).ok || passes_through(a, b);
}

/// Ids of vehicles that share a cell in `next` or drove through each other
/// between `prev` and `next`. Vehicles missing from `next` have exited.
inline std::set<VehicleId> detect_collisions(const StateMap& prev, const StateMap& next) {
  std::set<VehicleId> hit;
  std::vector<const VehicleState*> order;
  order.reserve(next.size());
  int window = 1;
  for (const auto& [id, s] : next) {
    order.push_back(&s);
    window = std::max(window, s.v);
  }
  for (const auto& [id, s] : prev) window = std::max(window, s.v);
  std::sort(order.begin(), order.end(), [](const VehicleState* x, const VehicleState* y) {
    return x->i != y->i ? x->i < y->i : x->id < y->id;
  });
  for (std::size_t a = 0; a < order.size(); ++a) {
    for (std::size_t b = a + 1; b < order.size() && order[b]->i - order[a]->i <= window; ++b) {
      const VehicleState& x = *order[a];
      const VehicleState& y = *order[b];
      if (x.l != y.l) continue;
      bool collided = x.i == y.i;
      if (!collided) {
        auto px = prev.find(x.id);
        auto py = prev.find(y.id);
        if (px != prev.end() && py != prev.end()) collided = passes_through({px->second, x}, {py->second, y});
      }
      if (collided) {
        hit.insert(x.id);
        hit.insert(y.id);
      }
    }
  }
  return hit;
}

/// Checks a scenario's t = 0 state. An empty result means the scenario is valid.
inline std::vector<std::string> validate_scenario(const Scenario& sc) {
  std::vector<std::string> issues;
  const auto& g = sc.grid;
  const auto& c = sc.config;
  if (g.cells < 1) issues.push_back("grid: cell count must be positive");
  if (g.lanes < 1) issues.push_back("grid: lane count must be positive");
  if (!(g.cell_length_m > 0)) issues.push_back("grid: cell length must be positive");
  if (!(g.cell_width_m > 0)) issues.push_back("grid: cell width must be positive");
  if (c.horizon < 1) issues.push_back("config: horizon must be positive");
  if (c.v_max < 1) issues.push_back("config: v_max must be positive");
  if (c.accel < 1) issues.push_back("config: acceleration limit must be at least 1");
  if (c.decel < 1) issues.push_back("config: deceleration limit must be at least 1");
  if (!(c.comm_range_m > 0)) issues.push_back("config: communication range must be positive");
  if (c.platoon_gap < 1) issues.push_back("config: platoon gap must be positive");
  for (double w : {c.c1, c.c2, c.c3, c.w1, c.w2, c.w3})
    if (!(w >= 0)) issues.push_back("config: weights must be non-negative");
  if (c.ov_mean_speed_override && (*c.ov_mean_speed_override < 0 || *c.ov_mean_speed_override > c.v_max))
    issues.push_back("config: OV mean speed override out of range");

  std::set<VehicleId> ids;
  std::map<std::pair<int, int>, VehicleId> cells;
  for (const auto& v : sc.vehicles) {
    const std::string tag = "vehicle " + std::to_string(v.id);
    if (!ids.insert(v.id).second) issues.push_back(tag + ": duplicate id");
    if (v.i < 1 || v.i > g.cells) issues.push_back(tag + ": cell index out of range");
    if (v.l < 1 || v.l > g.lanes) issues.push_back(tag + ": lane out of range");
    if (v.v < 0 || v.v > c.v_max) issues.push_back(tag + ": speed out of range");
    if (v.is_emv() && v.cooperating) issues.push_back(tag + ": EMV cannot carry the cooperation flag");
    auto [it, fresh] = cells.emplace(std::make_pair(v.i, v.l), v.id);
    if (!fresh)
      issues.push_back("duplicate cell (" + std::to_string(v.i) + ", " + std::to_string(v.l) + ") for vehicles " +
                       std::to_string(it->second) + " and " + std::to_string(v.id));
  }
  for (std::size_t a = 0; a < sc.vehicles.size(); ++a) {
    for (std::size_t b = a + 1; b < sc.vehicles.size(); ++b) {
      const auto& x = sc.vehicles[a];
      const auto& y = sc.vehicles[b];
      if (x.l != y.l || x.i == y.i) continue;
      const auto verdict = safety_ok(x, y);
      if (!verdict.ok)
        issues.push_back("unsafe gap between vehicles " + std::to_string(x.id) + " and " + std::to_string(y.id) +
                         ": gap " + std::to_string(verdict.actual_gap) + " < required " +
                         std::to_string(verdict.required_gap));
    }
  }
  return issues;
}

}  // namespace sdvc
