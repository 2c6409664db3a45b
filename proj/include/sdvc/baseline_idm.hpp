#pragma once

// Non-cooperative comparison controller: OVs stay in lane and follow the
// Intelligent Driver Model, rounded to integer acceleration levels. EMVs use
// the same policy as under the cooperative controller.

#include <cmath>
#include <limits>
#include <optional>

#include "sdvc/engine.hpp"

namespace sdvc {

struct IdmParams {
  double max_accel = 1;     // a
  double comfort_decel = 1; // b
  double headway = 0;       // T, ticks
  double exponent = 4;      // delta
  double threshold = 0.5;   // rounding threshold
};

/// Acceleration level for `follower` given its nearest same-lane `leader`.
/// Desired speed is the follower's initial speed.
inline int idm_accel(const VehicleState& follower, const std::optional<VehicleState>& leader, const IdmParams& p,
                     const ScenarioConfig& cfg) {
  const double v = follower.v;
  const double v0 = follower.initial_speed;
  double ratio;
  if (v0 > 0)
    ratio = std::pow(v / v0, p.exponent);
  else
    ratio = v == 0 ? 1.0 : std::numeric_limits<double>::infinity();
  double acc = p.max_accel * (1.0 - ratio);
  if (leader) {
    const int gap = leader->i - follower.i;
    if (gap <= 0) return -cfg.decel;
    const double s0 = std::max(1, follower.v - leader->v + 1);
    const double dv = v - leader->v;
    const double s_star = s0 + std::max(0.0, v * p.headway + v * dv / (2.0 * std::sqrt(p.max_accel * p.comfort_decel)));
    const double r = s_star / gap;
    acc -= p.max_accel * r * r;
  }
  if (std::isinf(acc)) return acc > 0 ? cfg.accel : -cfg.decel;
  const int level = static_cast<int>(std::floor(acc + (1.0 - p.threshold)));
  return std::clamp(level, -cfg.decel, cfg.accel);
}

/// Next states for every vehicle under the baseline controller.
inline std::pair<std::map<VehicleId, VehicleState>, TickLog> baseline_decide(const WorldState& world,
                                                                             const Scenario& scenario,
                                                                             const IdmParams& params) {
  const auto started = std::chrono::steady_clock::now();
  const auto& grid = scenario.grid;
  const auto& cfg = scenario.config;
  TickLog log;
  log.tick = world.tick;

  // Nearest leader per lane: walk each lane from the front.
  std::vector<std::vector<VehicleState>> lanes(static_cast<std::size_t>(grid.lanes));
  for (const auto& [id, s] : world.vehicles) lanes[static_cast<std::size_t>(s.l - 1)].push_back(s);
  std::map<VehicleId, std::optional<VehicleState>> leader;
  for (auto& lane : lanes) {
    std::sort(lane.begin(), lane.end(), [](const VehicleState& a, const VehicleState& b) { return a.i < b.i; });
    for (std::size_t k = 0; k < lane.size(); ++k)
      leader[lane[k].id] = k + 1 < lane.size() ? std::optional<VehicleState>(lane[k + 1]) : std::nullopt;
  }

  const SpatialIndex index(world.vehicles);
  std::map<VehicleId, VehicleState> next;
  for (const auto& [id, s] : world.vehicles) {
    log.messages.push_back(protocol::state_announce(world.tick, s));
    if (s.is_emv()) {
      const LocalView view = build_view(s, comm_set(s, index, grid, cfg), grid, cfg);
      next.emplace(id, emv_policy(s, view, cfg));
      continue;
    }
    const int a = idm_accel(s, leader.at(id), params, cfg);
    next.emplace(id, with_pose(s, s.i + s.v, std::clamp(s.v + a, 0, cfg.v_max), s.l));
  }
  log.decision_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return {std::move(next), std::move(log)};
}

inline std::pair<WorldState, TickLog> baseline_step(const WorldState& world, const Scenario& scenario,
                                                    RunMetrics& metrics, const IdmParams& params = {}) {
  auto [next_states, log] = baseline_decide(world, scenario, params);
  WorldState next = commit(world, next_states, scenario, metrics);
  return {std::move(next), std::move(log)};
}

inline RunResult run_baseline(const Scenario& scenario, const IdmParams& params = {}) {
  return simulate(scenario, [&](const WorldState& w) { return baseline_decide(w, scenario, params); });
}

}  // namespace sdvc
