#pragma once

// Synchronous tick loop. Each tick: every vehicle announces its state; EMVs
// follow their fixed policy and OVs judge influence and pick candidates;
// candidates are exchanged; conflicting candidates are grouped and resolved;
// all vehicles then commit at once.

#include <chrono>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "sdvc/coalition.hpp"
#include "sdvc/influence.hpp"
#include "sdvc/prediction.hpp"
#include "sdvc/safety.hpp"
#include "sdvc/strategy.hpp"

namespace sdvc {

class ValidationError : public Error {
 public:
  explicit ValidationError(std::vector<std::string> issues)
      : Error("invalid scenario: " + (issues.empty() ? std::string() : issues.front())), issues_(std::move(issues)) {}
  const std::vector<std::string>& issues() const { return issues_; }

 private:
  std::vector<std::string> issues_;
};

struct EngineOptions {
  bool strict_safety_fallback = true;
  int max_resolution_rounds = 4;
};

struct WorldState {
  int tick = 0;
  StateMap vehicles;
  std::map<VehicleId, int> exited;  // id -> tick at which it left
};

/// EMV driving rule: full acceleration to v_max, one lane step per tick
/// toward the least dense lane of its own view.
inline VehicleState emv_policy(const VehicleState& m, const LocalView& view, const ScenarioConfig& cfg) {
  const int target = view.emv_target(m);
  return with_pose(m, m.i + m.v, std::min(m.v + cfg.accel, cfg.v_max), m.l + std::clamp(target - m.l, -1, 1));
}

/// Per-vehicle annotations of one tick's decisions.
struct DecisionNotes {
  bool influenced = false;
  std::optional<VehicleId> coalition;  // central vehicle of the coalition joined
};

struct TickLog {
  int tick = 0;
  std::vector<std::string> messages;
  std::map<VehicleId, DecisionNotes> notes;
  int coalitions = 0;
  int unresolved_conflicts = 0;
  double decision_seconds = 0;
};

struct RunMetrics {
  long f = 0;  // summed EMV longitudinal progress, cells
  double f_prime = 0;
  long ov_speed_changes = 0;
  long ov_lane_changes = 0;
  long emv_lane_changes = 0;
  std::set<VehicleId> collision_ids;
  double collision_rate = 0;
  std::size_t total_vehicles = 0;
  int ticks = 0;
  long unresolved_conflicts = 0;
  std::map<VehicleId, int> emv_exit_tick;
  std::vector<VehicleId> terminal_speed_violations;
  std::vector<double> decision_time_per_tick;  // seconds, not deterministic
};

struct TrajectoryRow {
  int tick = 0;
  VehicleId id = 0;
  VehicleClass cls = VehicleClass::Ov;
  int i = 0;
  int l = 0;
  int v = 0;
  bool influenced = false;
  std::optional<VehicleId> coalition;

  friend bool operator==(const TrajectoryRow&, const TrajectoryRow&) = default;
};

using TrajectoryTable = std::vector<TrajectoryRow>;

struct RunResult {
  RunMetrics metrics;
  TrajectoryTable trajectory;
  std::vector<std::string> protocol;
};

namespace protocol {

inline std::string state_announce(int tick, const VehicleState& s) {
  return fmt::format("StateAnnounce,{},{},{},{},{},{},{}", tick, s.id, s.i, s.l, s.v, to_string(s.cls),
                     s.cooperating ? 1 : 0);
}

inline std::string candidate(int tick, const VehicleState& next, int feasible) {
  return fmt::format("Candidate,{},{},{},{},{},{}", tick, next.id, next.i, next.l, next.v, feasible);
}

inline std::string coalition_assign(int tick, VehicleId central, const VehicleState& next) {
  return fmt::format("CoalitionAssign,{},{},{},{},{},{}", tick, central, next.id, next.i, next.l, next.v);
}

}  // namespace protocol

namespace detail {

/// Pairs of proposals that conflict, found with a positional sweep.
inline std::vector<std::pair<VehicleId, VehicleId>> conflicting_pairs(const MoveMap& proposals, const GridSpec& grid,
                                                                       const ScenarioConfig& cfg) {
  std::vector<const Move*> order;
  order.reserve(proposals.size());
  for (const auto& [id, m] : proposals) order.push_back(&m);
  std::sort(order.begin(), order.end(), [](const Move* a, const Move* b) {
    return a->from.i != b->from.i ? a->from.i < b->from.i : a->from.id < b->from.id;
  });
  const int reach = 2 * cfg.v_max + 2;
  std::vector<std::pair<VehicleId, VehicleId>> out;
  for (std::size_t a = 0; a < order.size(); ++a)
    for (std::size_t b = a + 1; b < order.size() && order[b]->from.i - order[a]->from.i <= reach; ++b)
      if (moves_conflict(*order[a], *order[b], grid))
        out.emplace_back(std::min(order[a]->from.id, order[b]->from.id), std::max(order[a]->from.id, order[b]->from.id));
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace detail

/// Applies the chosen next states to the world, updating metrics. Vehicles
/// moving past the last cell leave the segment.
inline WorldState commit(const WorldState& world, const std::map<VehicleId, VehicleState>& next_states,
                         const Scenario& scenario, RunMetrics& metrics) {
  const auto& cfg = scenario.config;
  WorldState next;
  next.tick = world.tick + 1;
  next.exited = world.exited;
  for (const auto& [id, cur] : world.vehicles) {
    const VehicleState& to = next_states.at(id);
    if (cur.is_emv()) metrics.f += to.i - cur.i;
    if (exits(to, scenario.grid)) {
      next.exited[id] = next.tick;
      if (cur.is_emv()) metrics.emv_exit_tick[id] = next.tick;
      continue;
    }
    if (cur.is_ov()) {
      metrics.ov_speed_changes += std::abs(to.v - cur.v);
      metrics.ov_lane_changes += std::abs(to.l - cur.l);
    } else {
      metrics.emv_lane_changes += std::abs(to.l - cur.l);
    }
    next.vehicles.emplace(id, to);
  }
  const auto hit = detect_collisions(world.vehicles, next.vehicles);
  metrics.collision_ids.insert(hit.begin(), hit.end());
  metrics.f_prime = cfg.c1 * static_cast<double>(metrics.ov_speed_changes) +
                    cfg.c2 * static_cast<double>(metrics.emv_lane_changes) +
                    cfg.c3 * static_cast<double>(metrics.ov_lane_changes);
  return next;
}

/// Decides every vehicle's next state for one tick.
inline std::pair<std::map<VehicleId, VehicleState>, TickLog> decide(const WorldState& world, const Scenario& scenario,
                                                                    const Rational& ov_mean_speed,
                                                                    const EngineOptions& options) {
  const auto started = std::chrono::steady_clock::now();
  const auto& grid = scenario.grid;
  const auto& cfg = scenario.config;
  const DecisionContext ctx{grid, cfg, ov_mean_speed};
  TickLog log;
  log.tick = world.tick;

  // Phase 1: state exchange and local decisions.
  const SpatialIndex index(world.vehicles);
  std::map<VehicleId, LocalView> views;
  for (const auto& [id, s] : world.vehicles) views.emplace(id, build_view(s, comm_set(s, index, grid, cfg), grid, cfg));
  for (const auto& [id, s] : world.vehicles) log.messages.push_back(protocol::state_announce(world.tick, s));

  MoveMap proposals;
  std::map<VehicleId, int> feasible;
  std::map<VehicleId, bool> emv_triggered;
  for (const auto& [id, s] : world.vehicles) {
    const LocalView& view = views.at(id);
    auto& note = log.notes[id];
    if (s.is_emv()) {
      proposals[id] = {s, emv_policy(s, view, cfg)};
      feasible[id] = 0;
      continue;
    }
    const Platoon platoon = find_platoon(s, view.neighbors, cfg);
    const auto obstacles = predicted_obstacles(view, platoon, cfg);
    const InfluenceResult influence = is_influenced(view, grid, cfg);
    note.influenced = influence.influenced;
    emv_triggered[id] = influence.influenced && influence.trigger_is_emv;
    if (influence.influenced) {
      RandomStream rng(cfg.seed, static_cast<std::uint64_t>(world.tick), id, StreamPurpose::CandidateTie);
      const auto decision = select_candidate(s, view, obstacles, ctx, rng);
      proposals[id] = {s, decision.state};
      feasible[id] = decision.feasible_count;
    } else {
      proposals[id] = {s, maintain(s)};
      feasible[id] = feasible_count(s, view, obstacles, ctx);
    }
  }

  // Phase 2: candidate exchange.
  for (const auto& [id, m] : proposals) log.messages.push_back(protocol::candidate(world.tick, m.to, feasible.at(id)));

  // Phase 3: coalitions. Coalitions of one round are resolved against the
  // same snapshot; remaining conflicts seed the next round.
  std::set<VehicleId> with_emv;
  for (int round = 0; round < options.max_resolution_rounds; ++round) {
    const auto pairs = detail::conflicting_pairs(proposals, grid, cfg);
    if (pairs.empty()) break;
    std::set<VehicleId> conflicted;
    for (const auto& [a, b] : pairs) {
      conflicted.insert(a);
      conflicted.insert(b);
    }
    std::set<VehicleId> claimed;
    std::vector<Coalition> coalitions;
    for (VehicleId id : conflicted) {
      if (!world.vehicles.at(id).is_ov() || claimed.count(id) != 0U) continue;
      Coalition g = build_coalition(id, proposals, views.at(id), grid);
      std::erase_if(g.members, [&](VehicleId m) { return m != id && claimed.count(m) != 0U; });
      if (g.members.size() < 2) continue;
      for (VehicleId m : g.members)
        if (world.vehicles.at(m).is_ov()) claimed.insert(m);
      coalitions.push_back(std::move(g));
    }
    if (coalitions.empty()) break;
    const MoveMap snapshot = proposals;
    const ResolutionInputs inputs{world.vehicles, views, snapshot, ctx, world.tick, options.strict_safety_fallback};
    for (auto& g : coalitions) {
      const Resolution res = resolve(std::move(g), inputs);
      ++log.coalitions;
      bool has_emv = false;
      for (VehicleId m : res.coalition.members) has_emv = has_emv || world.vehicles.at(m).is_emv();
      for (const auto& [m, state] : res.assignment) {
        if (world.vehicles.at(m).is_emv()) continue;
        proposals[m].to = state;
        auto& note = log.notes[m];
        if (!note.coalition) note.coalition = res.coalition.central;
        if (has_emv) with_emv.insert(m);
        log.messages.push_back(protocol::coalition_assign(world.tick, res.coalition.central, state));
      }
    }
  }
  log.unresolved_conflicts = static_cast<int>(detail::conflicting_pairs(proposals, grid, cfg).size());

  std::map<VehicleId, VehicleState> next;
  for (const auto& [id, m] : proposals) {
    VehicleState to = m.to;
    if (to.is_ov()) {
      bool emv_near = false;
      for (const auto& j : views.at(id).neighbors) emv_near = emv_near || j.is_emv();
      to.cooperating = emv_triggered[id] || with_emv.count(id) != 0U || (m.from.cooperating && emv_near);
    }
    next.emplace(id, to);
  }
  log.decision_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return {std::move(next), std::move(log)};
}

/// One synchronous tick of the cooperative controller.
inline std::pair<WorldState, TickLog> step(const WorldState& world, const Scenario& scenario,
                                           const Rational& ov_mean_speed, RunMetrics& metrics,
                                           const EngineOptions& options = {}) {
  auto [next_states, log] = decide(world, scenario, ov_mean_speed, options);
  WorldState next = commit(world, next_states, scenario, metrics);
  return {std::move(next), std::move(log)};
}

inline WorldState initial_world(const Scenario& scenario) {
  WorldState w;
  for (auto s : scenario.vehicles) {
    s.initial_speed = s.v;
    if (s.is_emv()) s.cooperating = false;
    w.vehicles.emplace(s.id, s);
  }
  return w;
}

/// Runs until the horizon or, when configured, until every EMV has left.
/// `decide_tick(world)` returns the next states plus that tick's log.
template <typename DecideFn>
RunResult simulate(const Scenario& scenario, DecideFn&& decide_tick) {
  if (auto issues = validate_scenario(scenario); !issues.empty()) throw ValidationError(std::move(issues));
  RunResult result;
  auto& metrics = result.metrics;
  metrics.total_vehicles = scenario.vehicles.size();
  WorldState world = initial_world(scenario);
  const bool has_emv = std::any_of(scenario.vehicles.begin(), scenario.vehicles.end(),
                                   [](const VehicleState& s) { return s.is_emv(); });
  auto emit_rows = [&](const WorldState& w, const TickLog* log) {
    for (const auto& [id, s] : w.vehicles) {
      TrajectoryRow row{w.tick, id, s.cls, s.i, s.l, s.v, false, std::nullopt};
      if (log != nullptr) {
        if (auto it = log->notes.find(id); it != log->notes.end()) {
          row.influenced = it->second.influenced;
          row.coalition = it->second.coalition;
        }
      }
      result.trajectory.push_back(row);
    }
  };
  for (int t = 0; t < scenario.config.horizon; ++t) {
    if (has_emv && scenario.config.stop_when_emvs_exit &&
        std::none_of(world.vehicles.begin(), world.vehicles.end(), [](const auto& kv) { return kv.second.is_emv(); }))
      break;
    auto [next_states, log] = decide_tick(world);
    emit_rows(world, &log);
    result.protocol.insert(result.protocol.end(), std::make_move_iterator(log.messages.begin()),
                           std::make_move_iterator(log.messages.end()));
    metrics.unresolved_conflicts += log.unresolved_conflicts;
    metrics.decision_time_per_tick.push_back(log.decision_seconds);
    world = commit(world, next_states, scenario, metrics);
    ++metrics.ticks;
  }
  emit_rows(world, nullptr);

  const Rational floor_ref = ov_speed_floor_reference(scenario);
  for (const auto& [id, s] : world.vehicles)
    if (s.is_ov() && Rational(s.v) < std::min(Rational(s.initial_speed), floor_ref))
      metrics.terminal_speed_violations.push_back(id);
  metrics.collision_rate = metrics.total_vehicles == 0
                               ? 0.0
                               : static_cast<double>(metrics.collision_ids.size()) /
                                     static_cast<double>(metrics.total_vehicles);
  return result;
}

inline RunResult run(const Scenario& scenario, const EngineOptions& options = {}) {
  const Rational ov_mean = ov_speed_floor_reference(scenario);
  return simulate(scenario, [&](const WorldState& w) { return decide(w, scenario, ov_mean, options); });
}

/// Number of ticks a run will take: EMV kinematics do not depend on other
/// vehicles, so the exit tick is known up front.
inline int planned_ticks(const Scenario& scenario) {
  const auto& cfg = scenario.config;
  bool any = false;
  int last_exit = 0;
  for (const auto& s : scenario.vehicles) {
    if (!s.is_emv()) continue;
    any = true;
    int i = s.i;
    int v = s.v;
    int t = 0;
    while (i <= scenario.grid.cells && t < cfg.horizon) {
      i += v;
      v = std::min(v + cfg.accel, cfg.v_max);
      ++t;
    }
    last_exit = std::max(last_exit, t);
  }
  if (!any || !cfg.stop_when_emvs_exit) return cfg.horizon;
  return std::min(last_exit, cfg.horizon);
}

}  // namespace sdvc
