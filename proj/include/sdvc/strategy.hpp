#pragma once

// Scores an ordinary vehicle's admissible next states and picks its candidate.
// Score = w1 * (own behaviour change) + w2 * (speed gap to the target lane's
// mean) + w3 * (penalty for an unsafe or too slow state).

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "sdvc/influence.hpp"
#include "sdvc/prediction.hpp"
#include "sdvc/random.hpp"
#include "sdvc/safety.hpp"

namespace sdvc {

/// Read-only run parameters shared by every decision of a tick.
struct DecisionContext {
  const GridSpec& grid;
  const ScenarioConfig& config;
  Rational ov_mean_speed;  // mean OV speed at t = 0
};

struct StrategyTerms {
  double f1 = 0;
  Rational f2{0};
  int f3 = 0;
  bool unsafe = false;
  bool too_slow = false;
  double value = 0;
};

struct CandidateDecision {
  VehicleId owner = 0;
  VehicleState state;
  double value = 0;
  int feasible_count = 0;
  bool influenced = false;
};

/// Equality up to floating-point noise, relative to the magnitudes involved.
inline bool same_value(double a, double b) {
  return std::abs(a - b) <= 1e-9 * std::max({1.0, std::abs(a), std::abs(b)});
}

/// `obstacles` are the transitions the candidate must not conflict with.
inline StrategyTerms strategy_terms(const VehicleState& cur, const VehicleState& cand, const LocalView& view,
                                    std::span<const Move> obstacles, const DecisionContext& ctx) {
  if (!is_successor(cur, cand, ctx.grid, ctx.config))
    throw std::invalid_argument("candidate is not an admissible successor of the current state");
  const auto& cfg = ctx.config;
  StrategyTerms t;
  t.f1 = cfg.c1 * std::abs(cand.v - cur.v) + cfg.c3 * std::abs(cand.l - cur.l);
  t.f2 = abs(Rational(cand.v) - view.mean_speed(cand.l));
  const Move mine{cur, cand};
  t.unsafe = std::any_of(obstacles.begin(), obstacles.end(),
                         [&](const Move& other) { return moves_conflict(mine, other, ctx.grid); });
  t.too_slow = Rational(cand.v) < std::min(Rational(cur.initial_speed), ctx.ov_mean_speed);
  t.f3 = (t.unsafe || t.too_slow) ? 1 : 0;
  t.value = cfg.w1 * t.f1 + cfg.w2 * to_double(t.f2) + cfg.w3 * t.f3;
  return t;
}

/// One-step forecasts of every neighbour outside the platoon; platoon members
/// decide together with the observer and are left to conflict resolution.
inline std::vector<Move> predicted_obstacles(const LocalView& view, const Platoon& platoon,
                                             const ScenarioConfig& cfg) {
  std::vector<Move> out;
  out.reserve(view.neighbors.size());
  for (const auto& j : view.neighbors) {
    if (platoon.contains(j.id)) continue;
    out.push_back({j, predict_next(j, view, cfg)});
  }
  return out;
}

inline StrategyTerms strategy_value(const VehicleState& cur, const VehicleState& cand, const LocalView& view,
                                    const Platoon& platoon, const DecisionContext& ctx) {
  const auto obstacles = predicted_obstacles(view, platoon, ctx.config);
  return strategy_terms(cur, cand, view, obstacles, ctx);
}

/// Number of successors free of both penalty causes.
inline int feasible_count(const VehicleState& cur, const LocalView& view, std::span<const Move> obstacles,
                          const DecisionContext& ctx) {
  int count = 0;
  for (const auto& cand : successors(cur, ctx.grid, ctx.config))
    if (strategy_terms(cur, cand, view, obstacles, ctx).f3 == 0) ++count;
  return count;
}

/// Minimum-score successor. Ties prefer keeping the lane; whatever tie remains
/// is broken uniformly with `rng`.
inline CandidateDecision select_candidate(const VehicleState& cur, const LocalView& view,
                                          std::span<const Move> obstacles, const DecisionContext& ctx,
                                          RandomStream& rng) {
  const auto options = successors(cur, ctx.grid, ctx.config);
  std::vector<double> values;
  values.reserve(options.size());
  int feasible = 0;
  double best = 0;
  for (std::size_t k = 0; k < options.size(); ++k) {
    const auto t = strategy_terms(cur, options[k], view, obstacles, ctx);
    if (t.f3 == 0) ++feasible;
    values.push_back(t.value);
    if (k == 0 || t.value < best) best = t.value;
  }
  std::vector<std::size_t> ties;
  for (std::size_t k = 0; k < options.size(); ++k)
    if (same_value(values[k], best)) ties.push_back(k);
  const auto keep = std::find_if(ties.begin(), ties.end(), [&](std::size_t k) { return options[k].l == cur.l; });
  std::size_t pick;
  const auto lane_keepers =
      std::count_if(ties.begin(), ties.end(), [&](std::size_t k) { return options[k].l == cur.l; });
  if (lane_keepers == 1) {
    pick = *keep;
  } else {
    std::vector<std::size_t> pool;
    for (auto k : ties)
      if (lane_keepers == 0 || options[k].l == cur.l) pool.push_back(k);
    pick = pool[rng.below(pool.size())];
  }
  return {cur.id, options[pick], values[pick], feasible, true};
}

inline CandidateDecision select_candidate(const VehicleState& cur, const LocalView& view, const Platoon& platoon,
                                          const DecisionContext& ctx, RandomStream& rng) {
  const auto obstacles = predicted_obstacles(view, platoon, ctx.config);
  return select_candidate(cur, view, obstacles, ctx, rng);
}

}  // namespace sdvc
