#pragma once

// Ground truth for tiny instances: exhaustive search for the cheapest joint
// plan, and numeric checks of the coordination bound.

#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "sdvc/engine.hpp"

namespace sdvc {

enum class OracleStatus { Optimal, Infeasible, BudgetExceeded };

inline const char* to_string(OracleStatus s) {
  switch (s) {
    case OracleStatus::Optimal: return "optimal";
    case OracleStatus::Infeasible: return "infeasible";
    case OracleStatus::BudgetExceeded: return "budget-exceeded";
  }
  return "?";
}

struct OracleResult {
  OracleStatus status = OracleStatus::Infeasible;
  double optimal_f_prime = std::numeric_limits<double>::infinity();
  std::vector<StateMap> trajectory;  // world at t = 0 .. end
  std::uint64_t node_count = 0;
};

namespace detail {

class OracleSearch {
 public:
  OracleSearch(const Scenario& sc, std::uint64_t budget)
      : sc_(sc), cfg_(sc.config), grid_(sc.grid), budget_(budget), floor_(ov_speed_floor_reference(sc)),
        depth_(planned_ticks(sc)) {}

  OracleResult solve() {
    StateMap start = initial_world(sc_).vehicles;
    path_.push_back(start);
    descend(start, 0, 0.0);
    OracleResult r;
    r.node_count = nodes_;
    r.trajectory = best_path_;
    r.optimal_f_prime = best_;
    if (aborted_)
      r.status = OracleStatus::BudgetExceeded;
    else
      r.status = best_path_.empty() ? OracleStatus::Infeasible : OracleStatus::Optimal;
    return r;
  }

 private:
  int required_speed(const VehicleState& s) const {
    const Rational need = std::min(Rational(s.initial_speed), floor_);
    return static_cast<int>((need.numerator() + need.denominator() - 1) / need.denominator());
  }

  bool terminal_ok(const StateMap& w) const {
    for (const auto& [id, s] : w)
      if (s.is_ov() && Rational(s.v) < std::min(Rational(s.initial_speed), floor_)) return false;
    return true;
  }

  /// Cost still unavoidable from `w` with `left` ticks to go; +inf if the
  /// terminal speed rule can no longer be met.
  double lower_bound(const StateMap& w, int left) const {
    double lb = 0;
    for (const auto& [id, s] : w) {
      if (!s.is_ov()) continue;
      if (s.i + left * cfg_.v_max > grid_.cells) continue;  // might still exit
      const int deficit = required_speed(s) - s.v;
      if (deficit <= 0) continue;
      if (deficit > left * cfg_.accel) return std::numeric_limits<double>::infinity();
      lb += cfg_.c1 * deficit;
    }
    return lb;
  }

  static std::vector<int> key(int tick, const StateMap& w) {
    std::vector<int> k{tick};
    for (const auto& [id, s] : w) {
      k.push_back(static_cast<int>(id));
      k.push_back(s.i);
      k.push_back(s.l);
      k.push_back(s.v);
    }
    return k;
  }

  double move_cost(const VehicleState& from, const VehicleState& to) const {
    if (exits(to, grid_)) return 0;
    if (from.is_emv()) return cfg_.c2 * std::abs(to.l - from.l);
    return cfg_.c1 * std::abs(to.v - from.v) + cfg_.c3 * std::abs(to.l - from.l);
  }

  void descend(const StateMap& w, int tick, double cost) {
    if (aborted_) return;
    if (++nodes_ > budget_) {
      aborted_ = true;
      return;
    }
    if (tick == depth_ || w.empty()) {
      if (terminal_ok(w) && cost < best_) {
        best_ = cost;
        best_path_ = path_;
      }
      return;
    }
    if (cost + lower_bound(w, depth_ - tick) >= best_) return;
    auto [it, fresh] = seen_.try_emplace(key(tick, w), cost);
    if (!fresh) {
      if (it->second <= cost) return;
      it->second = cost;
    }

    // EMV moves do not depend on OV choices within the tick.
    std::vector<Move> fixed;
    double fixed_cost = 0;
    const SpatialIndex index(w);
    std::vector<const VehicleState*> ovs;
    for (const auto& [id, s] : w) {
      if (s.is_emv()) {
        const LocalView view = build_view(s, comm_set(s, index, grid_, cfg_), grid_, cfg_);
        const Move m{s, emv_policy(s, view, cfg_)};
        for (const auto& f : fixed)
          if (moves_conflict(f, m, grid_)) return;
        fixed.push_back(m);
        fixed_cost += move_cost(m.from, m.to);
      } else {
        ovs.push_back(&s);
      }
    }
    std::vector<Move> chosen = fixed;
    assign(ovs, 0, chosen, w, tick, cost + fixed_cost);
  }

  void assign(const std::vector<const VehicleState*>& ovs, std::size_t k, std::vector<Move>& chosen,
              const StateMap& w, int tick, double cost) {
    if (aborted_ || cost >= best_) return;
    if (k == ovs.size()) {
      StateMap next;
      for (const auto& m : chosen)
        if (!exits(m.to, grid_)) next.emplace(m.to.id, m.to);
      path_.push_back(next);
      descend(next, tick + 1, cost);
      path_.pop_back();
      return;
    }
    const VehicleState& cur = *ovs[k];
    auto options = successors(cur, grid_, cfg_);
    std::stable_sort(options.begin(), options.end(), [&](const VehicleState& a, const VehicleState& b) {
      return move_cost(cur, a) < move_cost(cur, b);
    });
    for (const auto& cand : options) {
      const Move m{cur, cand};
      bool clash = false;
      for (const auto& other : chosen) {
        if (moves_conflict(m, other, grid_)) {
          clash = true;
          break;
        }
      }
      if (clash) continue;
      chosen.push_back(m);
      assign(ovs, k + 1, chosen, w, tick, cost + move_cost(cur, cand));
      chosen.pop_back();
      if (aborted_) return;
    }
  }

  const Scenario& sc_;
  const ScenarioConfig& cfg_;
  const GridSpec& grid_;
  std::uint64_t budget_;
  Rational floor_;
  int depth_;
  std::uint64_t nodes_ = 0;
  bool aborted_ = false;
  double best_ = std::numeric_limits<double>::infinity();
  std::vector<StateMap> path_;
  std::vector<StateMap> best_path_;
  std::map<std::vector<int>, double> seen_;
};

}  // namespace detail

/// Exact minimum f' over joint OV plans with EMVs on their fixed policy,
/// subject to conflict-free transitions every tick and the terminal speed
/// rule. The run length matches `run`: until every EMV has left, capped by
/// the horizon.
inline OracleResult enumerate_optimal(const Scenario& scenario, std::uint64_t budget = 5'000'000) {
  if (auto issues = validate_scenario(scenario); !issues.empty()) throw ValidationError(std::move(issues));
  return detail::OracleSearch(scenario, budget).solve();
}

/// Weighted mean sum(k * v) / sum(k): the unique minimizer of the weighted
/// squared deviation.
inline double coord_minimizer(std::span<const double> kappas, std::span<const double> speeds) {
  if (kappas.empty() || kappas.size() != speeds.size()) throw std::invalid_argument("need equal, non-empty lists");
  double num = 0;
  double den = 0;
  for (std::size_t k = 0; k < kappas.size(); ++k) {
    if (!(kappas[k] > 0)) throw std::invalid_argument("weights must be positive");
    num += kappas[k] * speeds[k];
    den += kappas[k];
  }
  return num / den;
}

struct BoundCheck {
  double deviation = 0;
  double bound = 0;
  bool holds = false;
};

/// |weighted mean - plain mean| <= (sigma_k / mean_k) * sigma_v, population
/// standard deviations.
inline BoundCheck coord_bound_check(std::span<const double> kappas, std::span<const double> speeds) {
  const double minimizer = coord_minimizer(kappas, speeds);
  const auto n = static_cast<double>(speeds.size());
  const double mean_v = std::accumulate(speeds.begin(), speeds.end(), 0.0) / n;
  const double mean_k = std::accumulate(kappas.begin(), kappas.end(), 0.0) / n;
  double var_v = 0;
  double var_k = 0;
  for (std::size_t k = 0; k < speeds.size(); ++k) {
    var_v += (speeds[k] - mean_v) * (speeds[k] - mean_v);
    var_k += (kappas[k] - mean_k) * (kappas[k] - mean_k);
  }
  BoundCheck r;
  r.deviation = std::abs(minimizer - mean_v);
  r.bound = std::sqrt(var_k / n) / mean_k * std::sqrt(var_v / n);
  r.holds = r.deviation <= r.bound + 1e-12 * std::max(1.0, r.bound);
  return r;
}

}  // namespace sdvc
