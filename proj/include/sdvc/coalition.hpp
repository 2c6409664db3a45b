#pragma once

// Conflict resolution between candidate next states. Vehicles whose candidates
// conflict are grouped transitively into a coalition; the coalition's
// highest-priority OV then re-plans every member in priority order, widening
// the group with the nearest outsider while conflicts remain.

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <vector>

#include "sdvc/prediction.hpp"
#include "sdvc/random.hpp"
#include "sdvc/safety.hpp"
#include "sdvc/strategy.hpp"

namespace sdvc {

struct Coalition {
  std::vector<VehicleId> members;   // sorted by id
  VehicleId central = 0;            // highest-priority OV
  std::vector<VehicleId> priority;  // EMVs first, then OVs by feasible count
  std::size_t capacity = 0;         // seed plus its |C_n| partners

  bool contains(VehicleId id) const { return std::binary_search(members.begin(), members.end(), id); }
};

using Assignment = std::map<VehicleId, VehicleState>;
using MoveMap = std::map<VehicleId, Move>;

/// Transitive closure of candidate conflicts around `seed`, limited to the
/// seed's communication set. The seed counts on top of its |C_n| partners.
inline Coalition build_coalition(VehicleId seed, const MoveMap& candidates, const LocalView& seed_view,
                                 const GridSpec& grid) {
  Coalition g;
  g.capacity = seed_view.neighbors.size() + 1;
  std::vector<VehicleId> members{seed};
  std::set<VehicleId> in{seed};
  bool grew = true;
  while (grew && members.size() < g.capacity) {
    grew = false;
    std::vector<VehicleId> joined;
    for (const auto& j : seed_view.neighbors) {
      if (in.count(j.id) != 0U) continue;
      const auto cj = candidates.find(j.id);
      if (cj == candidates.end()) continue;
      for (VehicleId m : members) {
        if (moves_conflict(candidates.at(m), cj->second, grid)) {
          joined.push_back(j.id);
          break;
        }
      }
    }
    for (VehicleId id : joined) {
      if (members.size() >= g.capacity) break;
      members.push_back(id);
      in.insert(id);
      grew = true;
    }
  }
  std::sort(members.begin(), members.end());
  g.members = std::move(members);
  return g;
}

/// Perturbation used to order OVs with equal feasible counts.
inline double priority_epsilon(std::uint64_t seed, int tick, VehicleId id) {
  RandomStream rng(seed, static_cast<std::uint64_t>(tick), id, StreamPurpose::PriorityEpsilon);
  return rng.uniform(-0.5, 0.5);
}

/// EMVs first by id; then OVs ascending by feasible_count + epsilon. Since
/// |epsilon| < 0.5 distinct counts are never reordered.
inline std::vector<VehicleId> priority_order(std::span<const VehicleId> members, const StateMap& states,
                                             const std::map<VehicleId, int>& feasible, std::uint64_t seed,
                                             int tick) {
  struct Key {
    int tier;
    double score;
    VehicleId id;
  };
  std::vector<Key> keys;
  keys.reserve(members.size());
  for (VehicleId id : members) {
    if (states.at(id).is_emv())
      keys.push_back({0, 0.0, id});
    else
      keys.push_back({1, feasible.at(id) + priority_epsilon(seed, tick, id), id});
  }
  std::sort(keys.begin(), keys.end(), [](const Key& a, const Key& b) {
    if (a.tier != b.tier) return a.tier < b.tier;
    if (a.score != b.score) return a.score < b.score;
    return a.id < b.id;
  });
  std::vector<VehicleId> out;
  out.reserve(keys.size());
  for (const auto& k : keys) out.push_back(k.id);
  return out;
}

/// Outside vehicle with the smallest summed grid Manhattan distance to the
/// members; ties go to the smaller id.
inline std::optional<VehicleId> nearest_outside(std::span<const VehicleState> members,
                                                std::span<const VehicleState> outside) {
  std::optional<VehicleId> best;
  long best_sum = 0;
  for (const auto& o : outside) {
    long sum = 0;
    for (const auto& m : members) sum += std::abs(o.i - m.i) + std::abs(o.l - m.l);
    if (!best || sum < best_sum || (sum == best_sum && o.id < *best)) {
      best = o.id;
      best_sum = sum;
    }
  }
  return best;
}

/// Everything resolution needs to know about the tick in progress.
struct ResolutionInputs {
  const StateMap& world;                            // states at t
  const std::map<VehicleId, LocalView>& views;      // per vehicle
  const MoveMap& proposals;                         // current proposal per vehicle
  const DecisionContext& ctx;
  int tick = 0;
  bool strict_safety_fallback = true;
};

struct Resolution {
  Coalition coalition;
  Assignment assignment;
  int conflicts = 0;  // violating pairs left in the adopted pass
  int passes = 0;
  bool fallback_used = false;
};

namespace detail {

inline int max_interaction_cells(const ScenarioConfig& cfg) { return 2 * cfg.v_max + 2; }

/// Proposals of non-members that can interact with `who` this tick.
inline std::vector<Move> outside_moves(const VehicleState& who, const Coalition& g, const ResolutionInputs& in) {
  std::vector<Move> out;
  const int reach = max_interaction_cells(in.ctx.config);
  for (const auto& j : in.views.at(who.id).neighbors) {
    if (g.contains(j.id) || std::abs(j.i - who.i) > reach) continue;
    out.push_back(in.proposals.at(j.id));
  }
  return out;
}

inline int count_violations(const Coalition& g, const Assignment& assigned, const ResolutionInputs& in) {
  int bad = 0;
  for (std::size_t a = 0; a < g.members.size(); ++a) {
    const VehicleId ia = g.members[a];
    const Move ma{in.world.at(ia), assigned.at(ia)};
    for (std::size_t b = a + 1; b < g.members.size(); ++b) {
      const VehicleId ib = g.members[b];
      if (moves_conflict(ma, {in.world.at(ib), assigned.at(ib)}, in.ctx.grid)) ++bad;
    }
    for (const auto& other : outside_moves(ma.from, g, in))
      if (moves_conflict(ma, other, in.ctx.grid)) ++bad;
  }
  return bad;
}

/// Plans members one at a time in priority order. With `strict`, a member
/// only falls back to a conflicting state when no conflict-free one exists.
inline Assignment plan_pass(const Coalition& g, const ResolutionInputs& in, bool strict) {
  Assignment assigned;
  std::vector<Move> planned;
  for (VehicleId id : g.priority) {
    const VehicleState& cur = in.world.at(id);
    if (cur.is_emv()) {
      assigned[id] = in.proposals.at(id).to;
      planned.push_back(in.proposals.at(id));
      continue;
    }
    std::vector<Move> obstacles = outside_moves(cur, g, in);
    obstacles.insert(obstacles.end(), planned.begin(), planned.end());
    RandomStream rng(in.ctx.config.seed, static_cast<std::uint64_t>(in.tick), id, StreamPurpose::CandidateTie);
    const LocalView& view = in.views.at(id);
    VehicleState chosen = select_candidate(cur, view, obstacles, in.ctx, rng).state;
    if (strict) {
      const Move trial{cur, chosen};
      const bool clashes = std::any_of(obstacles.begin(), obstacles.end(),
                                       [&](const Move& o) { return moves_conflict(trial, o, in.ctx.grid); });
      if (clashes) {
        // Fewest clashes first, then the ordinary score.
        int best_clashes = -1;
        double best_value = 0;
        for (const auto& cand : successors(cur, in.ctx.grid, in.ctx.config)) {
          const Move m{cur, cand};
          int c = 0;
          for (const auto& o : obstacles) c += moves_conflict(m, o, in.ctx.grid) ? 1 : 0;
          const double value = strategy_terms(cur, cand, view, obstacles, in.ctx).value;
          if (best_clashes < 0 || c < best_clashes || (c == best_clashes && value < best_value && !same_value(value, best_value))) {
            best_clashes = c;
            best_value = value;
            chosen = cand;
          }
        }
      }
    }
    assigned[id] = chosen;
    planned.push_back({cur, chosen});
  }
  return assigned;
}

/// Conflict-free assignment found by depth-first search: members in priority
/// order, each member's successors in order of strategy value, with forward
/// checking. Outsider proposals are hard constraints. Returns nothing if no
/// assignment exists or the node budget runs out.
inline std::optional<Assignment> search_pass(const Coalition& g, const ResolutionInputs& in,
                                             std::size_t budget = 2000) {
  const auto& grid = in.ctx.grid;
  struct Slot {
    VehicleId id;
    std::vector<Move> options;
  };
  std::vector<Slot> slots;
  for (VehicleId id : g.priority) {
    const VehicleState& cur = in.world.at(id);
    const auto outside = outside_moves(cur, g, in);
    std::vector<std::pair<double, Move>> ranked;
    if (cur.is_emv()) {
      ranked.push_back({0.0, in.proposals.at(id)});
    } else {
      const LocalView& view = in.views.at(id);
      for (const auto& cand : successors(cur, grid, in.ctx.config))
        ranked.push_back({strategy_terms(cur, cand, view, outside, in.ctx).value, Move{cur, cand}});
      std::stable_sort(ranked.begin(), ranked.end(),
                       [](const auto& a, const auto& b) { return a.first < b.first && !same_value(a.first, b.first); });
    }
    Slot slot{id, {}};
    for (const auto& [value, m] : ranked) {
      const bool clash = std::any_of(outside.begin(), outside.end(),
                                     [&](const Move& o) { return moves_conflict(m, o, grid); });
      if (!clash) slot.options.push_back(m);
    }
    if (slot.options.empty()) return std::nullopt;
    slots.push_back(std::move(slot));
  }

  // domains[k] holds indices into slots[k].options still compatible.
  std::vector<std::vector<std::size_t>> domains(slots.size());
  for (std::size_t k = 0; k < slots.size(); ++k)
    for (std::size_t o = 0; o < slots[k].options.size(); ++o) domains[k].push_back(o);
  std::vector<std::size_t> pick(slots.size());
  std::size_t nodes = 0;

  auto dfs = [&](auto&& self, std::size_t k) -> bool {
    if (k == slots.size()) return true;
    if (++nodes > budget) return false;
    const auto saved = domains;
    for (std::size_t o : saved[k]) {
      const Move& m = slots[k].options[o];
      bool wiped = false;
      for (std::size_t q = k + 1; q < slots.size() && !wiped; ++q) {
        auto& d = domains[q];
        std::erase_if(d, [&](std::size_t x) { return moves_conflict(m, slots[q].options[x], grid); });
        wiped = d.empty();
      }
      if (!wiped) {
        pick[k] = o;
        if (self(self, k + 1)) return true;
      }
      if (nodes > budget) return false;
      domains = saved;
    }
    return false;
  };
  if (!dfs(dfs, 0)) return std::nullopt;
  Assignment out;
  for (std::size_t k = 0; k < slots.size(); ++k) out[slots[k].id] = slots[k].options[pick[k]].to;
  return out;
}

inline std::map<VehicleId, int> member_feasible_counts(const Coalition& g, const ResolutionInputs& in) {
  std::map<VehicleId, int> counts;
  for (VehicleId id : g.members) {
    const VehicleState& cur = in.world.at(id);
    if (cur.is_emv()) {
      counts[id] = 0;
      continue;
    }
    const auto obstacles = outside_moves(cur, g, in);
    counts[id] = feasible_count(cur, in.views.at(id), obstacles, in.ctx);
  }
  return counts;
}

inline void order_members(Coalition& g, const ResolutionInputs& in) {
  const auto counts = member_feasible_counts(g, in);
  g.priority = priority_order(g.members, in.world, counts, in.ctx.config.seed, in.tick);
  g.central = 0;
  for (VehicleId id : g.priority) {
    if (in.world.at(id).is_ov()) {
      g.central = id;
      break;
    }
  }
}

}  // namespace detail

/// Re-plans a coalition. EMVs keep their proposals; each OV, in priority
/// order, re-selects against outsiders' proposals and the states already
/// fixed for higher-priority members. While conflicts remain the coalition
/// absorbs the nearest outsider of the central vehicle, up to capacity; the
/// pass with the fewest conflicts is adopted.
///
/// With `strict_safety_fallback`, a pass that leaves conflicts is followed by
/// a backtracking search for a conflict-free assignment of the same members
/// before the coalition grows.
inline Resolution resolve(Coalition coalition, const ResolutionInputs& in) {
  Resolution best;
  bool have_best = false;
  int passes = 0;
  auto consider = [&](Assignment&& assigned, int bad, bool strict) {
    if (!have_best || bad < best.conflicts) {
      best.coalition = coalition;
      best.assignment = std::move(assigned);
      best.conflicts = bad;
      best.fallback_used = strict;
      have_best = true;
    }
  };
  while (true) {
    detail::order_members(coalition, in);
    if (coalition.central == 0) break;  // EMV-only group, nothing to re-plan
    Assignment assigned = detail::plan_pass(coalition, in, false);
    int bad = detail::count_violations(coalition, assigned, in);
    ++passes;
    consider(std::move(assigned), bad, false);
    if (bad > 0 && in.strict_safety_fallback) {
      ++passes;
      if (auto found = detail::search_pass(coalition, in)) {
        bad = detail::count_violations(coalition, *found, in);
        consider(std::move(*found), bad, true);
      } else {
        Assignment strict = detail::plan_pass(coalition, in, true);
        bad = detail::count_violations(coalition, strict, in);
        consider(std::move(strict), bad, true);
      }
    }
    if (bad == 0 || coalition.members.size() >= coalition.capacity) break;

    const LocalView& central_view = in.views.at(coalition.central);
    std::vector<VehicleState> inside;
    std::vector<VehicleState> outside;
    for (VehicleId id : coalition.members) inside.push_back(in.world.at(id));
    for (const auto& j : central_view.neighbors)
      if (!coalition.contains(j.id)) outside.push_back(in.world.at(j.id));
    const auto next = nearest_outside(inside, outside);
    if (!next) break;
    coalition.members.insert(std::upper_bound(coalition.members.begin(), coalition.members.end(), *next), *next);
  }
  if (!have_best) {
    // No OV to act as central: proposals stand.
    best.coalition = coalition;
    for (VehicleId id : coalition.members) best.assignment[id] = in.proposals.at(id).to;
    best.conflicts = detail::count_violations(coalition, best.assignment, in);
  }
  best.passes = passes;
  return best;
}

}  // namespace sdvc
