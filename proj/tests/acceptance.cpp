// Acceptance run: one PASS/FAIL line per criterion, details indented above it.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <numeric>

#include "sdvc/baseline_idm.hpp"
#include "sdvc/io.hpp"
#include "sdvc/oracle.hpp"
#include "tiny_instances.hpp"

using namespace sdvc;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

int failures = 0;

void verdict(int id, bool ok, const std::string& summary) {
  fmt::print("criterion {} {}: {}\n", id, ok ? "PASS" : "FAIL", summary);
  std::fflush(stdout);
  if (!ok) ++failures;
}

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

double mean_f_prime(double density, int delta_v, int lanes, int seeds, std::size_t* collided = nullptr) {
  double sum = 0;
  for (int k = 1; k <= seeds; ++k) {
    const auto r = run(gen_scenario({density, delta_v, lanes, 1200, 1, static_cast<std::uint64_t>(k)}));
    sum += r.metrics.f_prime;
    if (collided != nullptr && !r.metrics.collision_ids.empty()) ++*collided;
  }
  return sum / seeds;
}

// ---- 1 ---------------------------------------------------------------------

void zero_collisions() {
  const auto t0 = Clock::now();
  const double dens[] = {64, 88, 107, 117, 134};
  int bad = 0;
  for (int k = 0; k < 200; ++k) {
    GeneratorSpec g;
    g.density_veh_per_km = dens[k % 5];
    g.delta_v = 1 + (k / 5) % 3;
    g.lanes = 3 + (k / 15) % 3;
    g.n_emv = 1 + (k / 45) % 2;
    g.length_m = 1200;
    g.seed = 1000 + static_cast<std::uint64_t>(k);
    const auto r = run(gen_scenario(g));
    if (r.metrics.collision_rate != 0.0) {
      ++bad;
      fmt::print("  run {} (density {}, delta_v {}, {} lanes, {} EMV): {} vehicles collided\n", k,
                 g.density_veh_per_km, g.delta_v, g.lanes, g.n_emv, r.metrics.collision_ids.size());
    }
  }
  const double secs = seconds_since(t0);
  verdict(1, bad == 0 && secs < 300, fmt::format("{}/200 runs with collisions, {:.0f} s", bad, secs));
}

// ---- 2 ---------------------------------------------------------------------

void oracle_ratio() {
  const auto t0 = Clock::now();
  int within = 0;
  int feasible = 0;
  int exact = 0;
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    const auto sc = fixtures::tiny_instance(seed);
    const auto ours = run(sc);
    const auto opt = enumerate_optimal(sc);
    const bool ok = ours.metrics.collision_ids.empty() && ours.metrics.terminal_speed_violations.empty();
    const double f = ours.metrics.f_prime;
    double ratio = 1.0;
    if (opt.optimal_f_prime > 0) ratio = f / opt.optimal_f_prime;
    else if (f > 0) ratio = std::numeric_limits<double>::infinity();
    feasible += ok ? 1 : 0;
    within += (ok && ratio <= 2.0) ? 1 : 0;
    exact += (opt.status == OracleStatus::Optimal && f >= opt.optimal_f_prime) ? 1 : 0;
    fmt::print("  tiny {:2}: sdvc {} opt {} ({}, {} nodes){}\n", seed, f, opt.optimal_f_prime, to_string(opt.status),
               opt.node_count, ok ? "" : " infeasible");
  }
  const double secs = seconds_since(t0);
  verdict(2, within >= 27 && feasible == 30 && exact == 30 && secs < 600,
          fmt::format("ratio <= 2 on {}/30, feasible {}/30, f'_sdvc >= f'_opt on {}/30, {:.0f} s", within, feasible,
                      exact, secs));
}

// ---- 3 ---------------------------------------------------------------------

void heterogeneity_trend() {
  const auto t0 = Clock::now();
  std::vector<double> m;
  for (int dv = 1; dv <= 3; ++dv) {
    m.push_back(mean_f_prime(117, dv, 3, 20));
    fmt::print("  density 117, delta_v {}: mean f' {:.2f}\n", dv, m.back());
  }
  const bool rising = m[0] < m[1] && m[1] < m[2];
  const double rel = (m[2] - m[0]) / m[0];
  const double secs = seconds_since(t0);
  verdict(3, rising && rel >= 0.25 && secs < 300,
          fmt::format("strictly increasing: {}, increase 1->3 {:.1f}%, {:.0f} s", rising ? "yes" : "no", 100 * rel,
                      secs));
}

// ---- 4 ---------------------------------------------------------------------

void density_shape() {
  const double dens[] = {64, 88, 107, 117};
  bool ok = false;
  for (int dv = 1; dv <= 3; ++dv) {
    std::vector<double> m;
    for (double d : dens) m.push_back(mean_f_prime(d, dv, 3, 20));
    const bool rises = m[3] > m[0];
    const bool medium = (m[2] - m[1]) > (m[1] - m[0]);
    fmt::print("  delta_v {}: {:.2f} {:.2f} {:.2f} {:.2f}, rises {}, 88->107 step above 64->88 {}\n", dv, m[0], m[1],
               m[2], m[3], rises ? "yes" : "no", medium ? "yes" : "no");
    // delta_v = 1 is the one level measured at every density from 64 to 117
    if (dv == 1) ok = rises && medium;
  }
  verdict(4, ok, "judged at delta_v = 1, other levels listed above");
}

// ---- 5 ---------------------------------------------------------------------

struct Timing {
  double per_vehicle = 0;  // seconds per vehicle per tick
  double per_tick = 0;
  double worst_tick = 0;
  std::size_t n = 0;
};

Timing timing_at(int n_ov, int seeds) {
  Timing out;
  const double density = 107;
  const int lanes = 3;
  const double length = 1000.0 * n_ov / density;
  double veh_ticks = 0;
  double total = 0;
  std::size_t ticks = 0;
  for (int k = 1; k <= seeds; ++k) {
    const auto sc = gen_scenario({density, 2, lanes, length, 1, static_cast<std::uint64_t>(k)});
    out.n = sc.vehicles.size() - 1;
    const auto r = run(sc);
    std::map<int, int> present;
    for (const auto& row : r.trajectory) ++present[row.tick];
    const auto& dt = r.metrics.decision_time_per_tick;
    for (std::size_t t = 0; t < dt.size(); ++t) {
      total += dt[t];
      veh_ticks += present[static_cast<int>(t)];
      out.worst_tick = std::max(out.worst_tick, dt[t]);
    }
    ticks += dt.size();
  }
  out.per_vehicle = total / veh_ticks;
  out.per_tick = total / static_cast<double>(ticks);
  return out;
}

void scale_independence() {
  const auto small = timing_at(100, 3);
  const auto mid = timing_at(200, 3);
  const auto large = timing_at(400, 3);
  for (const auto* t : {&small, &mid, &large})
    fmt::print("  N = {}: {:.3f} ms per vehicle-tick, {:.1f} ms mean tick, {:.1f} ms worst tick\n", t->n,
               1e3 * t->per_vehicle, 1e3 * t->per_tick, 1e3 * t->worst_tick);
  const double ratio = std::max(small.per_vehicle, large.per_vehicle) / std::min(small.per_vehicle, large.per_vehicle);
  verdict(5, ratio < 2.0 && mid.per_tick < 0.2,
          fmt::format("per-vehicle time ratio N=400 vs N=100 {:.2f}, mean tick at N=200 {:.1f} ms", ratio,
                      1e3 * mid.per_tick));
}

// ---- 6 ---------------------------------------------------------------------

void lane_robustness() {
  std::vector<double> m;
  std::size_t collided = 0;
  for (int lanes = 3; lanes <= 5; ++lanes) {
    std::size_t here = 0;
    m.push_back(mean_f_prime(39.0 * lanes, 3, lanes, 20, &here));
    collided += here;
    fmt::print("  {} lanes at 39 veh/km per lane: mean f' {:.2f}, {} runs with collisions\n", lanes, m.back(), here);
  }
  const double mean = std::accumulate(m.begin(), m.end(), 0.0) / static_cast<double>(m.size());
  const bool close = std::all_of(m.begin(), m.end(), [&](double x) { return std::abs(x - mean) <= 0.5 * mean; });
  verdict(6, collided == 0 && close,
          fmt::format("{} runs with collisions, f' within 50% of {:.2f}: {}", collided, mean, close ? "yes" : "no"));
}

// ---- 7 ---------------------------------------------------------------------

void determinism() {
  std::vector<Scenario> cases{gen_scenario({107, 2, 3, 1200, 1, 5}), gen_scenario({134, 3, 4, 900, 2, 8}),
                              fixtures::tiny_instance(4)};
  int same = 0;
  int total = 0;
  for (const auto& sc : cases) {
    for (bool baseline : {false, true}) {
      const auto a = baseline ? run_baseline(sc) : run(sc);
      const auto b = baseline ? run_baseline(sc) : run(sc);
      ++total;
      if (trajectory_csv(a.trajectory) == trajectory_csv(b.trajectory) &&
          metrics_json(a.metrics).dump() == metrics_json(b.metrics).dump() &&
          protocol_text(a.protocol) == protocol_text(b.protocol))
        ++same;
    }
  }
  verdict(7, same == total, fmt::format("{}/{} repeated runs byte-identical", same, total));
}

// ---- 8 ---------------------------------------------------------------------

void property_suites() {
  std::vector<std::pair<std::string, std::function<bool()>>> checks;
  const GridSpec grid;
  const ScenarioConfig cfg;

  checks.emplace_back("safety symmetry and substitution", [&] {
    RandomStream r(8);
    for (int k = 0; k < 5000; ++k) {
      const auto a = at(1, r.between(1, 20), r.between(1, 3), r.between(0, 5));
      const auto b = at(2, r.between(1, 20), r.between(1, 3), r.between(0, 5));
      if (safety_ok(a, b).ok != safety_ok(b, a).ok) return false;
    }
    return safety_ok(at(1, 8, 1, 2), at(2, 10, 1, 1)).ok && !safety_ok(at(1, 9, 1, 2), at(2, 10, 1, 1)).ok;
  });
  checks.emplace_back("successor clamping", [&] {
    for (int l = 1; l <= grid.lanes; ++l)
      for (int v = 0; v <= cfg.v_max; ++v) {
        const auto s = at(1, 10, l, v);
        const auto next = successors(s, grid, cfg);
        const std::size_t lanes = 1 + (l > 1 ? 1 : 0) + (l < grid.lanes ? 1 : 0);
        const std::size_t speeds = 1 + (v > 0 ? 1 : 0) + (v < cfg.v_max ? 1 : 0);
        if (next.size() != lanes * speeds) return false;
        for (const auto& n : next)
          if (n.i != s.i + s.v || n.v < 0 || n.v > cfg.v_max || n.l < 1 || n.l > grid.lanes) return false;
      }
    return true;
  });
  checks.emplace_back("prediction recurrences", [&] {
    const auto e = predict_emv(at(0, 1, 1, 3, VehicleClass::Emv), 3, 3, cfg);
    const auto c = predict_const(at(1, 10, 1, 2), 2);
    return e.states.size() == 3 && e.states[0] == with_pose(at(0, 1, 1, 3, VehicleClass::Emv), 4, 4, 2) &&
           e.states[1] == with_pose(e.states[0], 8, 5, 3) && e.states[2] == with_pose(e.states[1], 13, 5, 3) &&
           c.states.size() == 2 && c.states[1].i == 14 && c.states[1].v == 2 && c.states[1].l == 1;
  });
  checks.emplace_back("EMV-behind lane mean rule", [&] {
    const auto n = at(1, 20, 2, 2);
    const std::vector<VehicleState> nb{at(0, 5, 1, 3, VehicleClass::Emv), at(2, 25, 2, 4), at(3, 9, 1, 3)};
    const auto view = build_view(n, nb, grid, cfg);
    const std::vector<VehicleState> ahead{at(0, 30, 1, 3, VehicleClass::Emv)};
    const auto view_ahead = build_view(n, ahead, grid, cfg);
    return view.mean_speed(3) == Rational(5) && view.mean_speed(2) == Rational(3) &&
           view_ahead.mean_speed(3) == Rational(2);
  });
  checks.emplace_back("influence strictness", [&] {
    for (int vj = 0; vj <= 4; ++vj) {
      if (vj == 2) continue;
      const auto view = build_view(at(1, 10, 1, 2), {at(2, 11, 1, vj), at(3, 1, 1, 4 - vj)}, grid, cfg);
      if (is_influenced(view, grid, cfg).influenced) return false;
    }
    return true;
  });
  checks.emplace_back("argmin weight scaling", [&] {
    RandomStream gen(99);
    const Rational ov_mean(2);
    for (int trial = 0; trial < 200; ++trial) {
      const auto n = at(1, 20, gen.between(1, 3), gen.between(0, 5));
      std::vector<VehicleState> nb;
      std::set<std::pair<int, int>> used{{n.i, n.l}};
      for (VehicleId id = 2; id < 8; ++id) {
        auto s = at(id, gen.between(10, 30), gen.between(1, 3), gen.between(0, 5));
        if (used.insert({s.i, s.l}).second) nb.push_back(s);
      }
      const auto view = build_view(n, nb, grid, cfg);
      const auto p = find_platoon(n, view.neighbors, cfg);
      ScenarioConfig scaled = cfg;
      const double k = gen.uniform(0.1, 10.0);
      scaled.w1 *= k;
      scaled.w2 *= k;
      scaled.w3 *= k;
      RandomStream ra(5, 0, 1, StreamPurpose::CandidateTie);
      RandomStream rb(5, 0, 1, StreamPurpose::CandidateTie);
      if (select_candidate(n, view, p, {grid, cfg, ov_mean}, ra).state !=
          select_candidate(n, view, p, {grid, scaled, ov_mean}, rb).state)
        return false;
    }
    return true;
  });

  // random tick fixtures for the coalition checks
  struct Fixture {
    StateMap world;
    std::map<VehicleId, LocalView> views;
    MoveMap proposals;
  };
  auto random_tick = [&](RandomStream& gen) {
    Fixture f;
    std::set<std::pair<int, int>> used;
    for (VehicleId id = 0; id < 8; ++id) {
      const auto s = at(id, gen.between(1, 25), gen.between(1, 3), gen.between(0, 5),
                        id == 0 ? VehicleClass::Emv : VehicleClass::Ov);
      if (!used.insert({s.i, s.l}).second) continue;
      const auto opts = successors(s, grid, cfg);
      f.world[id] = s;
      f.proposals[id] = {s, opts[gen.below(opts.size())]};
    }
    for (const auto& [id, s] : f.world) {
      std::vector<VehicleState> nb;
      for (const auto& [oid, o] : f.world)
        if (oid != id) nb.push_back(o);
      f.views.emplace(id, build_view(s, nb, grid, cfg));
    }
    return f;
  };
  checks.emplace_back("coalition closure equality", [&] {
    RandomStream gen(31);
    for (int trial = 0; trial < 200; ++trial) {
      const auto f = random_tick(gen);
      for (const auto& [id, s] : f.world) {
        const auto g = build_coalition(id, f.proposals, f.views.at(id), grid);
        if (g.members.size() >= g.capacity) continue;  // capped groups may differ by seed
        for (VehicleId m : g.members) {
          const auto other = build_coalition(m, f.proposals, f.views.at(m), grid);
          if (other.members.size() < other.capacity && other.members != g.members) return false;
        }
      }
    }
    return true;
  });
  checks.emplace_back("EMV immutable under resolve", [&] {
    RandomStream gen(17);
    const Rational ov_mean(2);
    for (int trial = 0; trial < 200; ++trial) {
      const auto f = random_tick(gen);
      if (f.world.count(0) == 0U) continue;
      const DecisionContext ctx{grid, cfg, ov_mean};
      const ResolutionInputs in{f.world, f.views, f.proposals, ctx, trial, true};
      for (const auto& [id, s] : f.world) {
        if (s.is_emv()) continue;
        const auto g = build_coalition(id, f.proposals, f.views.at(id), grid);
        if (g.members.size() < 2) continue;
        const auto r = resolve(g, in);
        if (auto it = r.assignment.find(0); it != r.assignment.end() && it->second != f.proposals.at(0).to)
          return false;
      }
    }
    return true;
  });
  checks.emplace_back("coordination bound on 10^4 draws", [&] {
    RandomStream rng(2024);
    for (int draw = 0; draw < 10000; ++draw) {
      const int n = rng.between(2, 12);
      std::vector<double> k(static_cast<std::size_t>(n));
      std::vector<double> v(static_cast<std::size_t>(n));
      for (int q = 0; q < n; ++q) {
        k[static_cast<std::size_t>(q)] = rng.uniform(0.01, 10.0);
        v[static_cast<std::size_t>(q)] = rng.uniform(0.0, 5.0);
      }
      if (!coord_bound_check(k, v).holds) return false;
    }
    return true;
  });

  int passed = 0;
  for (const auto& [name, check] : checks) {
    const bool ok = check();
    passed += ok ? 1 : 0;
    fmt::print("  {}: {}\n", name, ok ? "ok" : "failed");
  }
  verdict(8, passed == static_cast<int>(checks.size()),
          fmt::format("{}/{} property checks hold (the unit suites run as separate tests)", passed, checks.size()));
}

// ---- 9 ---------------------------------------------------------------------

void baseline_contrast() {
  int ok = 0;
  fmt::print("  seed  exit_sdvc  exit_idm  f'_sdvc  f'_idm\n");
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto sc = gen_scenario({107, 2, 3, 1200, 1, seed});
    const auto a = run(sc);
    const auto b = run_baseline(sc);
    const int ta = a.metrics.emv_exit_tick.empty() ? sc.config.horizon + 1 : a.metrics.emv_exit_tick.begin()->second;
    const int tb = b.metrics.emv_exit_tick.empty() ? sc.config.horizon + 1 : b.metrics.emv_exit_tick.begin()->second;
    ok += ta <= tb ? 1 : 0;
    fmt::print("  {:4}  {:9}  {:8}  {:7}  {:6}\n", seed, ta, tb, a.metrics.f_prime, b.metrics.f_prime);
  }
  verdict(9, ok >= 18, fmt::format("EMV traversal no slower than under IDM in {}/20 runs", ok));
}

}  // namespace

int main() {
  zero_collisions();
  oracle_ratio();
  heterogeneity_trend();
  density_shape();
  scale_independence();
  lane_robustness();
  determinism();
  property_suites();
  baseline_contrast();
  fmt::print("{} criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
