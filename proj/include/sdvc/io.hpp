#pragma once

// File formats and scenario sources: JSON scenario files, CSV frame
// ingestion, the synthetic generator, trajectory/metrics/protocol writers
// and the space-time SVG plot.

#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <json.hpp>

#include "sdvc/engine.hpp"
#include "sdvc/random.hpp"

namespace sdvc {

using Json = nlohmann::ordered_json;

class FormatError : public Error {
 public:
  using Error::Error;
};

class IngestError : public Error {
 public:
  IngestError(const std::string& what, std::vector<std::string> rows) : Error(what), rows_(std::move(rows)) {}
  const std::vector<std::string>& rows() const { return rows_; }

 private:
  std::vector<std::string> rows_;
};

class GenerationError : public Error {
 public:
  using Error::Error;
};

// ---- scenario file -------------------------------------------------------

inline Json scenario_to_json(const Scenario& sc) {
  const auto& g = sc.grid;
  const auto& c = sc.config;
  Json j;
  j["grid"] = {{"cells", g.cells}, {"lanes", g.lanes}, {"cell_length_m", g.cell_length_m},
               {"cell_width_m", g.cell_width_m}};
  Json cfg;
  cfg["horizon"] = c.horizon;
  cfg["v_max"] = c.v_max;
  cfg["accel"] = c.accel;
  cfg["decel"] = c.decel;
  cfg["c1"] = c.c1;
  cfg["c2"] = c.c2;
  cfg["c3"] = c.c3;
  cfg["w1"] = c.w1;
  cfg["w2"] = c.w2;
  cfg["w3"] = c.w3;
  cfg["comm_range_m"] = c.comm_range_m;
  cfg["seed"] = c.seed;
  cfg["ov_mean_speed_override"] = c.ov_mean_speed_override ? Json(*c.ov_mean_speed_override) : Json(nullptr);
  cfg["platoon_gap"] = c.platoon_gap;
  cfg["stop_when_emvs_exit"] = c.stop_when_emvs_exit;
  j["config"] = std::move(cfg);
  Json vs = Json::array();
  for (const auto& v : sc.vehicles) vs.push_back({{"class", to_string(v.cls)}, {"i", v.i}, {"l", v.l}, {"v", v.v}});
  j["vehicles"] = std::move(vs);
  return j;
}

/// Vehicles get ids 0, 1, ... in list order. Missing config keys keep their
/// defaults.
inline Scenario scenario_from_json(const Json& j) {
  try {
    Scenario sc;
    if (j.contains("grid")) {
      const auto& g = j.at("grid");
      sc.grid.cells = g.value("cells", sc.grid.cells);
      sc.grid.lanes = g.value("lanes", sc.grid.lanes);
      sc.grid.cell_length_m = g.value("cell_length_m", sc.grid.cell_length_m);
      sc.grid.cell_width_m = g.value("cell_width_m", sc.grid.cell_width_m);
    }
    if (j.contains("config")) {
      const auto& c = j.at("config");
      auto& o = sc.config;
      o.horizon = c.value("horizon", o.horizon);
      o.v_max = c.value("v_max", o.v_max);
      o.accel = c.value("accel", o.accel);
      o.decel = c.value("decel", o.decel);
      o.c1 = c.value("c1", o.c1);
      o.c2 = c.value("c2", o.c2);
      o.c3 = c.value("c3", o.c3);
      o.w1 = c.value("w1", o.w1);
      o.w2 = c.value("w2", o.w2);
      o.w3 = c.value("w3", o.w3);
      o.comm_range_m = c.value("comm_range_m", o.comm_range_m);
      o.seed = c.value("seed", o.seed);
      if (c.contains("ov_mean_speed_override") && !c.at("ov_mean_speed_override").is_null())
        o.ov_mean_speed_override = c.at("ov_mean_speed_override").get<int>();
      o.platoon_gap = c.value("platoon_gap", o.platoon_gap);
      o.stop_when_emvs_exit = c.value("stop_when_emvs_exit", o.stop_when_emvs_exit);
    }
    VehicleId id = 0;
    for (const auto& v : j.at("vehicles")) {
      VehicleState s;
      s.id = id++;
      s.cls = parse_vehicle_class(v.at("class").get<std::string>());
      s.i = v.at("i").get<int>();
      s.l = v.at("l").get<int>();
      s.v = v.at("v").get<int>();
      s.initial_speed = s.v;
      sc.vehicles.push_back(s);
    }
    return sc;
  } catch (const Json::exception& e) {
    throw FormatError(std::string("malformed scenario document: ") + e.what());
  }
}

inline std::string serialize_scenario(const Scenario& sc) { return scenario_to_json(sc).dump(2) + "\n"; }

inline Scenario parse_scenario(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw FormatError(std::string("scenario is not valid JSON: ") + e.what());
  }
  return scenario_from_json(j);
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path);
  out << text;
}

inline Scenario load_scenario(const std::string& path) { return parse_scenario(read_file(path)); }

// ---- frame ingestion -----------------------------------------------------

namespace detail {

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) {
    const auto b = field.find_first_not_of(" \t\r");
    const auto e = field.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? std::string() : field.substr(b, e - b + 1));
  }
  return out;
}

}  // namespace detail

/// Frame rows `x_m,lane,speed_mps,class`; a header line is allowed. Rows that
/// discretize onto an occupied cell are moved back to the nearest free cell
/// of their lane. Lane 1 is the bottom lane.
inline Scenario ingest_frames(std::istream& in, const GridSpec& grid, const ScenarioConfig& config) {
  Scenario sc;
  sc.grid = grid;
  sc.config = config;
  std::map<std::pair<int, int>, std::size_t> taken;
  std::vector<std::string> bad;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto f = detail::split_csv(line);
    if (lineno == 1 && !f.empty() && f[0] == "x_m") continue;
    const std::string tag = "line " + std::to_string(lineno) + ": " + line;
    if (f.size() != 4) {
      bad.push_back(tag + " (expected 4 fields)");
      continue;
    }
    try {
      VehicleState s;
      s.id = static_cast<VehicleId>(sc.vehicles.size());
      s.i = discretize_position(std::stod(f[0]), grid);
      s.l = std::stoi(f[1]);
      s.v = discretize_speed(std::stod(f[2]), config.v_max, grid.cell_length_m);
      s.cls = parse_vehicle_class(f[3]);
      s.initial_speed = s.v;
      if (s.l < 1 || s.l > grid.lanes) throw OutOfRange("lane out of range");
      while (s.i >= 1 && taken.count({s.i, s.l}) != 0U) --s.i;
      if (s.i < 1) throw OutOfRange("no free cell behind the measured position");
      taken[{s.i, s.l}] = sc.vehicles.size();
      sc.vehicles.push_back(s);
    } catch (const std::exception& e) {
      bad.push_back(tag + " (" + e.what() + ")");
    }
  }
  if (!bad.empty()) throw IngestError("cannot place " + std::to_string(bad.size()) + " frame row(s)", bad);
  if (sc.vehicles.empty()) throw IngestError("frame file holds no vehicles: empty scenario", {});
  if (auto issues = validate_scenario(sc); !issues.empty()) throw IngestError("ingested scenario is invalid", issues);
  return sc;
}

inline Scenario ingest_frames_file(const std::string& path, const GridSpec& grid, const ScenarioConfig& config) {
  std::istringstream in(read_file(path));
  return ingest_frames(in, grid, config);
}

// ---- generator -----------------------------------------------------------

struct GeneratorSpec {
  double density_veh_per_km = 107;  // over all lanes
  int delta_v = 2;
  int lanes = 3;
  double length_m = 1200;
  int n_emv = 1;
  std::uint64_t seed = 0;
};

/// Random scenario: round(density * length / 1000) OVs at uniformly drawn
/// safe cells, with speeds averaging exactly v_max - delta_v; EMVs start at
/// the beginning of the segment, three cells apart, at the mean OV speed,
/// with their own lane clear over their run-up to v_max.
inline Scenario gen_scenario(const GeneratorSpec& spec, ScenarioConfig config = {}) {
  Scenario sc;
  sc.grid.lanes = spec.lanes;
  sc.grid.cells = static_cast<int>(std::lround(spec.length_m / sc.grid.cell_length_m));
  config.seed = spec.seed;
  config.horizon = sc.grid.cells;
  sc.config = config;
  const int n_ov = static_cast<int>(std::lround(spec.density_veh_per_km * spec.length_m / 1000.0));
  const int mu = config.v_max - spec.delta_v;
  if (spec.lanes < 1 || sc.grid.cells < 1 || spec.n_emv < 0 || n_ov < 0)
    throw GenerationError("generator arguments out of range");
  if (mu < 0 || spec.delta_v < 0) throw GenerationError("delta_v must lie in [0, v_max]");
  if (n_ov + spec.n_emv > sc.grid.cells * sc.grid.lanes) throw GenerationError("more vehicles than cells");
  RandomStream rng(spec.seed, 0, 0, StreamPurpose::ScenarioGeneration);

  // Speeds: pairs of (-1, +1) or (0, 0) keep the mean exactly mu.
  std::vector<int> speeds(static_cast<std::size_t>(n_ov), mu);
  if (mu - 1 >= 0 && mu + 1 <= config.v_max) {
    for (std::size_t k = 0; k + 1 < speeds.size(); k += 2) {
      if (rng.below(2) == 0) {
        speeds[k] = mu - 1;
        speeds[k + 1] = mu + 1;
      }
    }
  }

  std::vector<std::map<int, int>> lane_occ(static_cast<std::size_t>(spec.lanes));  // cell -> speed
  auto safe_at = [&](int i, int l, int v) {
    const auto& occ = lane_occ[static_cast<std::size_t>(l - 1)];
    if (occ.count(i) != 0U) return false;
    auto ahead = occ.upper_bound(i);
    if (ahead != occ.end() && ahead->first - i < v - ahead->second + 1) return false;
    if (ahead != occ.begin()) {
      auto behind = std::prev(ahead);
      if (i - behind->first < behind->second - v + 1) return false;
    }
    return true;
  };
  VehicleId id = 0;
  for (int k = 0; k < spec.n_emv; ++k) {
    VehicleState s;
    s.id = id++;
    s.cls = VehicleClass::Emv;
    s.i = 1 + 3 * k;
    s.l = 1 + k % spec.lanes;
    s.v = mu;
    s.initial_speed = mu;
    if (s.i > sc.grid.cells || !safe_at(s.i, s.l, s.v)) throw GenerationError("no room for the EMVs");
    lane_occ[static_cast<std::size_t>(s.l - 1)][s.i] = s.v;
    sc.vehicles.push_back(s);
  }
  // Each EMV's own lane stays empty over its run-up: the cells it covers
  // while accelerating to v_max, plus one tick at v_max.
  int run_up = 0;
  for (int v = mu; v <= config.v_max; v += config.accel) run_up += v;
  auto in_run_up = [&](int i, int l) {
    for (const auto& e : sc.vehicles)
      if (e.is_emv() && e.l == l && i >= e.i && i <= e.i + run_up) return true;
    return false;
  };
  std::vector<std::pair<int, int>> free;
  for (int v : speeds) {
    free.clear();
    for (int l = 1; l <= spec.lanes; ++l)
      for (int i = 1; i <= sc.grid.cells; ++i)
        if (safe_at(i, l, v) && !in_run_up(i, l)) free.emplace_back(i, l);
    if (free.empty())
      throw GenerationError(fmt::format("density {} veh/km cannot be placed safely", spec.density_veh_per_km));
    const auto [i, l] = free[rng.below(free.size())];
    VehicleState s;
    s.id = id++;
    s.cls = VehicleClass::Ov;
    s.i = i;
    s.l = l;
    s.v = v;
    s.initial_speed = v;
    lane_occ[static_cast<std::size_t>(l - 1)][i] = v;
    sc.vehicles.push_back(s);
  }
  return sc;
}

// ---- run outputs -----------------------------------------------------------

inline std::string trajectory_csv(const TrajectoryTable& table) {
  std::string out = "tick,id,class,i,l,v,influenced,coalition\n";
  for (const auto& r : table)
    out += fmt::format("{},{},{},{},{},{},{},{}\n", r.tick, r.id, to_string(r.cls), r.i, r.l, r.v,
                       r.influenced ? 1 : 0, r.coalition ? std::to_string(*r.coalition) : std::string());
  return out;
}

inline TrajectoryTable parse_trajectory_csv(const std::string& text) {
  TrajectoryTable table;
  std::istringstream in(text);
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (header) {
      header = false;
      continue;
    }
    if (line.empty()) continue;
    auto f = detail::split_csv(line);
    if (!line.empty() && line.back() == ',') f.emplace_back();
    if (f.size() != 8) throw FormatError("bad trajectory row: " + line);
    TrajectoryRow r;
    r.tick = std::stoi(f[0]);
    r.id = static_cast<VehicleId>(std::stoul(f[1]));
    r.cls = parse_vehicle_class(f[2]);
    r.i = std::stoi(f[3]);
    r.l = std::stoi(f[4]);
    r.v = std::stoi(f[5]);
    r.influenced = f[6] == "1";
    if (!f[7].empty()) r.coalition = static_cast<VehicleId>(std::stoul(f[7]));
    table.push_back(r);
  }
  return table;
}

/// Objective terms rebuilt from a trajectory table alone. A vehicle missing
/// from the next tick left the segment and only its progress counts.
inline RunMetrics metrics_from_trajectory(const TrajectoryTable& table, const ScenarioConfig& cfg) {
  RunMetrics m;
  std::map<int, std::map<VehicleId, const TrajectoryRow*>> by_tick;
  for (const auto& r : table) by_tick[r.tick][r.id] = &r;
  if (by_tick.empty()) return m;
  const int last = by_tick.rbegin()->first;
  for (const auto& [t, rows] : by_tick) {
    if (t == last) break;
    const auto& next = by_tick.at(t + 1);
    for (const auto& [id, r] : rows) {
      auto it = next.find(id);
      if (it == next.end()) {
        if (r->cls == VehicleClass::Emv) m.f += r->v;
        continue;
      }
      const TrajectoryRow& n = *it->second;
      if (r->cls == VehicleClass::Emv) {
        m.f += n.i - r->i;
        m.emv_lane_changes += std::abs(n.l - r->l);
      } else {
        m.ov_speed_changes += std::abs(n.v - r->v);
        m.ov_lane_changes += std::abs(n.l - r->l);
      }
    }
  }
  m.ticks = last - by_tick.begin()->first;
  m.f_prime = cfg.c1 * static_cast<double>(m.ov_speed_changes) + cfg.c2 * static_cast<double>(m.emv_lane_changes) +
              cfg.c3 * static_cast<double>(m.ov_lane_changes);
  return m;
}

/// Deterministic part of the metrics; wall-times go to `timing_json`.
inline Json metrics_json(const RunMetrics& m) {
  Json j;
  j["f"] = m.f;
  j["f_prime"] = m.f_prime;
  j["ov_speed_changes"] = m.ov_speed_changes;
  j["ov_lane_changes"] = m.ov_lane_changes;
  j["emv_lane_changes"] = m.emv_lane_changes;
  j["collision_ids"] = m.collision_ids;
  j["collision_rate"] = m.collision_rate;
  j["total_vehicles"] = m.total_vehicles;
  j["ticks"] = m.ticks;
  j["unresolved_conflicts"] = m.unresolved_conflicts;
  Json exits = Json::object();
  for (const auto& [id, t] : m.emv_exit_tick) exits[std::to_string(id)] = t;
  j["emv_exit_tick"] = std::move(exits);
  j["terminal_speed_violations"] = m.terminal_speed_violations;
  return j;
}

inline Json timing_json(const RunMetrics& m) {
  double total = 0;
  double worst = 0;
  for (double s : m.decision_time_per_tick) {
    total += s;
    worst = std::max(worst, s);
  }
  Json j;
  j["ticks"] = m.decision_time_per_tick.size();
  j["total_decision_seconds"] = total;
  j["max_tick_decision_seconds"] = worst;
  j["decision_time_per_tick"] = m.decision_time_per_tick;
  return j;
}

inline std::string protocol_text(const std::vector<std::string>& messages) {
  std::string out;
  for (const auto& m : messages) {
    out += m;
    out += '\n';
  }
  return out;
}

// ---- plot ------------------------------------------------------------------

/// Space-time diagram: one panel per lane, time to the right, cell upward.
/// A vehicle's trace is split where it changes lane. EMVs are drawn in red.
inline std::string emit_plot(const TrajectoryTable& table, const GridSpec& grid) {
  if (table.empty()) throw FormatError("cannot plot an empty trajectory table");
  int t_max = 1;
  for (const auto& r : table) t_max = std::max(t_max, r.tick);
  const double panel_w = 480;
  const double panel_h = 360;
  const double margin = 40;
  const double width = margin * 2 + panel_w;
  const double height = margin + grid.lanes * (panel_h + margin);
  auto x_of = [&](int t) { return margin + panel_w * t / t_max; };
  auto y_of = [&](int lane, int i) {
    const double top = margin + (grid.lanes - lane) * (panel_h + margin);
    return top + panel_h * (1.0 - static_cast<double>(i - 1) / std::max(1, grid.cells - 1));
  };

  std::map<VehicleId, std::vector<const TrajectoryRow*>> traces;
  for (const auto& r : table) traces[r.id].push_back(&r);
  for (auto& [id, rows] : traces)
    std::sort(rows.begin(), rows.end(), [](const TrajectoryRow* a, const TrajectoryRow* b) { return a->tick < b->tick; });

  std::string svg = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{:.0f}\" height=\"{:.0f}\" viewBox=\"0 0 {:.0f} {:.0f}\">\n",
      width, height, width, height);
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (int lane = grid.lanes; lane >= 1; --lane) {
    const double top = margin + (grid.lanes - lane) * (panel_h + margin);
    svg += fmt::format("<rect x=\"{:.2f}\" y=\"{:.2f}\" width=\"{:.2f}\" height=\"{:.2f}\" fill=\"none\" stroke=\"black\"/>\n",
                       margin, top, panel_w, panel_h);
    svg += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" font-size=\"12\">lane {}</text>\n", margin, top - 6, lane);
  }
  std::string ov_lines;
  std::string emv_lines;
  for (const auto& [id, rows] : traces) {
    const bool emv = rows.front()->cls == VehicleClass::Emv;
    std::size_t k = 0;
    while (k < rows.size()) {
      std::size_t e = k;
      while (e + 1 < rows.size() && rows[e + 1]->l == rows[k]->l && rows[e + 1]->tick == rows[e]->tick + 1) ++e;
      std::string pts;
      for (std::size_t q = k; q <= e; ++q)
        pts += fmt::format("{}{:.2f},{:.2f}", q == k ? "" : " ", x_of(rows[q]->tick), y_of(rows[q]->l, rows[q]->i));
      if (k == e) pts += fmt::format(" {:.2f},{:.2f}", x_of(rows[k]->tick) + 1, y_of(rows[k]->l, rows[k]->i));
      (emv ? emv_lines : ov_lines) += fmt::format(
          "<polyline data-id=\"{}\" points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"{}\"/>\n", id, pts,
          emv ? "#d62728" : "#7f7f7f", emv ? 2 : 1);
      k = e + 1;
    }
  }
  svg += ov_lines;
  svg += emv_lines;
  svg += "</svg>\n";
  return svg;
}

}  // namespace sdvc
