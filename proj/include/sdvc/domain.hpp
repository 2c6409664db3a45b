#pragma once

// Core discrete types of the cellular road model: grid geometry, vehicle
// states, run configuration, and the measurement discretization used when
// importing recorded traffic.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <boost/rational.hpp>

namespace sdvc {

using Rational = boost::rational<std::int64_t>;
using VehicleId = std::uint32_t;

inline double to_double(const Rational& r) { return boost::rational_cast<double>(r); }

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidMeasurement : public Error {
 public:
  using Error::Error;
};

class OutOfRange : public Error {
 public:
  using Error::Error;
};

class UndefinedMean : public Error {
 public:
  using Error::Error;
};

enum class VehicleClass { Emv, Ov };

inline const char* to_string(VehicleClass c) { return c == VehicleClass::Emv ? "EMV" : "OV"; }

inline VehicleClass parse_vehicle_class(const std::string& s) {
  if (s == "EMV" || s == "emv") return VehicleClass::Emv;
  if (s == "OV" || s == "ov") return VehicleClass::Ov;
  throw Error("unknown vehicle class '" + s + "'");
}

struct GridSpec {
  int cells = 70;               // I, cells per lane
  int lanes = 3;                // L
  double cell_length_m = 6.0;   // A
  double cell_width_m = 3.5;    // B, informational only
};

/// One vehicle at one tick. Every vehicle occupies exactly one cell; speed is
/// measured in cells per tick. `initial_speed` is the speed the vehicle had at
/// t = 0 and is carried along for the terminal/efficiency speed floor.
struct VehicleState {
  VehicleId id = 0;
  VehicleClass cls = VehicleClass::Ov;
  int i = 1;
  int l = 1;
  int v = 0;
  bool cooperating = false;
  int initial_speed = 0;

  bool is_emv() const { return cls == VehicleClass::Emv; }
  bool is_ov() const { return cls == VehicleClass::Ov; }

  friend bool operator==(const VehicleState&, const VehicleState&) = default;
};

/// Same vehicle with a new pose; bookkeeping fields are preserved.
inline VehicleState with_pose(VehicleState s, int i, int v, int l) {
  s.i = i;
  s.v = v;
  s.l = l;
  return s;
}

struct ScenarioConfig {
  int horizon = 72;           // T, ticks
  int v_max = 5;
  int accel = 1;              // maximum acceleration, levels per tick
  int decel = 1;              // maximum deceleration, levels per tick
  double c1 = 1.0;            // OV speed change weight
  double c2 = 1.0;            // EMV lane change weight
  double c3 = 1.0;            // OV lane change weight
  double w1 = 1.0;            // behaviour-change term
  double w2 = 2.0;            // lane speed deviation term
  double w3 = 5.0;            // safety/efficiency penalty
  double comm_range_m = 400.0;
  std::uint64_t seed = 0;
  std::optional<int> ov_mean_speed_override;
  int platoon_gap = 1;
  bool stop_when_emvs_exit = true;

  friend bool operator==(const ScenarioConfig&, const ScenarioConfig&) = default;
};

struct Scenario {
  GridSpec grid;
  ScenarioConfig config;
  std::vector<VehicleState> vehicles;
};

using StateMap = std::map<VehicleId, VehicleState>;

inline StateMap to_state_map(const std::vector<VehicleState>& vs) {
  StateMap m;
  for (const auto& v : vs) m.emplace(v.id, v);
  return m;
}

/// Speed in m/s to a level, rounding half up, clamped to [0, v_max].
inline int discretize_speed(double speed_mps, int v_max = 5, double cell_length_m = 6.0) {
  if (!(speed_mps >= 0.0)) throw InvalidMeasurement("negative or NaN speed measurement");
  const double level = std::floor(speed_mps / cell_length_m + 0.5);
  if (level > v_max) return v_max;
  return static_cast<int>(level);
}

/// Longitudinal offset in metres to a 1-based cell index.
inline int discretize_position(double x_m, const GridSpec& grid) {
  if (!(x_m >= 0.0) || x_m >= grid.cells * grid.cell_length_m)
    throw OutOfRange("position " + std::to_string(x_m) + " m lies outside the segment");
  const int cell = static_cast<int>(std::floor(x_m / grid.cell_length_m)) + 1;
  return std::min(cell, grid.cells);
}

/// Centre of a cell in metres; inverse of discretize_position on [1, I].
inline double cell_center_m(int cell, const GridSpec& grid) {
  return (cell - 0.5) * grid.cell_length_m;
}

/// Mean OV speed at t = 0 (or the configured override), kept exact.
inline Rational mean_initial_ov_speed(const Scenario& scenario) {
  if (scenario.config.ov_mean_speed_override) return Rational(*scenario.config.ov_mean_speed_override);
  std::int64_t sum = 0;
  std::int64_t count = 0;
  for (const auto& v : scenario.vehicles) {
    if (!v.is_ov()) continue;
    sum += v.v;
    ++count;
  }
  if (count == 0) throw UndefinedMean("scenario has no ordinary vehicles");
  return Rational(sum, count);
}

/// Same as mean_initial_ov_speed but yields v_max when there are no OVs, so
/// EMV-only scenarios can still run.
inline Rational ov_speed_floor_reference(const Scenario& scenario) {
  try {
    return mean_initial_ov_speed(scenario);
  } catch (const UndefinedMean&) {
    return Rational(scenario.config.v_max);
  }
}

}  // namespace sdvc
