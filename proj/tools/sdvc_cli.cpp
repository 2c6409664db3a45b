// Command-line front end: run, gen, ingest, oracle, compare, plot, sweep.

#include <filesystem>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "sdvc/baseline_idm.hpp"
#include "sdvc/engine.hpp"
#include "sdvc/io.hpp"
#include "sdvc/oracle.hpp"

namespace fs = std::filesystem;

namespace {

void emit(const std::string& text, const std::string& path) {
  if (path.empty() || path == "-")
    std::cout << text;
  else
    sdvc::write_file(path, text);
}

sdvc::RunResult run_controller(const sdvc::Scenario& sc, const std::string& controller) {
  if (controller == "idm") return sdvc::run_baseline(sc);
  return sdvc::run(sc);
}

double ratio(double sdvc_f, double opt_f) {
  if (opt_f == 0) return sdvc_f == 0 ? 1.0 : std::numeric_limits<double>::infinity();
  return sdvc_f / opt_f;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cooperative EMV passage simulator"};
  app.require_subcommand(1);

  std::string scenario_path;
  std::string controller = "sdvc";
  std::optional<std::uint64_t> seed;
  std::string out_dir = ".";
  auto* run_cmd = app.add_subcommand("run", "Simulate a scenario");
  run_cmd->add_option("scenario", scenario_path, "Scenario file")->required()->check(CLI::ExistingFile);
  run_cmd->add_option("--controller", controller, "sdvc or idm")->check(CLI::IsMember({"sdvc", "idm"}));
  run_cmd->add_option("--seed", seed, "Override the scenario seed");
  run_cmd->add_option("--out-dir", out_dir, "Directory for outputs");

  double density = 0;
  int delta_v = 0;
  int lanes = 3;
  double length = 1200;
  int n_emv = 1;
  std::uint64_t gen_seed = 0;
  std::string out_path;
  auto* gen_cmd = app.add_subcommand("gen", "Generate a random scenario");
  gen_cmd->add_option("density", density, "Vehicles per km, all lanes")->required();
  gen_cmd->add_option("delta_v", delta_v, "v_max minus mean OV speed")->required();
  gen_cmd->add_option("lanes", lanes, "Lane count")->required();
  gen_cmd->add_option("length", length, "Segment length in metres")->required();
  gen_cmd->add_option("--emv", n_emv, "Number of EMVs");
  gen_cmd->add_option("--seed", gen_seed, "Generator seed");
  gen_cmd->add_option("--out", out_path, "Output file (default stdout)");

  std::string frames_path;
  int cells = 70;
  auto* ingest_cmd = app.add_subcommand("ingest", "Convert frame rows to a scenario");
  ingest_cmd->add_option("frames", frames_path, "CSV rows x_m,lane,speed_mps,class")->required()->check(
      CLI::ExistingFile);
  ingest_cmd->add_option("--cells", cells, "Cells per lane");
  ingest_cmd->add_option("--lanes", lanes, "Lane count");
  ingest_cmd->add_option("--out", out_path, "Output file (default stdout)");

  std::uint64_t budget = 5'000'000;
  auto* oracle_cmd = app.add_subcommand("oracle", "Exact optimum on a tiny instance");
  oracle_cmd->add_option("scenario", scenario_path, "Scenario file")->required()->check(CLI::ExistingFile);
  oracle_cmd->add_option("--budget", budget, "Search node limit");

  auto* compare_cmd = app.add_subcommand("compare", "Cooperative vs. IDM baseline");
  compare_cmd->add_option("scenario", scenario_path, "Scenario file")->required()->check(CLI::ExistingFile);

  std::string trajectory_path;
  auto* plot_cmd = app.add_subcommand("plot", "Space-time SVG of a trajectory table");
  plot_cmd->add_option("trajectory", trajectory_path, "Trajectory CSV")->required()->check(CLI::ExistingFile);
  plot_cmd->add_option("--scenario", scenario_path, "Scenario file supplying the grid");
  plot_cmd->add_option("--out", out_path, "Output file (default stdout)");

  std::vector<double> densities{88, 107, 117};
  std::vector<int> delta_vs{1, 2, 3};
  int seeds = 5;
  auto* sweep_cmd = app.add_subcommand("sweep", "Mean f' per density and delta_v");
  sweep_cmd->add_option("--densities", densities, "Densities, vehicles per km");
  sweep_cmd->add_option("--delta-v", delta_vs, "Speed heterogeneity levels");
  sweep_cmd->add_option("--lanes", lanes, "Lane count");
  sweep_cmd->add_option("--length", length, "Segment length in metres");
  sweep_cmd->add_option("--emv", n_emv, "EMVs per scenario");
  sweep_cmd->add_option("--seeds", seeds, "Seeds per configuration");
  sweep_cmd->add_option("--controller", controller, "sdvc or idm")->check(CLI::IsMember({"sdvc", "idm"}));

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run_cmd) {
      auto sc = sdvc::load_scenario(scenario_path);
      if (seed) sc.config.seed = *seed;
      const auto result = run_controller(sc, controller);
      fs::create_directories(out_dir);
      const auto metrics = sdvc::metrics_json(result.metrics).dump(2) + "\n";
      sdvc::write_file((fs::path(out_dir) / "metrics.json").string(), metrics);
      sdvc::write_file((fs::path(out_dir) / "timing.json").string(), sdvc::timing_json(result.metrics).dump(2) + "\n");
      sdvc::write_file((fs::path(out_dir) / "trajectory.csv").string(), sdvc::trajectory_csv(result.trajectory));
      sdvc::write_file((fs::path(out_dir) / "protocol.log").string(), sdvc::protocol_text(result.protocol));
      std::cout << metrics;
    } else if (*gen_cmd) {
      const auto sc = sdvc::gen_scenario({density, delta_v, lanes, length, n_emv, gen_seed});
      emit(sdvc::serialize_scenario(sc), out_path);
    } else if (*ingest_cmd) {
      sdvc::GridSpec grid;
      grid.cells = cells;
      grid.lanes = lanes;
      try {
        emit(sdvc::serialize_scenario(sdvc::ingest_frames_file(frames_path, grid, {})), out_path);
      } catch (const sdvc::IngestError& e) {
        std::cerr << "error: " << e.what() << "\n";
        for (const auto& r : e.rows()) std::cerr << "  " << r << "\n";
        return 2;
      }
    } else if (*oracle_cmd) {
      const auto sc = sdvc::load_scenario(scenario_path);
      const auto opt = sdvc::enumerate_optimal(sc, budget);
      const auto ours = sdvc::run(sc);
      sdvc::Json j;
      j["status"] = sdvc::to_string(opt.status);
      j["optimal_f_prime"] = opt.status == sdvc::OracleStatus::Infeasible ? sdvc::Json(nullptr)
                                                                          : sdvc::Json(opt.optimal_f_prime);
      j["node_count"] = opt.node_count;
      j["sdvc_f_prime"] = ours.metrics.f_prime;
      j["sdvc_collisions"] = ours.metrics.collision_ids.size();
      const double r = ratio(ours.metrics.f_prime, opt.optimal_f_prime);
      j["ratio"] = std::isfinite(r) ? sdvc::Json(r) : sdvc::Json("inf");
      std::cout << j.dump(2) << "\n";
    } else if (*compare_cmd) {
      const auto sc = sdvc::load_scenario(scenario_path);
      const auto a = sdvc::run(sc);
      const auto b = sdvc::run_baseline(sc);
      auto exit_of = [](const sdvc::RunMetrics& m) {
        int worst = 0;
        for (const auto& [id, t] : m.emv_exit_tick) worst = std::max(worst, t);
        return worst;
      };
      fmt::print("{:<24}{:>12}{:>12}\n", "metric", "sdvc", "idm");
      fmt::print("{:<24}{:>12}{:>12}\n", "f_prime", a.metrics.f_prime, b.metrics.f_prime);
      fmt::print("{:<24}{:>12}{:>12}\n", "f", a.metrics.f, b.metrics.f);
      fmt::print("{:<24}{:>12}{:>12}\n", "ov_speed_changes", a.metrics.ov_speed_changes, b.metrics.ov_speed_changes);
      fmt::print("{:<24}{:>12}{:>12}\n", "ov_lane_changes", a.metrics.ov_lane_changes, b.metrics.ov_lane_changes);
      fmt::print("{:<24}{:>12}{:>12}\n", "emv_lane_changes", a.metrics.emv_lane_changes, b.metrics.emv_lane_changes);
      fmt::print("{:<24}{:>12}{:>12}\n", "collisions", a.metrics.collision_ids.size(), b.metrics.collision_ids.size());
      fmt::print("{:<24}{:>12}{:>12}\n", "last_emv_exit_tick", exit_of(a.metrics), exit_of(b.metrics));
      fmt::print("{:<24}{:>12}{:>12}\n", "ticks", a.metrics.ticks, b.metrics.ticks);
    } else if (*plot_cmd) {
      const auto table = sdvc::parse_trajectory_csv(sdvc::read_file(trajectory_path));
      sdvc::GridSpec grid;
      if (!scenario_path.empty()) {
        grid = sdvc::load_scenario(scenario_path).grid;
      } else {
        grid.cells = 1;
        grid.lanes = 1;
        for (const auto& r : table) {
          grid.cells = std::max(grid.cells, r.i);
          grid.lanes = std::max(grid.lanes, r.l);
        }
      }
      emit(sdvc::emit_plot(table, grid), out_path);
    } else if (*sweep_cmd) {
      fmt::print("density,delta_v,lanes,seeds,mean_f_prime,mean_ov_speed_changes,mean_ov_lane_changes,collisions\n");
      for (double d : densities) {
        for (int dv : delta_vs) {
          double fp = 0;
          double sc_sum = 0;
          double lc_sum = 0;
          std::size_t hits = 0;
          for (int s = 0; s < seeds; ++s) {
            const auto sc = sdvc::gen_scenario({d, dv, lanes, length, n_emv, static_cast<std::uint64_t>(s + 1)});
            const auto r = run_controller(sc, controller);
            fp += r.metrics.f_prime;
            sc_sum += static_cast<double>(r.metrics.ov_speed_changes);
            lc_sum += static_cast<double>(r.metrics.ov_lane_changes);
            hits += r.metrics.collision_ids.size();
          }
          fmt::print("{},{},{},{},{:.3f},{:.3f},{:.3f},{}\n", d, dv, lanes, seeds, fp / seeds, sc_sum / seeds,
                     lc_sum / seeds, hits);
        }
      }
    }
  } catch (const sdvc::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    for (const auto& issue : e.issues()) std::cerr << "  " << issue << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
