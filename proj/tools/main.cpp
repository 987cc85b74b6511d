// Command-line front end: simulate | montecarlo | selfcheck | p3p-roundtrip.
// Exit codes: 0 success, 1 scenario failure, 2 configuration error,
// 3 self-check failure.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "proxsim/monte_carlo.hpp"
#include "proxsim/selfcheck.hpp"
#include "proxsim/simulation.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json metrics_to_json(const proxsim::RunMetrics& m) {
  json j{{"completed", m.completed},
         {"failure", m.failure},
         {"duration_s", m.duration_s},
         {"endpoint_error_m", m.endpoint_error_m},
         {"position_rmse_m", m.position_rmse_m},
         {"velocity_rmse_mps", m.velocity_rmse_mps},
         {"velocity_var_steady_m2s2", m.velocity_var_steady_m2s2},
         {"final_separation_m", m.final_separation_m},
         {"final_heading_error_rad", m.final_heading_error_rad},
         {"docked", m.docked},
         {"aborted", m.aborted},
         {"accel_accepted", m.accel_accepted},
         {"accel_rejected", m.accel_rejected},
         {"range_accepted", m.range_accepted},
         {"range_rejected", m.range_rejected},
         {"range_outliers_total", m.range_outliers_total},
         {"range_outliers_rejected", m.range_outliers_rejected},
         {"range_inliers_total", m.range_inliers_total},
         {"range_inliers_rejected", m.range_inliers_rejected},
         {"vision_accepted", m.vision_accepted},
         {"vision_rejected", m.vision_rejected},
         {"uwb_dropped_rounds", m.uwb_dropped_rounds},
         {"covariance_violations", m.covariance_violations}};
  json timeline = json::array();
  for (const auto& [t, phase] : m.phase_timeline)
    timeline.push_back(json{{"t_s", t}, {"phase", phase}});
  j["phase_timeline"] = timeline;
  return j;
}

json aggregate_to_json(const proxsim::BatchAggregate& a) {
  return json{{"runs", a.runs},
              {"completed", a.completed},
              {"docked", a.docked},
              {"aborted", a.aborted},
              {"endpoint_p50_m", a.endpoint_p50_m},
              {"endpoint_p90_m", a.endpoint_p90_m},
              {"endpoint_p95_m", a.endpoint_p95_m},
              {"endpoint_max_m", a.endpoint_max_m},
              {"within_5cm_fraction", a.within_5cm_fraction},
              {"position_rmse_mean_m", a.position_rmse_mean_m},
              {"velocity_rmse_mean_mps", a.velocity_rmse_mean_mps}};
}

void write_json(const std::string& path, const json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(2) << "\n";
}

int run_simulate(const std::string& config, const std::string& out_dir,
                 const std::string& json_path, bool quiet) {
  const proxsim::Scenario sc = proxsim::Scenario::from_file(config);
  const proxsim::RunResult rr = proxsim::run_scenario(sc);

  fs::create_directories(out_dir);
  rr.logs.write_all(out_dir);
  if (!json_path.empty()) {
    json j = metrics_to_json(rr.metrics);
    j["scenario"] = sc.name;
    j["seed"] = sc.seed;
    write_json(json_path, j);
  }

  const proxsim::RunMetrics& m = rr.metrics;
  if (!quiet) {
    std::printf("scenario %-24s seed %llu  t_end %.2f s\n", sc.name.c_str(),
                static_cast<unsigned long long>(sc.seed), m.duration_s);
    std::printf("  endpoint error %.4f m, pos RMSE %.4f m, vel RMSE %.4f m/s\n",
                m.endpoint_error_m, m.position_rmse_m, m.velocity_rmse_mps);
    std::printf("  ranges %ld/%ld accepted, accel %ld/%ld, vision %ld/%ld, dropouts %ld\n",
                m.range_accepted, m.range_accepted + m.range_rejected, m.accel_accepted,
                m.accel_accepted + m.accel_rejected, m.vision_accepted,
                m.vision_accepted + m.vision_rejected, m.uwb_dropped_rounds);
    for (const auto& [t, phase] : m.phase_timeline)
      std::printf("  %8.3f s  %s\n", t, phase.c_str());
    std::printf("  result: %s\n", !m.completed ? ("FAILED " + m.failure).c_str()
                                  : m.docked   ? "DOCKED"
                                  : m.aborted  ? "ABORTED"
                                               : "completed");
  }
  return (m.completed && !m.aborted) ? 0 : 1;
}

int run_montecarlo(const std::string& config, int runs, std::uint64_t seed,
                   const std::string& out_dir, const std::string& json_path,
                   bool quiet) {
  const proxsim::Scenario sc = proxsim::Scenario::from_file(config);
  const auto batch = proxsim::run_monte_carlo(
      sc, runs, seed, [&](const proxsim::BatchRunRow& row) {
        if (quiet) return;
        std::printf("run %3d  seed %-8llu endpoint %.4f m%s%s\n", row.run,
                    static_cast<unsigned long long>(row.seed),
                    row.metrics.endpoint_error_m, row.metrics.docked ? "  docked" : "",
                    row.metrics.completed ? "" : "  FAILED");
      });

  fs::create_directories(out_dir);
  proxsim::batch_table(batch.rows).write_file(
      (fs::path(out_dir) / "mc_runs.csv").string(),
      "scenario=" + sc.name + " runs=" + std::to_string(runs) +
          " seed_base=" + std::to_string(seed));

  if (!json_path.empty()) {
    json j{{"scenario", sc.name},
           {"runs", runs},
           {"seed_base", seed},
           {"aggregate", aggregate_to_json(batch.aggregate)}};
    json detail = json::array();
    for (const auto& row : batch.rows) {
      json r = metrics_to_json(row.metrics);
      r["run"] = row.run;
      r["seed"] = row.seed;
      detail.push_back(std::move(r));
    }
    j["runs_detail"] = detail;
    write_json(json_path, j);
  }

  const auto& a = batch.aggregate;
  if (!quiet) {
    std::printf("%d runs: %d completed, %d docked, %d aborted\n", a.runs, a.completed,
                a.docked, a.aborted);
    std::printf("endpoint error p50 %.4f  p90 %.4f  p95 %.4f  max %.4f m\n",
                a.endpoint_p50_m, a.endpoint_p90_m, a.endpoint_p95_m, a.endpoint_max_m);
    std::printf("within 5 cm: %.1f%%, mean pos RMSE %.4f m, mean vel RMSE %.4f m/s\n",
                100.0 * a.within_5cm_fraction, a.position_rmse_mean_m,
                a.velocity_rmse_mean_mps);
  }
  return a.completed == a.runs ? 0 : 1;
}

int run_selfcheck(const std::string& json_path, bool quiet) {
  const proxsim::SelfCheckReport report = proxsim::self_check();
  if (!quiet || !report.all_pass()) {
    for (const auto& item : report.items)
      std::printf("[%s] %-24s %s\n", item.pass ? "PASS" : "FAIL", item.name.c_str(),
                  item.detail.c_str());
  }
  if (!json_path.empty()) {
    json items = json::array();
    for (const auto& item : report.items)
      items.push_back(
          json{{"name", item.name}, {"pass", item.pass}, {"detail", item.detail}});
    write_json(json_path, json{{"all_pass", report.all_pass()}, {"items", items}});
  }
  return report.all_pass() ? 0 : 3;
}

int run_p3p(int trials, std::uint64_t seed, bool quiet) {
  const proxsim::P3pRoundTripStats st = proxsim::p3p_round_trip(trials, seed);
  const bool pass = st.failures == 0 && st.max_rotation_err_rad < 1e-6 &&
                    st.max_translation_err_m < 1e-6 && st.max_orthonormality < 1e-9;
  if (!quiet || !pass) {
    std::printf("%d poses: max rotation err %.3e rad, max translation err %.3e m\n",
                st.trials, st.max_rotation_err_rad, st.max_translation_err_m);
    std::printf("max |R'R - I| %.3e, failures %d -> %s\n", st.max_orthonormality,
                st.failures, pass ? "PASS" : "FAIL");
  }
  return pass ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"planar proximity-operations simulation and sensor fusion"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string out_dir = "out";
  std::string json_path;
  bool quiet = false;
  app.add_option("--out-dir", out_dir, "directory for run logs")
      ->capture_default_str();
  app.add_option("--json-metrics", json_path, "write metrics JSON to this path");
  app.add_flag("--quiet", quiet, "suppress per-run output");

  std::string sim_config;
  CLI::App* sim = app.add_subcommand("simulate", "run one scenario and write its logs");
  sim->add_option("config", sim_config, "scenario config file")->required();

  std::string mc_config;
  int mc_runs = 50;
  std::uint64_t mc_seed = 1;
  CLI::App* mc = app.add_subcommand("montecarlo", "run a batch with per-run seeds");
  mc->add_option("config", mc_config, "scenario config file")->required();
  mc->add_option("--runs", mc_runs, "number of runs")->capture_default_str();
  mc->add_option("--seed", mc_seed, "seed base (run i uses seed+i)")
      ->capture_default_str();

  CLI::App* selfcheck =
      app.add_subcommand("selfcheck", "Jacobian/P3P/gating/SPD self-verification");

  int p3p_trials = 1000;
  std::uint64_t p3p_seed = 7;
  CLI::App* p3p = app.add_subcommand("p3p-roundtrip", "synthetic P3P round-trip check");
  p3p->add_option("--trials", p3p_trials, "number of random poses")
      ->capture_default_str();
  p3p->add_option("--seed", p3p_seed, "RNG seed")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;  // bad usage is a configuration error
  }

  try {
    if (sim->parsed()) return run_simulate(sim_config, out_dir, json_path, quiet);
    if (mc->parsed())
      return run_montecarlo(mc_config, mc_runs, mc_seed, out_dir, json_path, quiet);
    if (selfcheck->parsed()) return run_selfcheck(json_path, quiet);
    if (p3p->parsed()) return run_p3p(p3p_trials, p3p_seed, quiet);
  } catch (const proxsim::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 2;
}
