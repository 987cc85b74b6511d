#include "proxsim/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "proxsim/geometry.hpp"

namespace proxsim {
namespace {

int require_column(const CsvTable& table, const std::string& name) {
  const int idx = table.column_index(name);
  if (idx < 0)
    throw std::runtime_error("table '" + std::string(table.name()) + "' lacks column '" +
                             name + "'");
  return idx;
}

}  // namespace

RunMetrics compute_metrics(const RunLogs& logs, const DockTarget& final_target) {
  RunMetrics m;
  m.completed = true;

  const CsvTable& truth = logs.truth;
  if (truth.rows() == 0) throw std::runtime_error("truth log is empty");
  const int t_t = require_column(truth, "t_s");
  const int t_x = require_column(truth, "x_m");
  const int t_y = require_column(truth, "y_m");
  const int t_h = require_column(truth, "heading_rad");

  const size_t last = truth.rows() - 1;
  m.duration_s = truth.num(last, t_t);
  const Vec2 end_pos(truth.num(last, t_x), truth.num(last, t_y));
  m.endpoint_error_m = (end_pos - final_target.position).norm();
  m.final_separation_m = m.endpoint_error_m;
  m.final_heading_error_rad =
      std::abs(wrap_angle(truth.num(last, t_h) - final_target.approach_heading));

  const CsvTable& est = logs.estimate;
  if (est.rows() > 0) {
    const int e_t = require_column(est, "t_s");
    const int ex = require_column(est, "err_x_m");
    const int ey = require_column(est, "err_y_m");
    const int evx = require_column(est, "err_vx_mps");
    const int evy = require_column(est, "err_vy_mps");
    const int vvx = require_column(est, "var_vx_m2s2");
    const int vvy = require_column(est, "var_vy_m2s2");

    double pos_sq = 0.0, vel_sq = 0.0;
    for (size_t i = 0; i < est.rows(); ++i) {
      const double dx = est.num(i, ex), dy = est.num(i, ey);
      const double dvx = est.num(i, evx), dvy = est.num(i, evy);
      pos_sq += dx * dx + dy * dy;
      vel_sq += dvx * dvx + dvy * dvy;
    }
    m.position_rmse_m = std::sqrt(pos_sq / double(est.rows()));
    m.velocity_rmse_mps = std::sqrt(vel_sq / double(est.rows()));

    const double t_end = est.num(est.rows() - 1, e_t);
    const double t_from = 0.75 * t_end;
    double var_sum = 0.0;
    size_t var_n = 0;
    for (size_t i = 0; i < est.rows(); ++i) {
      if (est.num(i, e_t) < t_from) continue;
      var_sum += est.num(i, vvx) + est.num(i, vvy);
      ++var_n;
    }
    if (var_n > 0) m.velocity_var_steady_m2s2 = var_sum / double(var_n);
  }

  const CsvTable& meas = logs.measurements;
  if (meas.rows() > 0) {
    const int c_sensor = require_column(meas, "sensor");
    const int c_acc = require_column(meas, "accepted");
    const int c_out = require_column(meas, "truth_outlier");
    for (size_t i = 0; i < meas.rows(); ++i) {
      const std::string& sensor = meas.text(i, c_sensor);
      const bool accepted = meas.num(i, c_acc) != 0.0;
      if (sensor == "accel") {
        (accepted ? m.accel_accepted : m.accel_rejected)++;
      } else if (sensor == "range") {
        (accepted ? m.range_accepted : m.range_rejected)++;
        if (meas.num(i, c_out) != 0.0) {
          ++m.range_outliers_total;
          if (!accepted) ++m.range_outliers_rejected;
        } else {
          ++m.range_inliers_total;
          if (!accepted) ++m.range_inliers_rejected;
        }
      } else if (sensor == "vision_pose") {
        (accepted ? m.vision_accepted : m.vision_rejected)++;
      } else if (sensor == "uwb_dropout") {
        ++m.uwb_dropped_rounds;
      } else if (sensor == "cov_violation") {
        ++m.covariance_violations;
      }
    }
  }

  const CsvTable& phases = logs.phases;
  const int p_t = require_column(phases, "t_s");
  const int p_name = require_column(phases, "phase");
  for (size_t i = 0; i < phases.rows(); ++i) {
    const std::string& name = phases.text(i, p_name);
    m.phase_timeline.emplace_back(phases.num(i, p_t), name);
    if (name == "DOCKED") m.docked = true;
    if (name == "ABORT") m.aborted = true;
    if (name.rfind("FAILED", 0) == 0) {
      m.completed = false;
      m.aborted = true;
      m.failure = name.size() > 7 ? name.substr(7) : "unspecified failure";
    }
  }
  return m;
}

double percentile_nearest_rank(std::vector<double> values, double p) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const double n = double(values.size());
  auto rank = size_t(std::ceil(p / 100.0 * n));
  rank = std::max<size_t>(1, std::min(values.size(), rank));
  return values[rank - 1];
}

BatchAggregate aggregate_metrics(const std::vector<BatchRunRow>& rows) {
  BatchAggregate agg;
  agg.runs = int(rows.size());
  std::vector<double> endpoints;
  double pos_rmse_sum = 0.0, vel_rmse_sum = 0.0;
  int within = 0;
  for (const BatchRunRow& row : rows) {
    const RunMetrics& m = row.metrics;
    if (m.docked) ++agg.docked;
    if (m.aborted) ++agg.aborted;
    if (!m.completed) continue;
    ++agg.completed;
    endpoints.push_back(m.endpoint_error_m);
    pos_rmse_sum += m.position_rmse_m;
    vel_rmse_sum += m.velocity_rmse_mps;
    if (m.endpoint_error_m < 0.05) ++within;
  }
  if (agg.completed > 0) {
    agg.endpoint_p50_m = percentile_nearest_rank(endpoints, 50.0);
    agg.endpoint_p90_m = percentile_nearest_rank(endpoints, 90.0);
    agg.endpoint_p95_m = percentile_nearest_rank(endpoints, 95.0);
    agg.endpoint_max_m = *std::max_element(endpoints.begin(), endpoints.end());
    agg.within_5cm_fraction = double(within) / double(agg.completed);
    agg.position_rmse_mean_m = pos_rmse_sum / double(agg.completed);
    agg.velocity_rmse_mean_mps = vel_rmse_sum / double(agg.completed);
  }
  return agg;
}

CsvTable batch_table(const std::vector<BatchRunRow>& rows) {
  CsvTable table("mc_runs",
                 {"run", "seed", "completed", "docked", "aborted", "endpoint_error_m",
                  "position_rmse_m", "velocity_rmse_mps", "final_heading_error_rad",
                  "failure"});
  for (const BatchRunRow& row : rows) {
    const RunMetrics& m = row.metrics;
    table.append({csv_int(row.run), csv_int(long(row.seed)), csv_int(m.completed ? 1 : 0),
                  csv_int(m.docked ? 1 : 0), csv_int(m.aborted ? 1 : 0),
                  csv_num(m.endpoint_error_m), csv_num(m.position_rmse_m),
                  csv_num(m.velocity_rmse_mps), csv_num(m.final_heading_error_rad),
                  csv_text(m.failure.empty() ? "-" : m.failure)});
  }
  return table;
}

}  // namespace proxsim
