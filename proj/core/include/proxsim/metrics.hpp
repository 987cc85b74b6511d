/// Per-run metrics and batch aggregation.  Everything here is computed from
/// the run logs (round-tripped CSV values), so recomputing from the written
/// files reproduces the in-memory numbers exactly.
#pragma once

#include <string>
#include <utility>
#include <vector>

#include "proxsim/guidance.hpp"
#include "proxsim/logging.hpp"

namespace proxsim {

struct RunMetrics {
  bool completed{false};
  std::string failure;  // diagnostic when the run ended early

  double duration_s{0.0};
  double endpoint_error_m{0.0};
  double position_rmse_m{0.0};
  double velocity_rmse_mps{0.0};
  double velocity_var_steady_m2s2{0.0};  // mean var trace, last quarter of run
  double final_separation_m{0.0};
  double final_heading_error_rad{0.0};
  bool docked{false};
  bool aborted{false};

  long accel_accepted{0};
  long accel_rejected{0};
  long range_accepted{0};
  long range_rejected{0};
  long range_outliers_total{0};
  long range_outliers_rejected{0};
  long range_inliers_total{0};
  long range_inliers_rejected{0};
  long vision_accepted{0};
  long vision_rejected{0};
  long uwb_dropped_rounds{0};
  long covariance_violations{0};

  std::vector<std::pair<double, std::string>> phase_timeline;
};

/// Derive metrics from the logs; `final_target` is the dock target at the end
/// of the run.
RunMetrics compute_metrics(const RunLogs& logs, const DockTarget& final_target);

struct BatchRunRow {
  int run{0};
  std::uint64_t seed{0};
  RunMetrics metrics;
};

struct BatchAggregate {
  int runs{0};
  int completed{0};
  int docked{0};
  int aborted{0};
  double endpoint_p50_m{0.0};
  double endpoint_p90_m{0.0};
  double endpoint_p95_m{0.0};
  double endpoint_max_m{0.0};
  double within_5cm_fraction{0.0};
  double position_rmse_mean_m{0.0};
  double velocity_rmse_mean_mps{0.0};
};

/// Nearest-rank percentile of a sample (p in [0, 100]).
double percentile_nearest_rank(std::vector<double> values, double p);

BatchAggregate aggregate_metrics(const std::vector<BatchRunRow>& rows);

/// Flat per-run table (run, seed, headline metrics) for mc_runs.csv.
CsvTable batch_table(const std::vector<BatchRunRow>& rows);

}  // namespace proxsim
