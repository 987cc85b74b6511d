#include "proxsim/scenario.hpp"

#include <cmath>

namespace proxsim {

Vec2 Scenario::target_center_at(double t) const {
  return target_center + t * target_velocity;
}

DockTarget Scenario::dock_target(double t) const {
  DockTarget d;
  const Vec2 center = target_center_at(t);
  if (waypoint_only) {
    d.position = center;
    d.approach_heading = wrap_angle(target_heading + M_PI);
    return d;
  }
  const double standoff = markers.cube_size_m / 2.0 + dock_clearance_m;
  d.position = center + rot2(target_heading) * Vec2(standoff, 0.0);
  // mated chaser faces the +x face of the target
  d.approach_heading = wrap_angle(target_heading + M_PI);
  return d;
}

Scenario Scenario::from_file(const std::string& path) {
  return from_config(ConfigFile::parse_file(path));
}

Scenario Scenario::from_config(const ConfigFile& cfg) {
  Scenario sc;
  sc.name = cfg.get_string_or("scenario.name", "scenario");
  sc.duration_s = cfg.get_double("sim.duration_s");
  sc.sim_rate_hz = cfg.get_double_or("sim.rate_hz", 1000.0);
  sc.seed = static_cast<std::uint64_t>(cfg.get_int_or("sim.seed", 1));

  sc.params.mass_kg = cfg.get_double_or("module.mass_kg", 0.795);
  sc.params.inertia_kgm2 = cfg.get_double_or("module.inertia_kgm2", 4.987689e-3);
  sc.params.friction_mu = cfg.get_double_or("module.friction_mu", 0.015);
  sc.params.gravity_mps2 = cfg.get_double_or("module.gravity_mps2", 9.80665);
  sc.params.nozzle_thrust_n = cfg.get_double_or("module.nozzle_thrust_n", 0.1);
  sc.params.nozzle_arm_m = cfg.get_double_or("module.nozzle_arm_m", 0.05);
  sc.params.rot_friction_nms = cfg.get_double_or("module.rot_friction_nms", 6.915e-4);

  sc.initial_truth.position =
      Vec2(cfg.get_double_or("initial.x_m", 0.5), cfg.get_double_or("initial.y_m", 0.5));
  sc.initial_truth.heading = cfg.get_double_or("initial.heading_rad", 0.0);
  sc.initial_truth.velocity_body = Vec2(cfg.get_double_or("initial.vx_mps", 0.0),
                                        cfg.get_double_or("initial.vy_mps", 0.0));
  sc.initial_truth.rate = cfg.get_double_or("initial.rate_radps", 0.0);
  if (cfg.has("initial.random_region")) {
    const auto region = cfg.get_double_list("initial.random_region");
    if (region.size() != 4)
      throw ConfigError("config: initial.random_region needs [xmin, ymin, xmax, ymax]");
    sc.randomize_start = true;
    sc.start_region_min = Vec2(region[0], region[1]);
    sc.start_region_max = Vec2(region[2], region[3]);
  }
  sc.randomize_heading = cfg.get_bool_or("initial.random_heading", false);

  sc.target_center =
      Vec2(cfg.get_double_or("target.x_m", 1.5), cfg.get_double_or("target.y_m", 1.5));
  sc.target_heading = cfg.get_double_or("target.heading_rad", 0.0);
  sc.target_velocity = Vec2(cfg.get_double_or("target.vx_mps", 0.0),
                            cfg.get_double_or("target.vy_mps", 0.0));
  sc.waypoint_only = cfg.get_bool_or("target.waypoint_only", false);
  sc.dock_clearance_m = cfg.get_double_or("target.dock_clearance_m", 0.055);

  const auto anchor_list =
      cfg.get_double_list_or("uwb.anchors", {0.0, 0.0, 3.0, 0.0, 3.0, 3.0, 0.0, 3.0});
  if (anchor_list.size() % 2 != 0)
    throw ConfigError("config: uwb.anchors needs an even number of values");
  for (size_t i = 0; i + 1 < anchor_list.size(); i += 2)
    sc.anchors.positions.emplace_back(anchor_list[i], anchor_list[i + 1]);
  sc.uwb_rate_hz = cfg.get_double_or("uwb.rate_hz", 50.0);
  sc.uwb_jitter_s = cfg.get_double_or("uwb.jitter_s", 0.0);
  sc.uwb.inlier_sigma_m = cfg.get_double_or("uwb.inlier_sigma_m", 0.01);
  sc.uwb.outlier_sigma_m = cfg.get_double_or("uwb.outlier_sigma_m", 0.10);
  sc.uwb.outlier_prob = cfg.get_double_or("uwb.outlier_prob", 0.10);
  sc.uwb.nearfield_radius_m = cfg.get_double_or("uwb.nearfield_radius_m", 0.10);
  const auto antenna = cfg.get_double_list_or("uwb.antenna_offset_m", {0.0, 0.0});
  if (antenna.size() != 2)
    throw ConfigError("config: uwb.antenna_offset_m needs [x, y]");

  sc.imu_rate_hz = cfg.get_double_or("imu.rate_hz", 100.0);
  sc.imu.gyro_sigma_radps = cfg.get_double_or("imu.gyro_sigma_radps", 0.0035);
  sc.imu.attitude_sigma_rad = cfg.get_double_or("imu.attitude_sigma_rad", 0.002);
  sc.imu.accel_sigma_mps2 =
      cfg.get_double_or("imu.accel_sigma_mps2", 0.05 * 9.80665);

  sc.vision_enabled = cfg.get_bool_or("vision.enabled", true);
  sc.vision_rate_hz = cfg.get_double_or("vision.rate_hz", 20.0);
  sc.feature_sigma_rectified = cfg.get_double_or("vision.feature_sigma", 0.0025);
  sc.intrinsics.focal_px = cfg.get_double_or("vision.focal_px", 400.0);
  sc.intrinsics.max_abs_rectified = cfg.get_double_or("vision.max_abs_rectified", 0.7);
  sc.intrinsics.min_depth_m = cfg.get_double_or("vision.min_depth_m", 0.02);
  sc.intrinsics.max_depth_m = cfg.get_double_or("vision.max_depth_m", 5.0);
  sc.mount.position_body = Vec2(cfg.get_double_or("vision.mount_x_m", 0.0),
                                cfg.get_double_or("vision.mount_y_m", 0.0));
  sc.mount.heading_rad = cfg.get_double_or("vision.mount_heading_rad", 0.0);
  sc.markers = make_cube_markers(cfg.get_double_or("vision.cube_size_m", 0.1));
  sc.vision_filter.feature_sigma_rectified = sc.feature_sigma_rectified;
  if (cfg.has("vision.filter_feature_sigma"))
    sc.vision_filter.feature_sigma_rectified = cfg.get_double("vision.filter_feature_sigma");
  sc.vision_filter.quat_process_var =
      cfg.get_double_or("vision.quat_process_var", sc.vision_filter.quat_process_var);
  sc.vision_filter.position_process_var = cfg.get_double_or(
      "vision.position_process_var", sc.vision_filter.position_process_var);
  sc.vision_filter.velocity_process_var = cfg.get_double_or(
      "vision.velocity_process_var", sc.vision_filter.velocity_process_var);
  sc.vision_filter.convergence_pos_3sigma_m = cfg.get_double_or(
      "vision.convergence_pos_3sigma_m", sc.vision_filter.convergence_pos_3sigma_m);

  const double accel_sigma =
      cfg.get_double_or("filter.accel_sigma_mps2", sc.imu.accel_sigma_mps2);
  sc.filter.accel_sigma_mps2 = Vec2(accel_sigma, accel_sigma);
  sc.filter.range_var_m2 = cfg.get_double_or("filter.range_var_m2", 0.08 * 0.08);
  const auto vis_var =
      cfg.get_double_list_or("filter.vision_var", {0.001, 0.001, 0.00225});
  if (vis_var.size() != 3)
    throw ConfigError("config: filter.vision_var needs [x, y, psi] variances");
  sc.filter.vision_var = Vec3(vis_var[0], vis_var[1], vis_var[2]);
  const auto proc = cfg.get_double_list_or("filter.accel_process_var", {8e-4, 8e-4});
  if (proc.size() != 2)
    throw ConfigError("config: filter.accel_process_var needs [x, y]");
  sc.filter.accel_process_var = Vec2(proc[0], proc[1]);
  sc.filter.range_gate_sq = cfg.get_double_or("filter.range_gate_sq", 15.14);
  sc.filter.vector_gate_sq = cfg.get_double_or("filter.vector_gate_sq", 18.42);
  sc.filter.gating_enabled = cfg.get_bool_or("filter.gating", true);
  sc.filter.accel_updates_enabled = cfg.get_bool_or("filter.accel_updates", true);
  sc.filter.underweight_factor = cfg.get_double_or("filter.underweight_factor", 4.0);
  sc.filter.underweight_updates = cfg.get_int_or("filter.underweight_updates", 5);
  sc.filter.underweight_gap_s = cfg.get_double_or("filter.underweight_gap_s", 0.5);
  sc.filter.antenna_offset_body = Vec2(antenna[0], antenna[1]);
  const auto init_var =
      cfg.get_double_list_or("filter.initial_var", {0.25, 0.25, 0.01, 0.01});
  if (init_var.size() != 4)
    throw ConfigError("config: filter.initial_var needs 4 values");
  sc.filter.initial_var = Vec4(init_var[0], init_var[1], init_var[2], init_var[3]);

  const std::string mode = cfg.get_string_or("guidance.mode", "closed_loop");
  if (mode == "closed_loop")
    sc.mode = GuidanceMode::kClosedLoop;
  else if (mode == "script")
    sc.mode = GuidanceMode::kScript;
  else if (mode == "none")
    sc.mode = GuidanceMode::kNone;
  else
    throw ConfigError("config: guidance.mode must be closed_loop, script, or none");

  sc.guidance.rate_hz = cfg.get_double_or("guidance.rate_hz", 50.0);
  sc.guidance.settle_cov_trace_m2 =
      cfg.get_double_or("guidance.settle_cov_trace_m2", 0.01);
  sc.guidance.los_deadband_rad = cfg.get_double_or("guidance.los_deadband_rad", 0.05);
  sc.guidance.handover_radius_m = cfg.get_double_or("guidance.handover_radius_m", 0.10);
  sc.guidance.dock_radius_m = cfg.get_double_or("guidance.dock_radius_m", 0.02);
  sc.guidance.align_crosstrack_m = cfg.get_double_or("guidance.align_crosstrack_m", 0.01);
  sc.guidance.dock_heading_bound_rad =
      cfg.get_double_or("guidance.dock_heading_bound_rad", 0.0873);
  sc.guidance.heading_gain_nm = cfg.get_double_or("guidance.heading_gain_nm", 0.02);
  sc.guidance.heading_rate_gain_nms =
      cfg.get_double_or("guidance.heading_rate_gain_nms", 0.03);
  sc.guidance.range_gain_hz = cfg.get_double_or("guidance.range_gain_hz", 0.5);
  sc.guidance.speed_gain_hz = cfg.get_double_or("guidance.speed_gain_hz", 3.0);
  sc.guidance.max_speed_mps = cfg.get_double_or("guidance.max_speed_mps", 0.1);
  sc.guidance.dock_speed_mps = cfg.get_double_or("guidance.dock_speed_mps", 0.02);
  sc.guidance.range_deadband_m = cfg.get_double_or("guidance.range_deadband_m", 0.005);
  sc.guidance.terminal_enabled = cfg.get_bool_or("guidance.terminal_enabled", true);
  sc.guidance.terminal_timeout_s = cfg.get_double_or("guidance.terminal_timeout_s", 10.0);
  sc.guidance.abort_cov_trace_m2 = cfg.get_double_or("guidance.abort_cov_trace_m2", 1.0);
  sc.guidance.bearing_freeze_radius_m =
      cfg.get_double_or("guidance.bearing_freeze_radius_m", 0.05);
  sc.guidance.align_lookahead_m =
      cfg.get_double_or("guidance.align_lookahead_m", 0.04);
  sc.guidance.align_max_offset_rad =
      cfg.get_double_or("guidance.align_max_offset_rad", 0.45);
  sc.guidance.dock_standoff_m = sc.dock_clearance_m;

  if (cfg.has("script.times_s")) {
    const auto times = cfg.get_double_list("script.times_s");
    const auto duties = cfg.get_double_list("script.duties");
    if (duties.size() != 4 * times.size())
      throw ConfigError("config: script.duties needs 4 values per script time");
    for (size_t i = 0; i < times.size(); ++i) {
      ScriptSegment seg;
      seg.start_s = times[i];
      for (int k = 0; k < 4; ++k) seg.command.duty(k) = duties[4 * i + k];
      sc.script.push_back(seg);
    }
  }

  sc.truth_log_rate_hz = cfg.get_double_or("log.truth_rate_hz", 120.0);

  cfg.require_all_consumed();
  sc.validate();
  return sc;
}

void Scenario::validate() const {
  if (!(duration_s > 0)) throw ConfigError("scenario: sim.duration_s must be positive");
  if (!(sim_rate_hz > 0)) throw ConfigError("scenario: sim.rate_hz must be positive");
  for (double r : {imu_rate_hz, uwb_rate_hz, vision_rate_hz, guidance.rate_hz,
                   truth_log_rate_hz})
    if (!(r > 0) || r > sim_rate_hz)
      throw ConfigError("scenario: sensor/log rates must be in (0, sim.rate_hz]");
  if (anchors.positions.size() < 3)
    throw ConfigError("scenario: at least 3 UWB anchors are required");
  if (params.mass_kg <= 0 || params.inertia_kgm2 <= 0)
    throw ConfigError("scenario: mass and inertia must be positive");
  if (uwb.outlier_prob < 0 || uwb.outlier_prob > 1)
    throw ConfigError("scenario: uwb.outlier_prob must be in [0, 1]");
  if (randomize_start &&
      ((start_region_max - start_region_min).array() < 0).any())
    throw ConfigError("scenario: initial.random_region is inverted");
  if (uwb_jitter_s < 0 || uwb_jitter_s >= 1.0 / uwb_rate_hz ||
      uwb_jitter_s >= 1.0 / imu_rate_hz)
    throw ConfigError("scenario: uwb.jitter_s must be in [0, min(uwb, imu) period)");
  if (mode == GuidanceMode::kScript) {
    if (script.empty())
      throw ConfigError("scenario: guidance.mode=script needs script.times_s/duties");
    double prev = -1e18;
    for (const auto& seg : script) {
      if (seg.start_s <= prev)
        throw ConfigError("scenario: script.times_s must be strictly increasing");
      prev = seg.start_s;
      for (int k = 0; k < 4; ++k)
        if (seg.command.duty(k) < 0 || seg.command.duty(k) > 1)
          throw ConfigError("scenario: script duties must be within [0, 1]");
    }
  }
  markers.validate();
}

}  // namespace proxsim
