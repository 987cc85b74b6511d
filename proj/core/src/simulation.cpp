#include "proxsim/simulation.hpp"

#include <cmath>
#include <exception>
#include <optional>
#include <string>

#include "proxsim/geometry.hpp"
#include "proxsim/p3p.hpp"
#include "proxsim/random.hpp"
#include "proxsim/vision.hpp"

namespace proxsim {
namespace {

Mat3 planar_rot3(double psi) {
  Mat3 r = Mat3::Identity();
  r.topLeftCorner<2, 2>() = rot2(psi);
  return r;
}

/// Heading source for the filter: AHRS until the vision pose converges, then
/// the vision heading dead-reckoned with the gyro between fixes, falling back
/// to AHRS when fixes stop coming.
struct AttitudeSource {
  bool vision_mode{false};
  double heading{0.0};
  double last_vision_s{-1e18};

  void ahrs_sample(double z_psi) {
    if (!vision_mode) heading = z_psi;
  }
  void gyro_sample(double rate, double dt) {
    if (vision_mode) heading = wrap_angle(heading + rate * dt);
  }
  void vision_fix(double psi, double t) {
    vision_mode = true;
    heading = psi;
    last_vision_s = t;
  }
  void check_stale(double t, double timeout_s) {
    if (vision_mode && t - last_vision_s > timeout_s) vision_mode = false;
  }
};

/// camera_from_target pose implied by the current estimate, used to steer P3P
/// disambiguation while the vision filter is bootstrapping.
PoseCandidate relative_prior(const Vec2& chaser_pos, double psi_hat,
                             const CameraMount& mount, const Vec2& target_pos,
                             double target_psi) {
  const Mat3 r_wc = planar_rot3(psi_hat) * mount.rotation_body_camera();
  const Vec2 cam_w2 = chaser_pos + rot2(psi_hat) * mount.position_body;
  PoseCandidate prior;
  prior.rotation = r_wc.transpose() * planar_rot3(target_psi);
  prior.translation =
      r_wc.transpose() * Vec3(target_pos.x() - cam_w2.x(), target_pos.y() - cam_w2.y(), 0.0);
  return prior;
}

/// Invert the relative pose against the known target pose: a measurement of
/// the chaser's world pose, with the covariance pushed through the inversion.
PlanarPoseMeasurement compose_world_measurement(const RelativePlanarPose& rel,
                                                const Vec2& target_pos,
                                                double target_psi) {
  PlanarPoseMeasurement m;
  m.heading = wrap_angle(target_psi - rel.heading);
  const Mat2 r_wb = rot2(m.heading);
  m.position = target_pos - r_wb * rel.position;
  Mat3 j = Mat3::Zero();
  j.topLeftCorner<2, 2>() = -r_wb;
  j.block<2, 1>(0, 2) = rot2_deriv(m.heading) * rel.position;
  j(2, 2) = -1.0;
  m.covariance = j * rel.covariance * j.transpose();
  m.time_s = rel.time_s;
  return m;
}

}  // namespace

RunResult run_scenario(const Scenario& sc) {
  RunResult rr;
  RunLogs& logs = rr.logs;
  logs.header_comment = "scenario=" + sc.name + " seed=" + std::to_string(sc.seed);

  RandomStream rng(sc.seed);
  ModuleState truth = sc.initial_truth;
  if (sc.randomize_start) {
    truth.position.x() = rng.uniform(sc.start_region_min.x(), sc.start_region_max.x());
    truth.position.y() = rng.uniform(sc.start_region_min.y(), sc.start_region_max.y());
  }
  if (sc.randomize_heading) truth.heading = rng.uniform(-M_PI, M_PI);

  const double dt = 1.0 / sc.sim_rate_hz;
  const long n_ticks = std::llround(sc.duration_s * sc.sim_rate_hz);
  TickSchedule imu_sched(sc.imu_rate_hz, sc.sim_rate_hz);
  TickSchedule uwb_sched(sc.uwb_rate_hz, sc.sim_rate_hz);
  TickSchedule vis_sched(sc.vision_rate_hz, sc.sim_rate_hz);
  TickSchedule gdc_sched(sc.guidance.rate_hz, sc.sim_rate_hz);
  TickSchedule truth_sched(sc.truth_log_rate_hz, sc.sim_rate_hz);

  EstimatorState est;
  bool est_ready = false;
  AttitudeSource att;
  bool have_ahrs = false;
  double gyro_rate = 0.0;
  double prev_imu_t = 0.0;

  VisionPipeline pipeline(sc.markers, sc.mount, sc.vision_filter, sc.filter.vision_var);

  GuidanceState gs;
  ThrusterCommand active_cmd;
  // inputs frozen at the start of the running IMU interval, consumed by the
  // next predict (ZOH; guidance ticks land on IMU ticks at the default rates)
  struct {
    double psi{0.0};
    double gyro{0.0};
    ThrusterCommand cmd;
  } snap;

  long last_truth_tick = -1;
  auto log_truth = [&](long tick, double t) {
    if (tick == last_truth_tick) return;
    last_truth_tick = tick;
    logs.truth.append({csv_time(t), csv_num(truth.position.x()),
                       csv_num(truth.position.y()), csv_num(truth.heading),
                       csv_num(truth.velocity_body.x()), csv_num(truth.velocity_body.y()),
                       csv_num(truth.rate)});
  };
  auto log_meas = [&](double t, const char* sensor, long id, double v0, double v1,
                      double v2, const UpdateOutcome& o, bool outlier) {
    logs.measurements.append({csv_time(t), csv_text(sensor), csv_int(id), csv_num(v0),
                              csv_num(v1), csv_num(v2), csv_int(o.accepted ? 1 : 0),
                              csv_num(o.mahalanobis_sq), csv_num(o.beta),
                              csv_int(outlier ? 1 : 0)});
  };
  auto audit = [&](double t) {
    const CovarianceHealth h = covariance_health(est.covariance);
    if (h.max_asymmetry > 1e-9 || !h.positive_definite) {
      UpdateOutcome o;
      log_meas(t, "cov_violation", 0, h.max_asymmetry, h.positive_definite ? 1.0 : 0.0,
               0.0, o, false);
    }
  };
  auto predict_to = [&](double t) {
    if (!est_ready || t <= est.time_s) return;
    predict(est, snap.cmd, snap.gyro, snap.psi, sc.params, sc.filter, t - est.time_s);
    audit(t);
  };

  if (sc.mode == GuidanceMode::kClosedLoop)
    logs.phases.append({csv_time(0.0), csv_text(phase_name(gs.phase))});
  else
    logs.phases.append(
        {csv_time(0.0), csv_text(sc.mode == GuidanceMode::kScript ? "SCRIPT" : "IDLE")});

  size_t script_next = 0;
  double t_end = 0.0;
  long cur_tick = 0;

  try {
    for (long tick = 0; tick <= n_ticks; ++tick) {
      const double t = double(tick) * dt;
      cur_tick = tick;
      t_end = t;
      const bool final_tick = (tick == n_ticks);
      if (truth_sched.due(tick) || final_tick) log_truth(tick, t);
      if (final_tick) break;

      if (sc.mode == GuidanceMode::kScript) {
        while (script_next < sc.script.size() &&
               t >= sc.script[script_next].start_s - 0.5 * dt) {
          active_cmd = sc.script[script_next].command.clamped();
          ++script_next;
        }
      }

      bool imu_fired = false;
      if (imu_sched.due(tick)) {
        imu_fired = true;
        const GyroMeasurement zg = sample_gyro(truth, sc.imu, rng, t);
        const AttitudeMeasurement za = sample_attitude(truth, sc.imu, rng, t);
        const AccelMeasurement zacc =
            sample_accel(truth, active_cmd, sc.params, sc.imu, rng, t);
        att.check_stale(t, 1.0);
        att.gyro_sample(zg.rate_radps, t - prev_imu_t);
        att.ahrs_sample(za.heading_rad);
        prev_imu_t = t;
        gyro_rate = zg.rate_radps;
        have_ahrs = true;
        if (est_ready) {
          predict_to(t);
          if (sc.filter.accel_updates_enabled) {
            const UpdateOutcome o =
                update_accel(est, zacc, snap.cmd, sc.params, sc.filter);
            audit(t);
            log_meas(t, "accel", 0, zacc.specific_force_mps2.x(),
                     zacc.specific_force_mps2.y(), 0.0, o, false);
          }
        }
      }

      if (uwb_sched.due(tick)) {
        double t_meas = t;
        if (sc.uwb_jitter_s > 0.0) t_meas = t + rng.uniform(0.0, sc.uwb_jitter_s);
        const DockTarget dock = sc.dock_target(t);
        const double separation =
            sc.waypoint_only ? 1e18 : (truth.position - dock.position).norm();
        const Vec2 antenna_w =
            truth.position + rot2(truth.heading) * sc.filter.antenna_offset_body;
        const auto round =
            sample_uwb_round(antenna_w, sc.anchors, separation, sc.uwb, rng, t_meas);
        if (round.empty()) {
          UpdateOutcome o;
          log_meas(t_meas, "uwb_dropout", -1, separation, 0.0, 0.0, o, false);
        } else if (!est_ready) {
          if (have_ahrs) {
            const auto pos = trilaterate(sc.anchors, round,
                                         sc.filter.antenna_offset_body, att.heading);
            UpdateOutcome o;
            if (pos) {
              est = estimator_init(*pos, t_meas, sc.filter,
                                   int(sc.anchors.positions.size()));
              est_ready = true;
              snap.psi = att.heading;
              snap.gyro = gyro_rate;
              snap.cmd = active_cmd;
              o.accepted = true;
            }
            for (const auto& zr : round)
              log_meas(t_meas, "range", zr.anchor_id, zr.range_m, 0.0, 0.0, o,
                       zr.truth_outlier);
          }
        } else {
          predict_to(t_meas);
          for (const auto& zr : round) {
            const UpdateOutcome o =
                update_range(est, zr, sc.anchors.positions[size_t(zr.anchor_id)],
                             att.heading, sc.filter);
            audit(t_meas);
            log_meas(t_meas, "range", zr.anchor_id, zr.range_m, 0.0, 0.0, o,
                     zr.truth_outlier);
          }
        }
      }

      if (sc.vision_enabled && vis_sched.due(tick)) {
        const Vec2 tgt_c = sc.target_center_at(t);
        const auto features =
            project_features(truth, sc.mount, tgt_c, sc.target_heading, sc.markers,
                             sc.intrinsics, sc.feature_sigma_rectified, rng, t);
        if (est_ready) {
          std::optional<PoseCandidate> prior;
          if (!pipeline.initialized())
            prior = relative_prior(est.position(), att.heading, sc.mount, tgt_c,
                                   sc.target_heading);
          const auto rel = pipeline.process(features, t, prior, gyro_rate);
          if (pipeline.initialized()) {
            const CovarianceHealth vh = covariance_health(pipeline.state().covariance);
            if (vh.max_asymmetry > 1e-9 || !vh.positive_definite) {
              UpdateOutcome o;
              log_meas(t, "cov_violation", 1, vh.max_asymmetry,
                       vh.positive_definite ? 1.0 : 0.0, 0.0, o, false);
            }
          }
          if (rel) {
            PlanarPoseMeasurement pm =
                compose_world_measurement(*rel, tgt_c, sc.target_heading);
            pm.time_s = t;
            predict_to(t);
            const UpdateOutcome o = update_vision_pose(est, pm, sc.filter);
            audit(t);
            att.vision_fix(pm.heading, t);
            log_meas(t, "vision_pose", 0, pm.position.x(), pm.position.y(), pm.heading,
                     o, false);
          }
        }
      }

      bool terminal = false;
      if (sc.mode == GuidanceMode::kClosedLoop && gdc_sched.due(tick) && est_ready) {
        const DockTarget dock = sc.dock_target(t);
        VisionStatus vstat;
        vstat.converged = pipeline.converged();
        const GuidanceOutput out = step_guidance(gs, est, att.heading, gyro_rate, vstat,
                                                 dock, sc.params, sc.guidance, t);
        if (out.state.phase != gs.phase)
          logs.phases.append({csv_time(t), csv_text(phase_name(out.state.phase))});
        gs = out.state;
        active_cmd = out.command.clamped();
        terminal = gs.phase == GuidancePhase::kDocked ||
                   gs.phase == GuidancePhase::kAbort;
      }

      if (imu_fired && est_ready) {
        logs.estimate.append(
            {csv_time(t), csv_num(est.state(0)), csv_num(est.state(1)),
             csv_num(est.state(2)), csv_num(est.state(3)), csv_num(att.heading),
             csv_text(att.vision_mode ? "vision" : "ahrs"),
             csv_num(est.covariance(0, 0)), csv_num(est.covariance(1, 1)),
             csv_num(est.covariance(2, 2)), csv_num(est.covariance(3, 3)),
             csv_num(est.state(0) - truth.position.x()),
             csv_num(est.state(1) - truth.position.y()),
             csv_num(est.state(2) - truth.velocity_body.x()),
             csv_num(est.state(3) - truth.velocity_body.y())});
      }

      if (est_ready && (!est.state.allFinite() || !est.covariance.allFinite()))
        throw FilterNumericsError("non-finite filter state");

      if (terminal) {
        log_truth(tick, t);
        break;
      }

      if (imu_fired) {
        snap.psi = att.heading;
        snap.gyro = gyro_rate;
        snap.cmd = active_cmd;
      }

      truth = dynamics_step(truth, active_cmd, sc.params, dt);
      if (!truth.position.allFinite() || !std::isfinite(truth.heading) ||
          !truth.velocity_body.allFinite() || !std::isfinite(truth.rate))
        throw std::runtime_error("non-finite truth state");
    }
  } catch (const std::exception& e) {
    logs.phases.append({csv_time(t_end), csv_text(std::string("FAILED ") + e.what())});
    log_truth(cur_tick, t_end);
  }

  rr.metrics = compute_metrics(logs, sc.dock_target(t_end));
  return rr;
}

}  // namespace proxsim
