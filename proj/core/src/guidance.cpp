#include "proxsim/guidance.hpp"

#include <cmath>

namespace proxsim {

const char* phase_name(GuidancePhase p) {
  switch (p) {
    case GuidancePhase::kSettle: return "SETTLE";
    case GuidancePhase::kAcquireLos: return "ACQUIRE_LOS";
    case GuidancePhase::kLosClose: return "LOS_CLOSE";
    case GuidancePhase::kTerminalLock: return "TERMINAL_LOCK";
    case GuidancePhase::kAlign: return "ALIGN";
    case GuidancePhase::kFinalApproach: return "FINAL_APPROACH";
    case GuidancePhase::kDocked: return "DOCKED";
    case GuidancePhase::kAbort: return "ABORT";
  }
  return "?";
}

namespace {

double heading_torque(double psi_ref, double psi_hat, double gyro_rate,
                      const GuidanceConfig& cfg) {
  return cfg.heading_gain_nm * wrap_angle(psi_ref - psi_hat) -
         cfg.heading_rate_gain_nms * gyro_rate;
}

// Forward-speed PD with drag feedforward; returns body-x force.
double speed_force(double v_des, const EstimatorState& est, const ModuleParams& params,
                   const GuidanceConfig& cfg) {
  const double v = est.velocity_body().x();
  return params.mass_kg * (cfg.speed_gain_hz * (v_des - v) + params.mu_g() * v);
}

ThrusterCommand steer_and_close(const EstimatorState& est, double psi_ref,
                                double psi_hat, double gyro_rate, double v_des,
                                const ModuleParams& params, const GuidanceConfig& cfg) {
  const double tau = heading_torque(psi_ref, psi_hat, gyro_rate, cfg);
  double fx = 0.0;
  // translate only when roughly pointed; braking (v_des = 0) is always safe
  if (std::abs(wrap_angle(psi_ref - psi_hat)) < 2.0 * cfg.los_deadband_rad ||
      v_des == 0.0)
    fx = speed_force(v_des, est, params, cfg);
  return allocate_wrench(fx, tau, params);
}

double position_cov_trace(const EstimatorState& est) {
  return est.covariance(0, 0) + est.covariance(1, 1);
}

}  // namespace

ThrusterCommand los_command(const EstimatorState& est, double psi_hat, double gyro_rate,
                            const Vec2& target, const ModuleParams& params,
                            const GuidanceConfig& cfg) {
  const Vec2 d = target - est.position();
  const double range = d.norm();
  const double bearing = std::atan2(d.y(), d.x());
  const double v_des =
      std::min(cfg.range_gain_hz * std::max(range - cfg.range_deadband_m, 0.0),
               cfg.max_speed_mps);
  return steer_and_close(est, bearing, psi_hat, gyro_rate, v_des, params, cfg);
}

GuidanceOutput step_guidance(const GuidanceState& gs, const EstimatorState& est,
                             double psi_hat, double gyro_rate,
                             const VisionStatus& vision, const DockTarget& target,
                             const ModuleParams& params, const GuidanceConfig& cfg,
                             double t) {
  GuidanceOutput out;
  out.state = gs;
  GuidanceState& st = out.state;

  const Vec2 to_dock = target.position - est.position();
  const double separation = to_dock.norm();
  const Vec2 approach_dir(std::cos(target.approach_heading),
                          std::sin(target.approach_heading));
  // axial shortfall (positive short of the dock) and signed cross-track
  const double axial = to_dock.dot(approach_dir);
  const double cross = -to_dock.x() * approach_dir.y() + to_dock.y() * approach_dir.x();

  // Closing-leg aim point.  With a terminal phase the LOS leg heads for a
  // staging point on the approach axis just inside the handover circle, so the
  // line capture starts with near-zero cross-track; waypoint-only runs close
  // on the target point itself.
  const Vec2 los_aim =
      cfg.terminal_enabled
          ? Vec2(target.position -
                 (cfg.handover_radius_m - 0.03) * approach_dir)
          : target.position;
  const Vec2 to_aim = los_aim - est.position();
  const double aim_dist = to_aim.norm();

  auto enter = [&](GuidancePhase p) {
    st.phase = p;
    st.phase_entry_s = t;
    st.bearing_frozen = false;
  };

  // Global estimator-divergence abort (not armed while deliberately settling).
  if (st.phase != GuidancePhase::kSettle && st.phase != GuidancePhase::kDocked &&
      st.phase != GuidancePhase::kAbort &&
      position_cov_trace(est) > cfg.abort_cov_trace_m2)
    enter(GuidancePhase::kAbort);

  // Phase exits, evaluated before the command so an entry condition that is
  // already met produces the new phase's command immediately.
  switch (st.phase) {
    case GuidancePhase::kSettle:
      if (position_cov_trace(est) < cfg.settle_cov_trace_m2)
        enter(GuidancePhase::kAcquireLos);
      break;
    case GuidancePhase::kAcquireLos: {
      const double bearing = std::atan2(to_aim.y(), to_aim.x());
      if (std::abs(wrap_angle(bearing - psi_hat)) < cfg.los_deadband_rad)
        enter(GuidancePhase::kLosClose);
      break;
    }
    case GuidancePhase::kLosClose:
      if (cfg.terminal_enabled && separation < cfg.handover_radius_m)
        enter(GuidancePhase::kTerminalLock);
      break;
    case GuidancePhase::kTerminalLock:
      if (vision.converged)
        enter(GuidancePhase::kAlign);
      else if (t - st.phase_entry_s > cfg.terminal_timeout_s)
        enter(GuidancePhase::kAbort);
      break;
    case GuidancePhase::kAlign:
      if (!vision.converged)
        enter(GuidancePhase::kTerminalLock);
      else if (std::abs(cross) < cfg.align_crosstrack_m &&
               std::abs(est.velocity_body().y()) < 0.0015 &&
               std::abs(wrap_angle(target.approach_heading - psi_hat)) <
                   2.0 * cfg.los_deadband_rad)
        // lateral velocity is unactuated, so any residual at entry would
        // friction-drift the vehicle off the corridor during the creep-in
        enter(GuidancePhase::kFinalApproach);
      break;
    case GuidancePhase::kFinalApproach:
      if (separation < cfg.dock_radius_m &&
          std::abs(wrap_angle(target.approach_heading - psi_hat)) <
              cfg.dock_heading_bound_rad)
        enter(GuidancePhase::kDocked);
      else if (!vision.converged)
        enter(GuidancePhase::kTerminalLock);
      else if (std::abs(cross) > 2.0 * cfg.align_crosstrack_m)
        enter(GuidancePhase::kAlign);
      break;
    case GuidancePhase::kDocked:
    case GuidancePhase::kAbort:
      break;
  }

  // Command for the current (possibly just-entered) phase.
  switch (st.phase) {
    case GuidancePhase::kSettle:
    case GuidancePhase::kDocked:
    case GuidancePhase::kAbort:
      out.command = ThrusterCommand{};
      break;

    case GuidancePhase::kAcquireLos: {
      const double bearing = std::atan2(to_aim.y(), to_aim.x());
      const double tau = heading_torque(bearing, psi_hat, gyro_rate, cfg);
      out.command = allocate_wrench(0.0, tau, params);
      break;
    }

    case GuidancePhase::kLosClose: {
      // Freeze the bearing near the waypoint, where the LOS direction is
      // noise-dominated and flips on overshoot; inside, servo the signed
      // along-axis error (reverse thrust instead of a turn-around).
      double bearing, v_des;
      if (aim_dist > cfg.bearing_freeze_radius_m) {
        bearing = std::atan2(to_aim.y(), to_aim.x());
        st.frozen_bearing = bearing;
        st.bearing_frozen = true;
        v_des = std::min(
            cfg.range_gain_hz * std::max(aim_dist - cfg.range_deadband_m, 0.0),
            cfg.max_speed_mps);
      } else {
        bearing = st.bearing_frozen ? st.frozen_bearing : psi_hat;
        const Vec2 axis(std::cos(bearing), std::sin(bearing));
        const double axial_err = to_aim.dot(axis);
        if (std::abs(axial_err) < cfg.range_deadband_m) {
          v_des = 0.0;
          // axially parked but still off: re-aim along the live LOS and let
          // the heading loop swing before the next creep
          if (aim_dist > 2.0 * cfg.range_deadband_m &&
              est.velocity_body().norm() < 0.001) {
            bearing = std::atan2(to_aim.y(), to_aim.x());
            st.frozen_bearing = bearing;
            st.bearing_frozen = true;
          }
        } else {
          v_des = std::clamp(cfg.range_gain_hz * axial_err, -cfg.max_speed_mps,
                             cfg.max_speed_mps);
        }
      }
      out.command =
          steer_and_close(est, bearing, psi_hat, gyro_rate, v_des, params, cfg);
      break;
    }

    case GuidancePhase::kTerminalLock: {
      // Hold position at the mating heading so the marker face sits on the
      // camera boresight while the vision filter converges.
      out.command = steer_and_close(est, target.approach_heading, psi_hat, gyro_rate,
                                    0.0, params, cfg);
      break;
    }

    case GuidancePhase::kAlign: {
      // Thrust acts along body x (the camera boresight), so the approach line
      // is captured by aiming at a point on the axis one lookahead ahead of
      // the current station: the cross-track then decays exponentially with
      // the lookahead as length constant.  When the axial runway is too short
      // to finish the capture, back up to regain it; the heading offset flips
      // sign with the velocity so the cross-track keeps closing on both legs.
      const double runway = 1.2 * std::abs(cross) + 0.01;
      // Approach speed tapers with the absolute axial gap as well, so a late
      // back-up decision is made from near-zero speed and cannot coast
      // through the dock plane while the heading swings around.
      const double v_des =
          axial < runway
              ? -cfg.dock_speed_mps
              : std::min({cfg.range_gain_hz * (axial - runway) + cfg.dock_speed_mps,
                          2.0 * cfg.dock_speed_mps,
                          cfg.range_gain_hz * (axial - 0.02)});
      // The offset may not swing the marker pattern out of the camera field
      // of view: the face sits (cross, depth) off the boresight plus its own
      // half-extent, and losing the track here is unrecoverable.
      const double depth = std::max(axial + cfg.dock_standoff_m, 0.06);
      const double cap =
          std::min(cfg.align_max_offset_rad,
                   std::max(0.1, 0.6 - (std::abs(cross) + 0.03) / depth));
      double offset = std::clamp(std::atan2(cross, cfg.align_lookahead_m), -cap, cap);
      if (v_des < 0.0) offset = -offset;
      out.command =
          steer_and_close(est, wrap_angle(target.approach_heading + offset),
                          psi_hat, gyro_rate, v_des, params, cfg);
      break;
    }

    case GuidancePhase::kFinalApproach: {
      // On-axis: creep in holding the mating heading, backing up on overshoot.
      const double v_des =
          std::clamp(cfg.range_gain_hz * axial, -cfg.dock_speed_mps, cfg.dock_speed_mps);
      out.command = steer_and_close(est, target.approach_heading, psi_hat, gyro_rate,
                                    v_des, params, cfg);
      break;
    }
  }

  return out;
}

}  // namespace proxsim
