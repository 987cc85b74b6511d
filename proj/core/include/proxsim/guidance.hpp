/// Line-of-sight and terminal docking guidance: a phase machine with PD
/// heading/speed laws mapped to nozzle duties through the allocation inverse.
/// Rotate-then-translate by construction, since the nozzles only give body-x
/// force and torque.
#pragma once

#include "proxsim/dynamics.hpp"
#include "proxsim/estimator.hpp"

namespace proxsim {

enum class GuidancePhase {
  kSettle,
  kAcquireLos,
  kLosClose,
  kTerminalLock,
  kAlign,
  kFinalApproach,
  kDocked,
  kAbort,
};

const char* phase_name(GuidancePhase p);

struct GuidanceConfig {
  double settle_cov_trace_m2{0.01};
  double los_deadband_rad{0.05};
  double handover_radius_m{0.10};
  double dock_radius_m{0.02};
  double align_crosstrack_m{0.01};
  double dock_heading_bound_rad{0.0873};  // 5 deg
  double heading_gain_nm{0.02};
  double heading_rate_gain_nms{0.03};
  double range_gain_hz{0.5};   // v_des = gain * range
  double speed_gain_hz{3.0};   // f_x = m * gain * (v_des - v)
  double max_speed_mps{0.1};
  double dock_speed_mps{0.02};
  double range_deadband_m{0.005};
  bool terminal_enabled{true};
  double terminal_timeout_s{10.0};
  double abort_cov_trace_m2{1.0};
  double bearing_freeze_radius_m{0.05};
  double align_lookahead_m{0.04};       // line-capture decay length
  double align_max_offset_rad{0.45};    // keep the marker face on boresight
  double dock_standoff_m{0.055};        // dock point clearance off the marker face
  double rate_hz{50.0};
};

/// Dock point and the world heading the chaser must hold when mated.
struct DockTarget {
  Vec2 position{Vec2::Zero()};
  double approach_heading{0.0};
};

struct VisionStatus {
  bool converged{false};
};

struct GuidanceState {
  GuidancePhase phase{GuidancePhase::kSettle};
  double phase_entry_s{0.0};
  bool bearing_frozen{false};
  double frozen_bearing{0.0};
};

struct GuidanceOutput {
  GuidanceState state;
  ThrusterCommand command;
};

/// One guidance tick: phase transitions first, then the command for the
/// (possibly new) phase.  psi_hat/gyro are the attitude source and rate used
/// by the PD laws; t is current sim time.
GuidanceOutput step_guidance(const GuidanceState& gs, const EstimatorState& est,
                             double psi_hat, double gyro_rate,
                             const VisionStatus& vision, const DockTarget& target,
                             const ModuleParams& params, const GuidanceConfig& cfg,
                             double t);

/// Stateless LOS law: align heading with the bearing to the target, close
/// range once roughly aligned.
ThrusterCommand los_command(const EstimatorState& est, double psi_hat, double gyro_rate,
                            const Vec2& target, const ModuleParams& params,
                            const GuidanceConfig& cfg);

}  // namespace proxsim
