#include "doctest.h"
#include "proxsim/guidance.hpp"

#include <cmath>

using namespace proxsim;

namespace {

EstimatorState settled_est(const Vec2& pos, const Vec2& vel = Vec2::Zero()) {
  EstimatorState est;
  est.state.head<2>() = pos;
  est.state.tail<2>() = vel;
  est.covariance = Vec4(1e-4, 1e-4, 1e-6, 1e-6).asDiagonal();
  return est;
}

GuidanceState in_phase(GuidancePhase p, double entry = 0.0) {
  GuidanceState gs;
  gs.phase = p;
  gs.phase_entry_s = entry;
  return gs;
}

// dock at (2, 1.5), approached heading-0 (from -x); staging point sits
// (handover - 0.03) short of the dock on the approach axis
const DockTarget kTarget{Vec2(2.0, 1.5), 0.0};
const Vec2 kStaging(2.0 - 0.07, 1.5);

}  // namespace

TEST_CASE("phase names are stable identifiers") {
  CHECK(std::string(phase_name(GuidancePhase::kSettle)) == "SETTLE");
  CHECK(std::string(phase_name(GuidancePhase::kAcquireLos)) == "ACQUIRE_LOS");
  CHECK(std::string(phase_name(GuidancePhase::kLosClose)) == "LOS_CLOSE");
  CHECK(std::string(phase_name(GuidancePhase::kTerminalLock)) == "TERMINAL_LOCK");
  CHECK(std::string(phase_name(GuidancePhase::kAlign)) == "ALIGN");
  CHECK(std::string(phase_name(GuidancePhase::kFinalApproach)) == "FINAL_APPROACH");
  CHECK(std::string(phase_name(GuidancePhase::kDocked)) == "DOCKED");
  CHECK(std::string(phase_name(GuidancePhase::kAbort)) == "ABORT");
}

TEST_CASE("settle holds with zero command until the estimator is trusted") {
  const ModuleParams params;
  const GuidanceConfig cfg;
  EstimatorState loose = settled_est(Vec2(0.5, 0.5));
  loose.covariance = Vec4(0.25, 0.25, 0.01, 0.01).asDiagonal();

  const GuidanceOutput held = step_guidance(in_phase(GuidancePhase::kSettle), loose,
                                            0.0, 0.0, {}, kTarget, params, cfg, 1.0);
  CHECK(held.state.phase == GuidancePhase::kSettle);
  CHECK(held.command.duty.norm() == 0.0);

  const GuidanceOutput released =
      step_guidance(in_phase(GuidancePhase::kSettle), settled_est(Vec2(0.5, 0.5)), 0.0,
                    0.0, {}, kTarget, params, cfg, 2.0);
  CHECK(released.state.phase == GuidancePhase::kAcquireLos);
  CHECK(released.state.phase_entry_s == 2.0);
}

TEST_CASE("acquire turns toward the staging point, not the dock") {
  const ModuleParams params;
  const GuidanceConfig cfg;
  // due north of the staging point: staging bearing pi/2, dock bearing ~1.50
  const EstimatorState est = settled_est(kStaging - Vec2(0.0, 1.0));

  const GuidanceOutput turning =
      step_guidance(in_phase(GuidancePhase::kAcquireLos), est, 0.0, 0.0, {}, kTarget,
                    params, cfg, 1.0);
  CHECK(turning.state.phase == GuidancePhase::kAcquireLos);
  const BodyWrench w = thruster_wrench(turning.command, params);
  CHECK(w.force.norm() == doctest::Approx(0.0));  // acquire never translates
  CHECK(w.torque > 0.0);                          // bearing error is +pi/2

  // pointed at the staging point: hand over to the closing leg
  const GuidanceOutput handover =
      step_guidance(in_phase(GuidancePhase::kAcquireLos), est, M_PI / 2.0, 0.0, {},
                    kTarget, params, cfg, 1.0);
  CHECK(handover.state.phase == GuidancePhase::kLosClose);

  // pointed at the dock instead: still off the staging bearing, keeps turning
  const double dock_bearing = std::atan2(1.0, 0.07);
  const GuidanceOutput off =
      step_guidance(in_phase(GuidancePhase::kAcquireLos), est, dock_bearing, 0.0, {},
                    kTarget, params, cfg, 1.0);
  CHECK(off.state.phase == GuidancePhase::kAcquireLos);
}

TEST_CASE("waypoint mode aims straight at the target and never hands over") {
  const ModuleParams params;
  GuidanceConfig cfg;
  cfg.terminal_enabled = false;
  const EstimatorState est = settled_est(kTarget.position - Vec2(0.0, 1.0));

  const double dock_bearing = M_PI / 2.0;
  const GuidanceOutput on = step_guidance(in_phase(GuidancePhase::kAcquireLos), est,
                                          dock_bearing, 0.0, {}, kTarget, params, cfg, 0.0);
  CHECK(on.state.phase == GuidancePhase::kLosClose);

  // well inside the handover radius, the closing leg keeps running
  const EstimatorState close = settled_est(kTarget.position - Vec2(0.08, 0.0));
  const GuidanceOutput still =
      step_guidance(in_phase(GuidancePhase::kLosClose), close, 0.0, 0.0, {}, kTarget,
                    params, cfg, 0.0);
  CHECK(still.state.phase == GuidancePhase::kLosClose);
}

TEST_CASE("closing leg freezes the bearing near the aim point") {
  const ModuleParams params;
  const GuidanceConfig cfg;

  // far out: live bearing, recorded into the frozen slot
  const EstimatorState far = settled_est(kStaging - Vec2(1.0, 0.0));
  const GuidanceOutput live = step_guidance(in_phase(GuidancePhase::kLosClose), far,
                                            0.0, 0.0, {}, kTarget, params, cfg, 0.0);
  CHECK(live.state.bearing_frozen);
  CHECK(live.state.frozen_bearing == doctest::Approx(0.0));
  const BodyWrench w = thruster_wrench(live.command, params);
  CHECK(w.force.x() > 0.0);  // aligned and far: closing thrust

  // inside the freeze radius the stored bearing keeps steering
  GuidanceState frozen = in_phase(GuidancePhase::kLosClose);
  frozen.bearing_frozen = true;
  frozen.frozen_bearing = 0.0;
  const EstimatorState near = settled_est(kStaging - Vec2(0.04, 0.0));
  const GuidanceOutput held =
      step_guidance(frozen, near, 0.0, 0.0, {}, kTarget, params, cfg, 0.0);
  CHECK(held.state.phase == GuidancePhase::kLosClose);
  CHECK(held.state.bearing_frozen);
  const BodyWrench wn = thruster_wrench(held.command, params);
  CHECK(wn.force.x() > 0.0);  // 4 cm of axial error left: keep creeping
}

TEST_CASE("closing leg hands over to terminal lock inside the handover radius") {
  const ModuleParams params;
  const GuidanceConfig cfg;
  const EstimatorState close = settled_est(kTarget.position - Vec2(0.08, 0.0));
  const GuidanceOutput out = step_guidance(in_phase(GuidancePhase::kLosClose), close,
                                           0.0, 0.0, {}, kTarget, params, cfg, 3.0);
  CHECK(out.state.phase == GuidancePhase::kTerminalLock);
  CHECK(out.state.phase_entry_s == 3.0);
}

TEST_CASE("terminal lock waits for vision, then aligns or gives up") {
  const ModuleParams params;
  const GuidanceConfig cfg;
  const EstimatorState est = settled_est(kTarget.position - Vec2(0.08, 0.0));

  VisionStatus blind;
  const GuidanceOutput waiting =
      step_guidance(in_phase(GuidancePhase::kTerminalLock, 0.0), est, 0.0, 0.0, blind,
                    kTarget, params, cfg, 5.0);
  CHECK(waiting.state.phase == GuidancePhase::kTerminalLock);

  VisionStatus locked;
  locked.converged = true;
  const GuidanceOutput go =
      step_guidance(in_phase(GuidancePhase::kTerminalLock, 0.0), est, 0.0, 0.0, locked,
                    kTarget, params, cfg, 5.0);
  CHECK(go.state.phase == GuidancePhase::kAlign);

  const GuidanceOutput gave_up =
      step_guidance(in_phase(GuidancePhase::kTerminalLock, 0.0), est, 0.0, 0.0, blind,
                    kTarget, params, cfg, 10.5);
  CHECK(gave_up.state.phase == GuidancePhase::kAbort);
  CHECK(gave_up.command.duty.norm() == 0.0);
}

TEST_CASE("align steers an exponential line capture with a field-of-view cap") {
  const ModuleParams params;
  const GuidanceConfig cfg;
  VisionStatus locked;
  locked.converged = true;

  // 5 cm beside the axis, 30 cm short: long runway, forward leg, turn +
  const EstimatorState beside = settled_est(kTarget.position - Vec2(0.30, 0.05));
  const GuidanceOutput fwd = step_guidance(in_phase(GuidancePhase::kAlign), beside, 0.0,
                                           0.0, locked, kTarget, params, cfg, 1.0);
  CHECK(fwd.state.phase == GuidancePhase::kAlign);
  const BodyWrench wf = thruster_wrench(fwd.command, params);
  CHECK(wf.torque > 0.0);                       // offset steers toward the axis
  CHECK(wf.force.norm() == doctest::Approx(0.0));  // not pointed yet: no thrust

  // same cross-track with no runway left: back out, offset flipped
  const EstimatorState cramped = settled_est(kTarget.position - Vec2(0.02, 0.05));
  const GuidanceOutput rev = step_guidance(in_phase(GuidancePhase::kAlign), cramped,
                                           0.0, 0.0, locked, kTarget, params, cfg, 1.0);
  CHECK(rev.state.phase == GuidancePhase::kAlign);
  const BodyWrench wr = thruster_wrench(rev.command, params);
  CHECK(wr.torque < 0.0);  // reversing: mirror the capture offset

  // losing the vision fix drops back to terminal lock
  const GuidanceOutput lost = step_guidance(in_phase(GuidancePhase::kAlign), beside,
                                            0.0, 0.0, {}, kTarget, params, cfg, 1.0);
  CHECK(lost.state.phase == GuidancePhase::kTerminalLock);
}

TEST_CASE("align releases to final approach only when laterally quiet") {
  const ModuleParams params;
  const GuidanceConfig cfg;
  VisionStatus locked;
  locked.converged = true;
  const Vec2 on_axis = kTarget.position - Vec2(0.06, 0.005);

  const GuidanceOutput drifting =
      step_guidance(in_phase(GuidancePhase::kAlign), settled_est(on_axis, Vec2(0, 0.005)),
                    0.0, 0.0, locked, kTarget, params, cfg, 1.0);
  CHECK(drifting.state.phase == GuidancePhase::kAlign);

  const GuidanceOutput quiet =
      step_guidance(in_phase(GuidancePhase::kAlign), settled_est(on_axis, Vec2(0, 0.001)),
                    0.0, 0.0, locked, kTarget, params, cfg, 1.0);
  CHECK(quiet.state.phase == GuidancePhase::kFinalApproach);

  // heading not yet on the mating axis: stay in align even if quiet
  const GuidanceOutput crooked =
      step_guidance(in_phase(GuidancePhase::kAlign), settled_est(on_axis, Vec2(0, 0.001)),
                    0.3, 0.0, locked, kTarget, params, cfg, 1.0);
  CHECK(crooked.state.phase == GuidancePhase::kAlign);
}

TEST_CASE("final approach creeps in, backs out on overshoot, and docks") {
  const ModuleParams params;
  const GuidanceConfig cfg;
  VisionStatus locked;
  locked.converged = true;

  const GuidanceOutput creeping =
      step_guidance(in_phase(GuidancePhase::kFinalApproach),
                    settled_est(kTarget.position - Vec2(0.03, 0.0)), 0.0, 0.0, locked,
                    kTarget, params, cfg, 1.0);
  CHECK(creeping.state.phase == GuidancePhase::kFinalApproach);
  CHECK(thruster_wrench(creeping.command, params).force.x() > 0.0);

  const GuidanceOutput reversing =
      step_guidance(in_phase(GuidancePhase::kFinalApproach),
                    settled_est(kTarget.position + Vec2(0.05, 0.0)), 0.0, 0.0, locked,
                    kTarget, params, cfg, 1.0);
  CHECK(reversing.state.phase == GuidancePhase::kFinalApproach);
  CHECK(thruster_wrench(reversing.command, params).force.x() < 0.0);

  const GuidanceOutput docked =
      step_guidance(in_phase(GuidancePhase::kFinalApproach),
                    settled_est(kTarget.position - Vec2(0.015, 0.0)), 0.0, 0.0, locked,
                    kTarget, params, cfg, 9.0);
  CHECK(docked.state.phase == GuidancePhase::kDocked);
  CHECK(docked.command.duty.norm() == 0.0);

  // within range but 10 deg crooked: not a dock
  const GuidanceOutput crooked =
      step_guidance(in_phase(GuidancePhase::kFinalApproach),
                    settled_est(kTarget.position - Vec2(0.015, 0.0)), 0.175, 0.0,
                    locked, kTarget, params, cfg, 9.0);
  CHECK(crooked.state.phase == GuidancePhase::kFinalApproach);

  const GuidanceOutput bounced =
      step_guidance(in_phase(GuidancePhase::kFinalApproach),
                    settled_est(kTarget.position - Vec2(0.10, 0.03)), 0.0, 0.0, locked,
                    kTarget, params, cfg, 1.0);
  CHECK(bounced.state.phase == GuidancePhase::kAlign);

  const GuidanceOutput blind =
      step_guidance(in_phase(GuidancePhase::kFinalApproach),
                    settled_est(kTarget.position - Vec2(0.05, 0.0)), 0.0, 0.0, {},
                    kTarget, params, cfg, 1.0);
  CHECK(blind.state.phase == GuidancePhase::kTerminalLock);
}

TEST_CASE("estimator divergence aborts from any active phase") {
  const ModuleParams params;
  const GuidanceConfig cfg;
  EstimatorState diverged = settled_est(Vec2(1.0, 1.0));
  diverged.covariance = Vec4(0.6, 0.6, 0.01, 0.01).asDiagonal();

  for (GuidancePhase p : {GuidancePhase::kAcquireLos, GuidancePhase::kLosClose,
                          GuidancePhase::kTerminalLock, GuidancePhase::kAlign,
                          GuidancePhase::kFinalApproach}) {
    const GuidanceOutput out =
        step_guidance(in_phase(p), diverged, 0.0, 0.0, {}, kTarget, params, cfg, 1.0);
    CHECK(out.state.phase == GuidancePhase::kAbort);
    CHECK(out.command.duty.norm() == 0.0);
  }
  // deliberate settling is exempt; terminal states stay put
  CHECK(step_guidance(in_phase(GuidancePhase::kSettle), diverged, 0, 0, {}, kTarget,
                      params, cfg, 1.0)
            .state.phase == GuidancePhase::kSettle);
  CHECK(step_guidance(in_phase(GuidancePhase::kDocked), diverged, 0, 0, {}, kTarget,
                      params, cfg, 1.0)
            .state.phase == GuidancePhase::kDocked);
}

TEST_CASE("los_command points then closes at the speed cap") {
  const ModuleParams params;
  const GuidanceConfig cfg;
  const Vec2 target(2.0, 0.0);

  // pointed straight at a distant target: full-cap closing thrust
  const EstimatorState aligned = settled_est(Vec2(0.0, 0.0));
  const ThrusterCommand closing =
      los_command(aligned, 0.0, 0.0, target, params, cfg);
  const BodyWrench wc = thruster_wrench(closing, params);
  const double want = params.mass_kg * cfg.speed_gain_hz * cfg.max_speed_mps;
  CHECK(wc.force.x() == doctest::Approx(std::min(want, 2.0 * params.nozzle_thrust_n)));

  // facing away: torque only
  const ThrusterCommand turning =
      los_command(aligned, M_PI / 2.0, 0.0, target, params, cfg);
  const BodyWrench wt = thruster_wrench(turning, params);
  CHECK(wt.force.norm() == doctest::Approx(0.0));
  CHECK(wt.torque < 0.0);  // bearing error is -pi/2

  // inside the range deadband the speed demand is zero, so drag feedforward
  // of a zero velocity leaves the nozzles silent
  const EstimatorState parked = settled_est(target - Vec2(0.004, 0.0));
  const ThrusterCommand still = los_command(parked, 0.0, 0.0, target, params, cfg);
  CHECK(thruster_wrench(still, params).force.norm() == doctest::Approx(0.0));
}
