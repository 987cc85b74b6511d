/// Planar rigid-body model of a thruster module sliding on an air-bearing
/// style flat table: point-mass translation with linear velocity drag, single
/// rotational DOF, four fixed cold-gas nozzles.
#pragma once

#include <array>

#include "proxsim/geometry.hpp"

namespace proxsim {

/// Physical parameters of the module.
struct ModuleParams {
  double mass_kg{0.795};
  double inertia_kgm2{4.987689e-3};
  double friction_mu{0.015};     // translational drag coefficient (of m*g)
  double gravity_mps2{9.80665};
  double nozzle_thrust_n{0.1};   // per-nozzle force at 100% duty
  double nozzle_arm_m{0.05};     // lever arm of each nozzle about the COM
  double rot_friction_nms{6.915e-4};  // rotational drag torque per rad/s

  double mu_g() const { return friction_mu * gravity_mps2; }
};

/// Truth state.  Velocity is expressed in the body frame (that is what the
/// accelerometer model and the filter work with); position/heading in world.
struct ModuleState {
  Vec2 position{Vec2::Zero()};   // world [m]
  double heading{0.0};           // world [rad]
  Vec2 velocity_body{Vec2::Zero()};  // [m/s]
  double rate{0.0};              // [rad/s]
};

/// Duty-cycle command for the four nozzles, each in [0, 1].
/// Layout (body frame): 0 = +x thrust mounted at +arm, 1 = +x at -arm,
/// 2 = -x at +arm, 3 = -x at -arm.  Net authority is body-x force plus
/// torque; lateral translation requires rotating first.
struct ThrusterCommand {
  Eigen::Vector4d duty{Eigen::Vector4d::Zero()};
  std::array<bool, 4> enabled{true, true, true, true};

  ThrusterCommand clamped() const {
    ThrusterCommand c = *this;
    for (int i = 0; i < 4; ++i) c.duty(i) = std::clamp(duty(i), 0.0, 1.0);
    return c;
  }
};

/// Net body-frame force and torque.
struct BodyWrench {
  Vec2 force{Vec2::Zero()};  // body frame [N]
  double torque{0.0};        // [N m]
};

/// Superpose the active nozzles.  Duties are assumed pre-clamped.
BodyWrench thruster_wrench(const ThrusterCommand& cmd, const ModuleParams& params);

/// Map a desired body wrench to duty cycles (minimum-effort split across the
/// opposed pairs).  If the request exceeds authority the wrench is scaled
/// uniformly so its direction is preserved.
ThrusterCommand allocate_wrench(double force_x_n, double torque_nm,
                                const ModuleParams& params);

/// Continuous-time derivative of the truth state under a command.
struct StateDerivative {
  Vec2 position_dot{Vec2::Zero()};
  double heading_dot{0.0};
  Vec2 velocity_dot{Vec2::Zero()};
  double rate_dot{0.0};
};
StateDerivative dynamics_derivative(const ModuleState& s, const ThrusterCommand& cmd,
                                    const ModuleParams& params);

/// Advance the truth state by one fixed RK4 step.  Throws std::invalid_argument
/// for dt <= 0.
ModuleState dynamics_step(const ModuleState& s, const ThrusterCommand& cmd,
                          const ModuleParams& params, double dt);

/// Translational + rotational kinetic energy (used by decay checks).
double kinetic_energy(const ModuleState& s, const ModuleParams& params);

}  // namespace proxsim
