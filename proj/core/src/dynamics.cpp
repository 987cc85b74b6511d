#include "proxsim/dynamics.hpp"

#include <stdexcept>

namespace proxsim {
namespace {

// Nozzle geometry for the layout documented on ThrusterCommand.
// direction[i] is the thrust direction, arm_sign[i] the mount offset along
// body y in units of nozzle_arm_m.
constexpr double kDirX[4] = {1.0, 1.0, -1.0, -1.0};
constexpr double kArmSign[4] = {1.0, -1.0, 1.0, -1.0};

}  // namespace

BodyWrench thruster_wrench(const ThrusterCommand& cmd, const ModuleParams& params) {
  BodyWrench w;
  const double f = params.nozzle_thrust_n;
  const double d = params.nozzle_arm_m;
  for (int i = 0; i < 4; ++i) {
    if (!cmd.enabled[i]) continue;
    const double u = cmd.duty(i);
    w.force.x() += f * kDirX[i] * u;
    // torque = r x F with r = (0, arm_sign*d), F = (f*dir, 0)
    w.torque += -kArmSign[i] * d * f * kDirX[i] * u;
  }
  return w;
}

ThrusterCommand allocate_wrench(double force_x_n, double torque_nm,
                                const ModuleParams& params) {
  const double f = params.nozzle_thrust_n;
  const double d = params.nozzle_arm_m;
  const double p = force_x_n / f;
  const double q = torque_nm / (f * d);
  // u0 - u2 carries (p - q)/2, u1 - u3 carries (p + q)/2; activate one side
  // of each opposed pair only.
  const double a = 0.5 * (p - q);
  const double b = 0.5 * (p + q);
  ThrusterCommand cmd;
  cmd.duty(0) = std::max(a, 0.0);
  cmd.duty(2) = std::max(-a, 0.0);
  cmd.duty(1) = std::max(b, 0.0);
  cmd.duty(3) = std::max(-b, 0.0);
  const double peak = cmd.duty.maxCoeff();
  if (peak > 1.0) cmd.duty /= peak;  // saturate along the same wrench direction
  return cmd;
}

StateDerivative dynamics_derivative(const ModuleState& s, const ThrusterCommand& cmd,
                                    const ModuleParams& params) {
  const BodyWrench w = thruster_wrench(cmd, params);
  StateDerivative d;
  d.position_dot = rot2(s.heading) * s.velocity_body;
  d.heading_dot = s.rate;
  // Body-frame acceleration: thrust, velocity drag, transport term from the
  // rotating frame.
  d.velocity_dot = w.force / params.mass_kg - params.mu_g() * s.velocity_body -
                   planar_skew(s.rate) * s.velocity_body;
  d.rate_dot = (w.torque - params.rot_friction_nms * s.rate) / params.inertia_kgm2;
  return d;
}

namespace {

ModuleState add_scaled(const ModuleState& s, const StateDerivative& d, double h) {
  ModuleState out;
  out.position = s.position + h * d.position_dot;
  out.heading = s.heading + h * d.heading_dot;
  out.velocity_body = s.velocity_body + h * d.velocity_dot;
  out.rate = s.rate + h * d.rate_dot;
  return out;
}

}  // namespace

ModuleState dynamics_step(const ModuleState& s, const ThrusterCommand& cmd,
                          const ModuleParams& params, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("dynamics_step: dt must be positive");
  const StateDerivative k1 = dynamics_derivative(s, cmd, params);
  const StateDerivative k2 = dynamics_derivative(add_scaled(s, k1, dt / 2), cmd, params);
  const StateDerivative k3 = dynamics_derivative(add_scaled(s, k2, dt / 2), cmd, params);
  const StateDerivative k4 = dynamics_derivative(add_scaled(s, k3, dt), cmd, params);
  ModuleState out;
  out.position = s.position + dt / 6.0 *
      (k1.position_dot + 2 * k2.position_dot + 2 * k3.position_dot + k4.position_dot);
  out.heading = wrap_angle(s.heading + dt / 6.0 *
      (k1.heading_dot + 2 * k2.heading_dot + 2 * k3.heading_dot + k4.heading_dot));
  out.velocity_body = s.velocity_body + dt / 6.0 *
      (k1.velocity_dot + 2 * k2.velocity_dot + 2 * k3.velocity_dot + k4.velocity_dot);
  out.rate = s.rate + dt / 6.0 *
      (k1.rate_dot + 2 * k2.rate_dot + 2 * k3.rate_dot + k4.rate_dot);
  return out;
}

double kinetic_energy(const ModuleState& s, const ModuleParams& params) {
  return 0.5 * params.mass_kg * s.velocity_body.squaredNorm() +
         0.5 * params.inertia_kgm2 * s.rate * s.rate;
}

}  // namespace proxsim
