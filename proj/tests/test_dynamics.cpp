#include "doctest.h"
#include "proxsim/dynamics.hpp"

#include <cmath>

using namespace proxsim;

namespace {

ModuleParams nominal() { return ModuleParams{}; }

double state_distance(const ModuleState& a, const ModuleState& b) {
  return std::sqrt((a.position - b.position).squaredNorm() +
                   (a.velocity_body - b.velocity_body).squaredNorm() +
                   wrap_angle(a.heading - b.heading) * wrap_angle(a.heading - b.heading) +
                   (a.rate - b.rate) * (a.rate - b.rate));
}

ModuleState integrate(ModuleState s, const ThrusterCommand& cmd,
                      const ModuleParams& p, double t_end, double dt) {
  const long n = std::lround(t_end / dt);
  for (long i = 0; i < n; ++i) s = dynamics_step(s, cmd, p, dt);
  return s;
}

}  // namespace

TEST_CASE("wrap_angle maps into (-pi, pi]") {
  CHECK(wrap_angle(0.0) == doctest::Approx(0.0));
  CHECK(wrap_angle(M_PI) == doctest::Approx(M_PI));
  CHECK(wrap_angle(-M_PI) == doctest::Approx(M_PI));
  CHECK(wrap_angle(3.0 * M_PI) == doctest::Approx(M_PI));
  CHECK(wrap_angle(0.1 + 6.0 * M_PI) == doctest::Approx(0.1));
  CHECK(wrap_angle(-0.1 - 6.0 * M_PI) == doctest::Approx(-0.1));
}

TEST_CASE("rot2 is orthonormal with unit determinant") {
  for (double psi : {-3.0, -0.7, 0.0, 0.4, 2.9}) {
    const Mat2 r = rot2(psi);
    CHECK((r * r.transpose() - Mat2::Identity()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(r.determinant() == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("single nozzle wrench") {
  ThrusterCommand cmd;
  cmd.duty(0) = 1.0;  // +x thrust mounted at +arm
  const BodyWrench w = thruster_wrench(cmd, nominal());
  CHECK(w.force.x() == doctest::Approx(0.1));
  CHECK(w.force.y() == doctest::Approx(0.0));
  CHECK(w.torque == doctest::Approx(-0.005));
}

TEST_CASE("opposed pair gives a pure couple of 2*duty*F*d") {
  ThrusterCommand cmd;
  cmd.duty(0) = 0.5;  // +x at +arm
  cmd.duty(3) = 0.5;  // -x at -arm
  const BodyWrench w = thruster_wrench(cmd, nominal());
  CHECK(w.force.norm() < 1e-15);
  CHECK(std::abs(w.torque) == doctest::Approx(2.0 * 0.5 * 0.1 * 0.05));
}

TEST_CASE("disabled nozzles contribute nothing") {
  ThrusterCommand cmd;
  cmd.duty.setConstant(1.0);
  cmd.enabled = {false, false, false, false};
  const BodyWrench w = thruster_wrench(cmd, nominal());
  CHECK(w.force.norm() == 0.0);
  CHECK(w.torque == 0.0);
}

TEST_CASE("allocate_wrench inverts thruster_wrench within authority") {
  const ModuleParams p = nominal();
  for (double fx : {-0.15, -0.02, 0.0, 0.07, 0.18}) {
    for (double tau : {-0.008, 0.0, 0.003, 0.009}) {
      const ThrusterCommand cmd = allocate_wrench(fx, tau, p);
      for (int i = 0; i < 4; ++i) {
        CHECK(cmd.duty(i) >= 0.0);
        CHECK(cmd.duty(i) <= 1.0);
      }
      const BodyWrench w = thruster_wrench(cmd, p);
      CHECK(w.force.x() == doctest::Approx(fx).epsilon(1e-12));
      CHECK(w.torque == doctest::Approx(tau).epsilon(1e-12));
    }
  }
}

TEST_CASE("allocate_wrench saturates along the requested direction") {
  const ModuleParams p = nominal();
  const double fx = 0.5, tau = 0.02;  // far beyond authority
  const ThrusterCommand cmd = allocate_wrench(fx, tau, p);
  CHECK(cmd.duty.maxCoeff() == doctest::Approx(1.0));
  const BodyWrench w = thruster_wrench(cmd, p);
  // direction preserved: achieved wrench is a positive scaling of the request
  const double s = w.force.x() / fx;
  CHECK(s > 0.0);
  CHECK(s < 1.0);
  CHECK(w.torque == doctest::Approx(s * tau).epsilon(1e-12));
}

TEST_CASE("friction force matches the documented hand evaluation") {
  // -mu*m*g*rho with mu=0.015, m=0.795, g=9.81 -> (-0.11701, 0) N as printed;
  // exact product is -0.11698425.
  ModuleParams p = nominal();
  p.gravity_mps2 = 9.81;
  ModuleState s;
  s.velocity_body = Vec2(1.0, 0.0);
  const StateDerivative d = dynamics_derivative(s, ThrusterCommand{}, p);
  const Vec2 friction_force = p.mass_kg * d.velocity_dot;
  CHECK(friction_force.x() == doctest::Approx(-0.11698425).epsilon(1e-9));
  CHECK(std::abs(friction_force.x() - (-0.11701)) < 5e-5);
  CHECK(friction_force.y() == doctest::Approx(0.0));

  // linearity: rho = (0, -2) -> (0, +2 * 0.11698425)
  s.velocity_body = Vec2(0.0, -2.0);
  const Vec2 f2 = p.mass_kg * dynamics_derivative(s, ThrusterCommand{}, p).velocity_dot;
  CHECK(f2.x() == doctest::Approx(0.0));
  CHECK(f2.y() == doctest::Approx(2.0 * 0.11698425).epsilon(1e-9));
}

TEST_CASE("no motion, no friction") {
  const StateDerivative d =
      dynamics_derivative(ModuleState{}, ThrusterCommand{}, nominal());
  CHECK(d.velocity_dot.norm() == 0.0);
  CHECK(d.position_dot.norm() == 0.0);
  CHECK(d.rate_dot == 0.0);
}

TEST_CASE("dynamics_step rejects non-positive dt") {
  CHECK_THROWS_AS(dynamics_step(ModuleState{}, ThrusterCommand{}, nominal(), 0.0),
                  std::invalid_argument);
  CHECK_THROWS_AS(dynamics_step(ModuleState{}, ThrusterCommand{}, nominal(), -0.01),
                  std::invalid_argument);
}

TEST_CASE("equilibrium is a fixed point") {
  const ModuleState s = dynamics_step(ModuleState{}, ThrusterCommand{}, nominal(), 0.01);
  CHECK(s.position.norm() == 0.0);
  CHECK(s.velocity_body.norm() == 0.0);
  CHECK(s.heading == 0.0);
  CHECK(s.rate == 0.0);
}

TEST_CASE("speed decays exponentially at rate mu*g") {
  const ModuleParams p = nominal();
  ModuleState s;
  s.velocity_body = Vec2(1.0, 0.0);
  s = integrate(s, ThrusterCommand{}, p, 1.0, 0.01);
  CHECK(s.velocity_body.x() ==
        doctest::Approx(std::exp(-p.mu_g())).epsilon(1e-9));
  CHECK(s.velocity_body.y() == doctest::Approx(0.0));
}

TEST_CASE("frictionless constant thrust gives 0.5*a*t^2") {
  ModuleParams p = nominal();
  p.friction_mu = 0.0;
  ThrusterCommand cmd;
  cmd.duty(0) = 0.5;
  cmd.duty(1) = 0.5;  // pure +x force 0.1 N, zero torque
  ModuleState s = integrate(ModuleState{}, cmd, p, 2.0, 0.01);
  const double a = 0.1 / p.mass_kg;
  CHECK(s.position.x() == doctest::Approx(0.5 * a * 4.0).epsilon(1e-12));
  CHECK(s.position.y() == doctest::Approx(0.0));
  CHECK(s.velocity_body.x() == doctest::Approx(a * 2.0).epsilon(1e-12));
  CHECK(s.heading == doctest::Approx(0.0));
}

TEST_CASE("coasting kinetic energy strictly decreases") {
  const ModuleParams p = nominal();
  ModuleState s;
  s.velocity_body = Vec2(0.08, -0.03);
  s.rate = 0.5;
  double e = kinetic_energy(s, p);
  for (int i = 0; i < 500; ++i) {
    s = dynamics_step(s, ThrusterCommand{}, p, 0.01);
    const double e2 = kinetic_energy(s, p);
    CHECK(e2 < e);
    e = e2;
  }
}

TEST_CASE("step is deterministic") {
  ModuleState s;
  s.velocity_body = Vec2(0.02, 0.01);
  s.rate = 0.3;
  ThrusterCommand cmd;
  cmd.duty << 0.4, 0.1, 0.0, 0.2;
  const ModuleState a = dynamics_step(s, cmd, nominal(), 0.01);
  const ModuleState b = dynamics_step(s, cmd, nominal(), 0.01);
  CHECK(a.position == b.position);
  CHECK(a.velocity_body == b.velocity_body);
  CHECK(a.heading == b.heading);
  CHECK(a.rate == b.rate);
}

TEST_CASE("RK4 order: halving dt shrinks the error ~16x") {
  const ModuleParams p = nominal();
  ModuleState s0;
  s0.velocity_body = Vec2(0.05, 0.02);
  s0.rate = 0.8;
  ThrusterCommand cmd;
  cmd.duty << 0.8, 0.2, 0.0, 0.1;
  const double t_end = 2.0;
  const ModuleState ref = integrate(s0, cmd, p, t_end, 0.00125);
  const double e1 = state_distance(integrate(s0, cmd, p, t_end, 0.02), ref);
  const double e2 = state_distance(integrate(s0, cmd, p, t_end, 0.01), ref);
  const double ratio = e1 / e2;
  CHECK(ratio > 8.0);
  CHECK(ratio < 32.0);
}
