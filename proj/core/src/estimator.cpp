#include "proxsim/estimator.hpp"

#include <cmath>

namespace proxsim {
namespace {

// Continuous-time model matrices for given inputs: zeta' = A(t) zeta + b.
struct AffineModel {
  double z_psi, z_gyro;
  Vec2 accel_body;  // thrust / m
  double mu_g;

  void eval(double tau, Mat4& a, Vec4& b) const {
    a.setZero();
    a.topRightCorner<2, 2>() = rot2(z_psi + z_gyro * tau);
    a.bottomRightCorner<2, 2>() = -mu_g * Mat2::Identity() - planar_skew(z_gyro);
    b.setZero();
    b.tail<2>() = accel_body;
  }
};

// One RK4 step of the joint system (zeta, Phi) over [0, dt].
void integrate_joint(const AffineModel& m, double dt, Vec4& zeta, Mat4& phi) {
  Mat4 a1, a2, a3;
  Vec4 b1, b2, b3;
  m.eval(0.0, a1, b1);
  m.eval(dt / 2, a2, b2);
  m.eval(dt, a3, b3);

  const Vec4 k1 = a1 * zeta + b1;
  const Vec4 k2 = a2 * (zeta + dt / 2 * k1) + b2;
  const Vec4 k3 = a2 * (zeta + dt / 2 * k2) + b2;
  const Vec4 k4 = a3 * (zeta + dt * k3) + b3;

  const Mat4 f1 = a1 * phi;
  const Mat4 f2 = a2 * (phi + dt / 2 * f1);
  const Mat4 f3 = a2 * (phi + dt / 2 * f2);
  const Mat4 f4 = a3 * (phi + dt * f3);

  zeta += dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
  phi += dt / 6.0 * (f1 + 2 * f2 + 2 * f3 + f4);
}

void require_pd(const Mat4& p, const char* where) {
  Eigen::LLT<Mat4> llt(p);
  if (llt.info() != Eigen::Success)
    throw FilterNumericsError(std::string("covariance not positive definite in ") + where);
}

void symmetrize(Mat4& p) { p = ((p + p.transpose()) / 2.0).eval(); }

// Joseph-form measurement update, shared by all linearized updates.
void joseph_update(EstimatorState& est, const Eigen::VectorXd& innovation,
                   const Eigen::MatrixXd& h, const Eigen::MatrixXd& r_eff,
                   const char* where) {
  const Eigen::MatrixXd s = h * est.covariance * h.transpose() + r_eff;
  const Eigen::MatrixXd k = est.covariance * h.transpose() * s.inverse();
  est.state += k * innovation;
  const Mat4 ikh = Mat4::Identity() - k * h;
  est.covariance = ikh * est.covariance * ikh.transpose() + k * r_eff * k.transpose();
  symmetrize(est.covariance);
  require_pd(est.covariance, where);
}

}  // namespace

EstimatorState estimator_init(const Vec2& position, double t, const FilterConfig& cfg,
                              int num_anchors) {
  EstimatorState est;
  est.state.head<2>() = position;
  est.state.tail<2>().setZero();
  est.covariance = cfg.initial_var.asDiagonal();
  est.time_s = t;
  est.anchor_tracks.assign(static_cast<size_t>(num_anchors), AnchorTrack{});
  return est;
}

std::optional<Vec2> trilaterate(const AnchorSet& anchors,
                                const std::vector<RangeMeasurement>& round,
                                const Vec2& antenna_offset_body, double z_psi) {
  if (round.size() < 3) return std::nullopt;
  Vec2 p = Vec2::Zero();
  for (const auto& m : round) p += anchors.positions[m.anchor_id];
  p /= static_cast<double>(round.size());

  for (int iter = 0; iter < 20; ++iter) {
    Mat2 jtj = Mat2::Zero();
    Vec2 jtr = Vec2::Zero();
    for (const auto& m : round) {
      const Vec2 d = p - anchors.positions[m.anchor_id];
      const double r = d.norm();
      if (r < 1e-9) continue;
      const Vec2 j = d / r;
      jtj += j * j.transpose();
      jtr += j * (m.range_m - r);
    }
    if (std::abs(jtj.determinant()) < 1e-12) return std::nullopt;
    const Vec2 step = jtj.ldlt().solve(jtr);
    p += step;
    if (!p.allFinite()) return std::nullopt;
    if (step.norm() < 1e-10) break;
  }
  return Vec2(p - rot2(z_psi) * antenna_offset_body);
}

Vec4 propagate_mean(const Vec4& state, const ThrusterCommand& cmd, double z_gyro,
                    double z_psi, const ModuleParams& params, double dt) {
  const BodyWrench w = thruster_wrench(cmd, params);
  const AffineModel m{z_psi, z_gyro, w.force / params.mass_kg, params.mu_g()};
  Vec4 zeta = state;
  Mat4 phi = Mat4::Identity();
  integrate_joint(m, dt, zeta, phi);
  return zeta;
}

PredictArtifacts predict(EstimatorState& est, const ThrusterCommand& cmd, double z_gyro,
                         double z_psi, const ModuleParams& params,
                         const FilterConfig& cfg, double dt) {
  if (dt < 0.0) throw std::invalid_argument("predict: dt must be non-negative");
  PredictArtifacts out;
  if (dt == 0.0) return out;

  const BodyWrench w = thruster_wrench(cmd, params);
  const AffineModel m{z_psi, z_gyro, w.force / params.mass_kg, params.mu_g()};
  Vec4 zeta = est.state;
  Mat4 phi = Mat4::Identity();
  integrate_joint(m, dt, zeta, phi);

  // Acceleration-level process noise (body frame) mapped into (x, rho):
  // position through the mid-interval attitude, velocity directly.
  Eigen::Matrix<double, 4, 2> g;
  g.topRows<2>() = 0.5 * dt * dt * rot2(z_psi + z_gyro * dt / 2);
  g.bottomRows<2>() = dt * Mat2::Identity();
  const Mat4 q = g * cfg.accel_process_var.asDiagonal() * g.transpose();

  est.state = zeta;
  est.covariance = phi * est.covariance * phi.transpose() + q;
  symmetrize(est.covariance);
  require_pd(est.covariance, "predict");
  est.time_s += dt;

  out.transition = phi;
  out.process_noise = q;
  return out;
}

Vec2 accel_model(const Vec4& state, const ThrusterCommand& cmd,
                 const ModuleParams& params, Eigen::Matrix<double, 2, 4>* jacobian) {
  const BodyWrench w = thruster_wrench(cmd, params);
  if (jacobian) {
    jacobian->setZero();
    jacobian->rightCols<2>() = -params.mu_g() * Mat2::Identity();
  }
  return w.force / params.mass_kg - params.mu_g() * state.tail<2>();
}

std::optional<double> range_model(const Vec4& state, const Vec2& anchor_pos,
                                  const Vec2& antenna_offset_body, double z_psi,
                                  Eigen::Matrix<double, 1, 4>* jacobian) {
  const Vec2 antenna = state.head<2>() + rot2(z_psi) * antenna_offset_body;
  const Vec2 d = antenna - anchor_pos;
  const double range = d.norm();
  if (range < 1e-9) return std::nullopt;
  if (jacobian) {
    jacobian->setZero();
    jacobian->leftCols<2>() = (d / range).transpose();
  }
  return range;
}

UpdateOutcome update_accel(EstimatorState& est, const AccelMeasurement& z,
                           const ThrusterCommand& cmd, const ModuleParams& params,
                           const FilterConfig& cfg) {
  Eigen::Matrix<double, 2, 4> h;
  const Vec2 predicted = accel_model(est.state, cmd, params, &h);
  const Mat2 r = cfg.accel_sigma_mps2.array().square().matrix().asDiagonal();

  const Vec2 y = z.specific_force_mps2 - predicted;
  const Mat2 s = h * est.covariance * h.transpose() + r;
  UpdateOutcome outcome;
  outcome.mahalanobis_sq = mahalanobis_sq(y, s);
  if (cfg.gating_enabled && outcome.mahalanobis_sq > cfg.vector_gate_sq) return outcome;

  joseph_update(est, y, h, r, "update_accel");
  outcome.accepted = true;
  return outcome;
}

double underweight_beta(const AnchorTrack& track, double t, const FilterConfig& cfg) {
  const int n = cfg.underweight_updates;
  if (n <= 0 || cfg.underweight_factor <= 1.0) return 1.0;
  const int remaining =
      (t - track.last_accept_s > cfg.underweight_gap_s) ? n : track.underweight_remaining;
  if (remaining <= 0) return 1.0;
  return std::pow(cfg.underweight_factor, static_cast<double>(remaining) / n);
}

UpdateOutcome update_range(EstimatorState& est, const RangeMeasurement& meas,
                           const Vec2& anchor_pos, double z_psi,
                           const FilterConfig& cfg) {
  UpdateOutcome outcome;
  Eigen::Matrix<double, 1, 4> h;
  const auto model = range_model(est.state, anchor_pos, cfg.antenna_offset_body, z_psi, &h);
  if (!model) {
    outcome.degenerate = true;  // antenna on top of the anchor, direction undefined
    return outcome;
  }
  const double predicted = *model;

  AnchorTrack* track = nullptr;
  if (meas.anchor_id >= 0 &&
      meas.anchor_id < static_cast<int>(est.anchor_tracks.size()))
    track = &est.anchor_tracks[meas.anchor_id];
  const double beta =
      track ? underweight_beta(*track, meas.time_s, cfg) : 1.0;
  outcome.beta = beta;

  const double r_eff = beta * cfg.range_var_m2;
  const double y = meas.range_m - predicted;
  const double s = (h * est.covariance * h.transpose())(0, 0) + r_eff;
  outcome.mahalanobis_sq = y * y / s;
  if (cfg.gating_enabled && outcome.mahalanobis_sq > cfg.range_gate_sq) return outcome;

  Eigen::VectorXd innovation(1);
  innovation << y;
  Eigen::MatrixXd r_mat(1, 1);
  r_mat << r_eff;
  joseph_update(est, innovation, h, r_mat, "update_range");
  outcome.accepted = true;

  if (track) {
    const int n = cfg.underweight_updates;
    const int remaining = (meas.time_s - track->last_accept_s > cfg.underweight_gap_s)
                              ? n
                              : track->underweight_remaining;
    track->underweight_remaining = std::max(remaining - 1, 0);
    track->last_accept_s = meas.time_s;
  }
  return outcome;
}

UpdateOutcome update_vision_pose(EstimatorState& est, const PlanarPoseMeasurement& meas,
                                 const FilterConfig& cfg) {
  Eigen::Matrix<double, 2, 4> h = Eigen::Matrix<double, 2, 4>::Zero();
  h.leftCols<2>() = Mat2::Identity();
  Mat2 r = meas.covariance.topLeftCorner<2, 2>();
  // never trust vision below the configured floor
  r(0, 0) = std::max(r(0, 0), cfg.vision_var(0));
  r(1, 1) = std::max(r(1, 1), cfg.vision_var(1));

  const Vec2 y = meas.position - est.position();
  const Mat2 s = h * est.covariance * h.transpose() + r;
  UpdateOutcome outcome;
  outcome.mahalanobis_sq = mahalanobis_sq(y, s);
  if (cfg.gating_enabled && outcome.mahalanobis_sq > cfg.vector_gate_sq) return outcome;

  joseph_update(est, y, h, r, "update_vision_pose");
  outcome.accepted = true;
  return outcome;
}

double mahalanobis_sq(const Eigen::VectorXd& innovation, const Eigen::MatrixXd& s) {
  return innovation.dot(s.ldlt().solve(innovation));
}

CovarianceHealth covariance_health(const Eigen::MatrixXd& p) {
  CovarianceHealth h;
  h.max_asymmetry = (p - p.transpose()).cwiseAbs().maxCoeff();
  const Eigen::MatrixXd sym = (p + p.transpose()) / 2.0;
  Eigen::LLT<Eigen::MatrixXd> llt(sym);
  h.positive_definite = (llt.info() == Eigen::Success);
  return h;
}

}  // namespace proxsim
