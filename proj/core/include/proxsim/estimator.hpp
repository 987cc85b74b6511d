/// Discrete EKF over zeta = (x, rho): world position and body-frame velocity.
/// Attitude and rate enter as measured inputs (AHRS heading, gyro), so the
/// filter state stays linear-Gaussian friendly; accelerometer, UWB ranges and
/// vision pose updates are Mahalanobis-gated, with covariance under-weighting
/// on range reacquisition after dropout.
#pragma once

#include <optional>
#include <stdexcept>
#include <vector>

#include "proxsim/dynamics.hpp"
#include "proxsim/sensors.hpp"

namespace proxsim {

struct FilterNumericsError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct FilterConfig {
  Vec2 accel_sigma_mps2{0.05 * 9.80665, 0.05 * 9.80665};
  double range_var_m2{0.08 * 0.08};
  Vec3 vision_var{0.001, 0.001, 0.00225};  // m^2, m^2, rad^2 floor
  Vec2 accel_process_var{8e-4, 8e-4};      // acceleration-level Q [m^2 s^-4]
  double range_gate_sq{15.14};             // chi^2_1 at 99.99%
  double vector_gate_sq{18.42};            // chi^2_2 at 99.99%
  bool gating_enabled{true};
  bool accel_updates_enabled{true};
  double underweight_factor{4.0};
  int underweight_updates{5};
  double underweight_gap_s{0.5};
  Vec2 antenna_offset_body{0.0, 0.0};
  Vec4 initial_var{0.25, 0.25, 0.01, 0.01};
};

/// Per-anchor bookkeeping for reacquisition under-weighting.
struct AnchorTrack {
  double last_accept_s{-1e18};
  int underweight_remaining{0};
};

struct EstimatorState {
  Vec4 state{Vec4::Zero()};  // (x, y, vx_body, vy_body)
  Mat4 covariance{Mat4::Identity()};
  double time_s{0.0};
  std::vector<AnchorTrack> anchor_tracks;

  Vec2 position() const { return state.head<2>(); }
  Vec2 velocity_body() const { return state.tail<2>(); }
};

struct UpdateOutcome {
  bool accepted{false};
  bool degenerate{false};
  double mahalanobis_sq{0.0};
  double beta{1.0};  // covariance inflation applied to this update
};

/// Planar pose measurement of the chaser in the world frame (vision output
/// composed with the target's world pose).
struct PlanarPoseMeasurement {
  Vec2 position{Vec2::Zero()};
  double heading{0.0};
  Mat3 covariance{Mat3::Identity()};
  double time_s{0.0};
};

EstimatorState estimator_init(const Vec2& position, double t, const FilterConfig& cfg,
                              int num_anchors);

/// Gauss-Newton range trilateration for initialization; returns the module
/// (COM) position, or nothing when geometry/iteration fails.
std::optional<Vec2> trilaterate(const AnchorSet& anchors,
                                const std::vector<RangeMeasurement>& round,
                                const Vec2& antenna_offset_body, double z_psi);

/// Mean and covariance propagation over dt using measured attitude z_psi and
/// rate z_gyro.  The returned transition matrix is the exact Jacobian of the
/// discrete map (the system is affine in zeta for given inputs).
struct PredictArtifacts {
  Mat4 transition{Mat4::Identity()};
  Mat4 process_noise{Mat4::Zero()};
};
PredictArtifacts predict(EstimatorState& est, const ThrusterCommand& cmd, double z_gyro,
                         double z_psi, const ModuleParams& params,
                         const FilterConfig& cfg, double dt);

/// Mean-only propagation (the map whose Jacobian is PredictArtifacts::transition).
Vec4 propagate_mean(const Vec4& state, const ThrusterCommand& cmd, double z_gyro,
                    double z_psi, const ModuleParams& params, double dt);

/// Accelerometer measurement model: predicted specific force and, when
/// requested, its Jacobian with respect to zeta.
Vec2 accel_model(const Vec4& state, const ThrusterCommand& cmd,
                 const ModuleParams& params, Eigen::Matrix<double, 2, 4>* jacobian);

/// Range measurement model for one anchor; nullopt when the antenna sits on
/// the anchor (direction undefined).
std::optional<double> range_model(const Vec4& state, const Vec2& anchor_pos,
                                  const Vec2& antenna_offset_body, double z_psi,
                                  Eigen::Matrix<double, 1, 4>* jacobian);

UpdateOutcome update_accel(EstimatorState& est, const AccelMeasurement& z,
                           const ThrusterCommand& cmd, const ModuleParams& params,
                           const FilterConfig& cfg);

UpdateOutcome update_range(EstimatorState& est, const RangeMeasurement& meas,
                           const Vec2& anchor_pos, double z_psi,
                           const FilterConfig& cfg);

UpdateOutcome update_vision_pose(EstimatorState& est, const PlanarPoseMeasurement& meas,
                                 const FilterConfig& cfg);

/// Squared Mahalanobis distance of an innovation.
double mahalanobis_sq(const Eigen::VectorXd& innovation, const Eigen::MatrixXd& s);

/// Covariance inflation factor for the next range update of an anchor at
/// time t (geometric annealing from underweight_factor to 1).
double underweight_beta(const AnchorTrack& track, double t, const FilterConfig& cfg);

/// Symmetry residual and positive-definiteness, for covariance health audits.
struct CovarianceHealth {
  double max_asymmetry{0.0};
  bool positive_definite{true};
};
CovarianceHealth covariance_health(const Eigen::MatrixXd& p);

}  // namespace proxsim
