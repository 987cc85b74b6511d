/// Monocular relative-pose pipeline: face identification from marker
/// distance-ratio signatures, P3P bootstrap, and a 10-state EKF over
/// (quaternion, position, velocity) of the target in the camera frame,
/// reduced to a planar pose for the navigation filter.
#pragma once

#include <optional>
#include <vector>

#include "proxsim/camera.hpp"
#include "proxsim/p3p.hpp"

namespace proxsim {

struct FaceMatch {
  int face_id{-1};
  // Correspondences ordered by marker corner id; feature_index[i] is the
  // index into the input feature list used for correspondence i.
  std::array<Correspondence, 3> correspondences;
  std::array<int, 3> feature_indices{-1, -1, -1};
  double score{0.0};  // worst distance-ratio mismatch
};

/// Identify which cube face a feature triple belongs to and order the
/// correspondences.  With more than three features every 3-subset is tried
/// and the sharpest match wins.  Throws std::runtime_error("ambiguous...")
/// when a subset matches several faces within tolerance and nothing matches
/// cleanly, std::runtime_error("no face...") when nothing matches at all.
FaceMatch identify_face(const std::vector<FeatureObservation>& features,
                        const MarkerSet& markers, double ratio_tolerance = 0.04);

struct VisionFilterConfig {
  double feature_sigma_rectified{0.0025};
  // Per-second process noise variances.
  double quat_process_var{4e-4};
  double position_process_var{1e-6};   // m^2/s, on top of velocity coupling
  double velocity_process_var{2.5e-3}; // (m/s)^2 per s
  Eigen::Matrix<double, 10, 1> initial_var{
      (Eigen::Matrix<double, 10, 1>() << 1e-4, 1e-4, 1e-4, 1e-4,  // quaternion
       1e-4, 1e-4, 1e-4,                                          // position
       1e-2, 1e-2, 1e-2).finished()};                             // velocity
  double convergence_pos_3sigma_m{0.005};
  double feature_gate_sq{18.42};  // chi^2_2 at 99.99%, guards face mis-ID
};

/// Naive full-quaternion EKF state: target pose in the camera frame.
struct VisionState {
  Vec4 quat{0, 0, 0, 1};  // scalar-last, camera_from_target
  Vec3 position{Vec3::Zero()};
  Vec3 velocity{Vec3::Zero()};
  Eigen::Matrix<double, 10, 10> covariance{Eigen::Matrix<double, 10, 10>::Identity()};
  double time_s{0.0};
  bool converged{false};

  Mat3 rotation() const { return quat_to_rot(Vec4(quat.normalized())); }
};

/// Seed the filter from a P3P solution.  When `pattern_extent_m` (largest
/// pairwise marker distance of the solved face) is positive, the initial
/// covariance is scaled to the solution's first-order error geometry: lateral
/// error grows with depth, depth error with depth squared over the pattern
/// extent.  Otherwise the configured initial variances are used as-is.
VisionState vision_init(const PoseCandidate& pose, const VisionFilterConfig& cfg,
                        double t, double pattern_extent_m = 0.0);

/// Constant-velocity prediction of the relative pose.  `omega_camera` is the
/// angular rate of the camera frame (camera coordinates, from the gyro); the
/// predicted pose is transported by the frame rotation so the chaser's own
/// spin does not appear as target motion.
void vision_predict(VisionState& vs, double dt, const VisionFilterConfig& cfg,
                    const Vec3& omega_camera = Vec3::Zero());

struct VisionUpdateStats {
  int used{0};
  int gated{0};
  int behind{0};
};

/// Sequential per-feature EKF update with the quotient measurement model.
/// Features whose predicted depth is non-positive are skipped; per-feature
/// Mahalanobis gating guards against face misidentification.
VisionUpdateStats vision_ekf_update(VisionState& vs,
                                    const std::vector<Correspondence>& correspondences,
                                    const VisionFilterConfig& cfg);

/// Measurement model for one marker: rectified (u', v') and its 2x10 Jacobian
/// in (quat, position, velocity).  Nullopt when the predicted depth is <= 0.
std::optional<Vec2> vision_measurement(const VisionState& vs, const Vec3& point_body,
                                       Eigen::Matrix<double, 2, 10>* jacobian);

/// Data association against the tracked state: markers on camera-facing faces
/// are projected through the filter pose and features are matched to their
/// nearest prediction (unique, within a radius scaled to the predicted
/// pattern separation).  Unlike the distance-ratio signature this stays valid
/// under strong perspective, so it carries the track at close range; it
/// requires a filter state to predict from, hence bootstrap still goes
/// through identify_face.  Fewer than three matches returns an empty list.
std::vector<Correspondence> associate_features(
    const VisionState& vs, const MarkerSet& markers,
    const std::vector<FeatureObservation>& features);

/// Relative planar pose of the target in the chaser body frame.
struct RelativePlanarPose {
  Vec2 position{Vec2::Zero()};
  double heading{0.0};
  Mat3 covariance{Mat3::Zero()};  // (x, y, psi)
  double time_s{0.0};
};

/// Reduce the 3-D vision state to the planar pose of the target in the chaser
/// body frame through the camera mounting; covariance is the projected filter
/// covariance floored at `floor_var` per axis.
RelativePlanarPose planar_pose_output(const VisionState& vs, const CameraMount& mount,
                                      const Vec3& floor_var);

/// Stateful frame-to-frame pipeline: identify -> init/update -> planar output.
class VisionPipeline {
 public:
  VisionPipeline(MarkerSet markers, CameraMount mount, VisionFilterConfig cfg,
                 Vec3 floor_var);

  /// Process one frame of features.  `prior` (camera_from_target) steers P3P
  /// disambiguation when the filter is not yet running; `gyro_rate_radps` is
  /// the chaser body yaw rate used to transport the prediction.  Returns the
  /// planar pose when the filter has converged.
  std::optional<RelativePlanarPose> process(const std::vector<FeatureObservation>& features,
                                            double t,
                                            const std::optional<PoseCandidate>& prior,
                                            double gyro_rate_radps = 0.0);

  bool initialized() const { return initialized_; }
  bool converged() const { return initialized_ && state_.converged; }
  const VisionState& state() const { return state_; }
  int frames_without_fix() const { return frames_without_fix_; }

 private:
  MarkerSet markers_;
  CameraMount mount_;
  VisionFilterConfig cfg_;
  Vec3 floor_var_;
  VisionState state_;
  bool initialized_{false};
  int frames_without_fix_{0};
};

}  // namespace proxsim
