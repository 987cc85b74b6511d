/// Measurement synthesis: time-stamped noisy gyro, attitude, accelerometer,
/// UWB range, and camera feature observations from ground truth.
#pragma once

#include <optional>
#include <vector>

#include "proxsim/camera.hpp"
#include "proxsim/dynamics.hpp"
#include "proxsim/random.hpp"

namespace proxsim {

struct ImuNoise {
  double gyro_sigma_radps{0.0035};
  double attitude_sigma_rad{0.002};
  double accel_sigma_mps2{0.05 * 9.80665};
};

struct UwbNoise {
  double inlier_sigma_m{0.01};
  double outlier_sigma_m{0.10};
  double outlier_prob{0.10};
  double nearfield_radius_m{0.10};
};

struct AnchorSet {
  std::vector<Vec2> positions;  // world [m], >= 3 for planar trilateration
};

struct GyroMeasurement {
  double rate_radps{0.0};
  double time_s{0.0};
};

struct AttitudeMeasurement {
  double heading_rad{0.0};
  double time_s{0.0};
};

struct AccelMeasurement {
  Vec2 specific_force_mps2{Vec2::Zero()};
  double time_s{0.0};
};

struct RangeMeasurement {
  int anchor_id{0};
  double range_m{0.0};
  double time_s{0.0};
  bool truth_outlier{false};  // synthesis label for counting, not fused
};

GyroMeasurement sample_gyro(const ModuleState& truth, const ImuNoise& cfg,
                            RandomStream& rng, double t);

AttitudeMeasurement sample_attitude(const ModuleState& truth, const ImuNoise& cfg,
                                    RandomStream& rng, double t);

/// Specific force sensed at the COM: thrust/m - mu*g*rho (velocity drag), the
/// transport term cancels in the body frame.
AccelMeasurement sample_accel(const ModuleState& truth, const ThrusterCommand& cmd,
                              const ModuleParams& params, const ImuNoise& cfg,
                              RandomStream& rng, double t);

/// One TWR round: a range per anchor, or an empty round when the module is
/// within the near-field radius of the target (separation argument).  Ranges
/// are clamped at zero; each draw is tagged with its mixture component.
std::vector<RangeMeasurement> sample_uwb_round(const Vec2& antenna_world,
                                               const AnchorSet& anchors,
                                               double separation_to_target_m,
                                               const UwbNoise& cfg, RandomStream& rng,
                                               double t);

/// Project the catalog markers through a rectified pinhole camera.
/// Emits a feature per marker that is in front of the camera, inside the
/// field of view, and on a face oriented toward the camera.
/// target_heading/target_position place the target body in the world;
/// chaser pose and mount place the camera.
std::vector<FeatureObservation> project_features(
    const ModuleState& chaser_truth, const CameraMount& mount,
    const Vec2& target_position, double target_heading, const MarkerSet& markers,
    const CameraIntrinsics& intr, double feature_sigma_rectified, RandomStream& rng,
    double t);

}  // namespace proxsim
