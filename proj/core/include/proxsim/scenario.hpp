/// Scenario: everything a simulated run needs, loadable from a config file.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "proxsim/config.hpp"
#include "proxsim/dynamics.hpp"
#include "proxsim/estimator.hpp"
#include "proxsim/guidance.hpp"
#include "proxsim/sensors.hpp"
#include "proxsim/vision.hpp"

namespace proxsim {

enum class GuidanceMode { kClosedLoop, kScript, kNone };

/// Open-loop duty schedule: each segment's command holds from start_s until
/// the next segment.
struct ScriptSegment {
  double start_s{0.0};
  ThrusterCommand command;
};

struct Scenario {
  std::string name{"scenario"};
  double duration_s{60.0};
  double sim_rate_hz{1000.0};
  std::uint64_t seed{1};

  ModuleParams params;
  ModuleState initial_truth;
  bool randomize_start{false};
  Vec2 start_region_min{Vec2::Zero()};
  Vec2 start_region_max{Vec2::Zero()};
  bool randomize_heading{false};

  // Target body (cube) pose; the dock point sits dock_clearance_m outside
  // face 0 along its outward normal.  waypoint_only collapses the dock point
  // onto the center for pure navigation scenarios.
  Vec2 target_center{1.5, 1.5};
  double target_heading{0.0};
  Vec2 target_velocity{Vec2::Zero()};
  bool waypoint_only{false};
  double dock_clearance_m{0.055};

  AnchorSet anchors;
  UwbNoise uwb;
  double uwb_rate_hz{50.0};
  double uwb_jitter_s{0.0};

  ImuNoise imu;
  double imu_rate_hz{100.0};

  bool vision_enabled{true};
  double vision_rate_hz{20.0};
  double feature_sigma_rectified{0.0025};
  CameraIntrinsics intrinsics;
  CameraMount mount;
  MarkerSet markers;
  VisionFilterConfig vision_filter;

  FilterConfig filter;

  GuidanceMode mode{GuidanceMode::kClosedLoop};
  GuidanceConfig guidance;
  std::vector<ScriptSegment> script;

  double truth_log_rate_hz{120.0};

  /// Dock point and approach heading at time t (supports a drifting target).
  DockTarget dock_target(double t) const;
  Vec2 target_center_at(double t) const;

  static Scenario from_config(const ConfigFile& cfg);
  static Scenario from_file(const std::string& path);

  /// Throws ConfigError on inconsistent values (bad rates, too few anchors,
  /// malformed script, ...).
  void validate() const;
};

}  // namespace proxsim
