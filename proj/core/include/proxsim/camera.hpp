/// Camera, marker, and feature types shared by the measurement synthesizer
/// and the vision pipeline.
#pragma once

#include <vector>

#include "proxsim/geometry.hpp"

namespace proxsim {

/// Rectified pinhole model.  Features are expressed in rectified coordinates
/// u' = X/Z, v' = Y/Z; focal length only matters when converting pixel-domain
/// noise figures.
struct CameraIntrinsics {
  double focal_px{400.0};
  double principal_u_px{0.0};
  double principal_v_px{0.0};
  double max_abs_rectified{0.7};  // half field of view, tan(~35 deg)
  double min_depth_m{0.02};
  double max_depth_m{5.0};
};

/// Camera pose on the module body: planar offset plus boresight heading.
/// At zero heading the optical axis looks along body +x, image right along
/// body -y, image down along -z (world down).
struct CameraMount {
  Vec2 position_body{Vec2::Zero()};
  double heading_rad{0.0};

  /// body_from_camera rotation.
  Mat3 rotation_body_camera() const {
    Mat3 r0;
    r0 << 0, 0, 1, -1, 0, 0, 0, -1, 0;
    Mat3 rz = Mat3::Identity();
    rz.topLeftCorner<2, 2>() = rot2(heading_rad);
    return rz * r0;
  }
};

/// One fiducial marker on the target body.
struct Marker {
  Vec3 position_body{Vec3::Zero()};  // target body frame [m]
  int face_id{0};
  int corner_id{0};  // 0 = right-angle vertex, 1 = tangent leg, 2 = vertical leg
};

/// Marker catalog for a cube target: one scalene right-triangle pattern per
/// lateral face so a face can be identified from pairwise distance ratios.
struct MarkerSet {
  double cube_size_m{0.1};
  std::vector<Marker> markers;

  std::vector<Marker> face(int face_id) const;
  Vec3 face_normal_body(int face_id) const;

  /// Throws std::invalid_argument if any face pattern is not scalene or two
  /// faces share a distance-ratio signature within the identification
  /// tolerance.
  void validate(double ratio_tolerance = 0.02) const;
};

/// Default catalog: legs (40,30), (44,26), (48,22), (52,18) mm on faces
/// +x, +y, -x, -y of a 0.1 m cube.
MarkerSet make_cube_markers(double cube_size_m = 0.1);

/// Detected blob centroid in rectified coordinates.
struct FeatureObservation {
  Vec2 rectified{Vec2::Zero()};  // (u', v')
  double time_s{0.0};
  int truth_marker_index{-1};  // synthesis label, not consumed by the pipeline
};

/// 3D-2D correspondence handed to the pose solvers.
struct Correspondence {
  Vec3 point_body{Vec3::Zero()};  // marker position, target body frame
  Vec2 rectified{Vec2::Zero()};
  int marker_index{-1};
};

}  // namespace proxsim
