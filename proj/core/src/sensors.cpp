#include "proxsim/sensors.hpp"

#include <cmath>
#include <stdexcept>

namespace proxsim {

GyroMeasurement sample_gyro(const ModuleState& truth, const ImuNoise& cfg,
                            RandomStream& rng, double t) {
  return {truth.rate + rng.gaussian(0.0, cfg.gyro_sigma_radps), t};
}

AttitudeMeasurement sample_attitude(const ModuleState& truth, const ImuNoise& cfg,
                                    RandomStream& rng, double t) {
  return {wrap_angle(truth.heading + rng.gaussian(0.0, cfg.attitude_sigma_rad)), t};
}

AccelMeasurement sample_accel(const ModuleState& truth, const ThrusterCommand& cmd,
                              const ModuleParams& params, const ImuNoise& cfg,
                              RandomStream& rng, double t) {
  const BodyWrench w = thruster_wrench(cmd, params);
  Vec2 z = w.force / params.mass_kg - params.mu_g() * truth.velocity_body;
  z.x() += rng.gaussian(0.0, cfg.accel_sigma_mps2);
  z.y() += rng.gaussian(0.0, cfg.accel_sigma_mps2);
  return {z, t};
}

std::vector<RangeMeasurement> sample_uwb_round(const Vec2& antenna_world,
                                               const AnchorSet& anchors,
                                               double separation_to_target_m,
                                               const UwbNoise& cfg, RandomStream& rng,
                                               double t) {
  std::vector<RangeMeasurement> out;
  if (separation_to_target_m < cfg.nearfield_radius_m) return out;  // dropped round
  out.reserve(anchors.positions.size());
  for (int i = 0; i < static_cast<int>(anchors.positions.size()); ++i) {
    const double truth_range = (antenna_world - anchors.positions[i]).norm();
    const bool outlier = rng.chance(cfg.outlier_prob);
    const double sigma = outlier ? cfg.outlier_sigma_m : cfg.inlier_sigma_m;
    const double r = std::max(0.0, truth_range + rng.gaussian(0.0, sigma));
    out.push_back({i, r, t, outlier});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Marker catalog

std::vector<Marker> MarkerSet::face(int face_id) const {
  std::vector<Marker> out;
  for (const auto& m : markers)
    if (m.face_id == face_id) out.push_back(m);
  return out;
}

Vec3 MarkerSet::face_normal_body(int face_id) const {
  switch (face_id) {
    case 0: return Vec3(1, 0, 0);
    case 1: return Vec3(0, 1, 0);
    case 2: return Vec3(-1, 0, 0);
    case 3: return Vec3(0, -1, 0);
    default: throw std::invalid_argument("face_normal_body: bad face id");
  }
}

namespace {

// Sorted pairwise distances of a 3-marker pattern.
std::array<double, 3> pattern_distances(const std::vector<Marker>& f) {
  std::array<double, 3> d{(f[0].position_body - f[1].position_body).norm(),
                          (f[1].position_body - f[2].position_body).norm(),
                          (f[0].position_body - f[2].position_body).norm()};
  std::sort(d.begin(), d.end());
  return d;
}

}  // namespace

void MarkerSet::validate(double ratio_tolerance) const {
  std::vector<std::array<double, 2>> signatures;
  for (int face_id = 0; face_id < 4; ++face_id) {
    const auto f = face(face_id);
    if (f.size() != 3)
      throw std::invalid_argument("MarkerSet: each face needs exactly 3 markers");
    const auto d = pattern_distances(f);
    if (d[0] <= 1e-9)
      throw std::invalid_argument("MarkerSet: coincident markers on a face");
    // Scalene requirement: every edge pair distinct beyond the tolerance.
    if (d[1] / d[2] > 1.0 - ratio_tolerance || d[0] / d[1] > 1.0 - ratio_tolerance)
      throw std::invalid_argument("MarkerSet: face pattern is not clearly scalene");
    signatures.push_back({d[0] / d[2], d[1] / d[2]});
  }
  for (size_t i = 0; i < signatures.size(); ++i)
    for (size_t j = i + 1; j < signatures.size(); ++j) {
      const double da = std::abs(signatures[i][0] - signatures[j][0]);
      const double db = std::abs(signatures[i][1] - signatures[j][1]);
      if (da < ratio_tolerance && db < ratio_tolerance)
        throw std::invalid_argument("MarkerSet: two faces share a distance signature");
    }
}

MarkerSet make_cube_markers(double cube_size_m) {
  // Right-triangle leg lengths per face, metres.  Distinct on every face so
  // the sorted distance-ratio signature identifies the face.
  constexpr double legs[4][2] = {
      {0.040, 0.030}, {0.044, 0.026}, {0.048, 0.022}, {0.052, 0.018}};
  MarkerSet set;
  set.cube_size_m = cube_size_m;
  const double h = cube_size_m / 2.0;
  for (int face_id = 0; face_id < 4; ++face_id) {
    const Vec3 n = set.face_normal_body(face_id);
    const Vec3 up(0, 0, 1);
    const Vec3 tangent = up.cross(n);  // in-plane horizontal
    const Vec3 center = h * n;
    const double a = legs[face_id][0], b = legs[face_id][1];
    // Right angle at the lower-tangent corner, legs along tangent and up,
    // shifted so the pattern straddles the face center.
    const Vec3 corner = center - 0.5 * a * tangent - 0.5 * b * up;
    set.markers.push_back({corner, face_id, 0});
    set.markers.push_back({corner + a * tangent, face_id, 1});
    set.markers.push_back({corner + b * up, face_id, 2});
  }
  return set;
}

// ---------------------------------------------------------------------------
// Camera projection

std::vector<FeatureObservation> project_features(
    const ModuleState& chaser_truth, const CameraMount& mount,
    const Vec2& target_position, double target_heading, const MarkerSet& markers,
    const CameraIntrinsics& intr, double feature_sigma_rectified, RandomStream& rng,
    double t) {
  // world_from_camera
  Mat3 r_wb = Mat3::Identity();
  r_wb.topLeftCorner<2, 2>() = rot2(chaser_truth.heading);
  const Mat3 r_wc = r_wb * mount.rotation_body_camera();
  Vec3 cam_w = Vec3::Zero();
  cam_w.head<2>() = chaser_truth.position + rot2(chaser_truth.heading) * mount.position_body;

  const Mat2 r_wt2 = rot2(target_heading);
  std::vector<FeatureObservation> out;
  for (int idx = 0; idx < static_cast<int>(markers.markers.size()); ++idx) {
    const Marker& m = markers.markers[idx];
    Vec3 p_w;
    p_w.head<2>() = target_position + r_wt2 * m.position_body.head<2>();
    p_w.z() = m.position_body.z();

    const Vec3 p_c = r_wc.transpose() * (p_w - cam_w);
    if (p_c.z() < intr.min_depth_m || p_c.z() > intr.max_depth_m) continue;

    // Face must point toward the camera, with a grazing-angle cutoff so
    // near-edge-on patterns (degenerate triangles in the image) are culled.
    Vec3 n_w;
    const Vec3 n_b = markers.face_normal_body(m.face_id);
    n_w.head<2>() = r_wt2 * n_b.head<2>();
    n_w.z() = n_b.z();
    const Vec3 to_cam = (cam_w - p_w).normalized();
    if (n_w.dot(to_cam) < 0.17) continue;  // ~80 deg incidence limit

    Vec2 uv(p_c.x() / p_c.z(), p_c.y() / p_c.z());
    if (std::abs(uv.x()) > intr.max_abs_rectified ||
        std::abs(uv.y()) > intr.max_abs_rectified)
      continue;

    uv.x() += rng.gaussian(0.0, feature_sigma_rectified);
    uv.y() += rng.gaussian(0.0, feature_sigma_rectified);
    out.push_back({uv, t, idx});
  }
  return out;
}

}  // namespace proxsim
