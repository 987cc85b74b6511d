#include "proxsim/vision.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace proxsim {
namespace {

using Mat10 = Eigen::Matrix<double, 10, 10>;
using Vec10 = Eigen::Matrix<double, 10, 1>;

struct SubsetMatch {
  int face_id{-1};
  double score{std::numeric_limits<double>::infinity()};
  std::array<int, 3> order{0, 1, 2};  // feature index per marker corner
};

// Match one observed triple against one face pattern.  Both are reduced to
// sorted pairwise distance ratios; ordering is recovered by walking the
// sorted edges (the vertex opposite the longest edge is unique in a scalene
// triangle).
std::optional<SubsetMatch> match_subset_to_face(
    const std::array<Vec2, 3>& obs, const std::vector<Marker>& face_markers,
    int face_id, double tolerance) {
  // edge k is opposite vertex k
  auto edges = [](const std::array<Vec2, 3>& p) {
    return std::array<double, 3>{(p[1] - p[2]).norm(), (p[0] - p[2]).norm(),
                                 (p[0] - p[1]).norm()};
  };
  std::array<double, 3> model_edges{
      (face_markers[1].position_body - face_markers[2].position_body).norm(),
      (face_markers[0].position_body - face_markers[2].position_body).norm(),
      (face_markers[0].position_body - face_markers[1].position_body).norm()};
  const std::array<double, 3> obs_edges = edges(obs);

  // sort indices by edge length
  std::array<int, 3> mo{0, 1, 2}, oo{0, 1, 2};
  std::sort(mo.begin(), mo.end(),
            [&](int a, int b) { return model_edges[a] < model_edges[b]; });
  std::sort(oo.begin(), oo.end(),
            [&](int a, int b) { return obs_edges[a] < obs_edges[b]; });

  const double model_max = model_edges[mo[2]];
  const double obs_max = obs_edges[oo[2]];
  if (model_max <= 0 || obs_max <= 0) return std::nullopt;

  double worst = 0.0;
  for (int k = 0; k < 3; ++k) {
    const double mr = model_edges[mo[k]] / model_max;
    const double orat = obs_edges[oo[k]] / obs_max;
    worst = std::max(worst, std::abs(mr - orat));
  }
  if (worst > tolerance) return std::nullopt;

  SubsetMatch m;
  m.face_id = face_id;
  m.score = worst;
  // Vertex opposite the k-th sorted edge of the model corresponds to the
  // vertex opposite the k-th sorted edge of the observation.
  for (int k = 0; k < 3; ++k) m.order[mo[k]] = oo[k];
  return m;
}

}  // namespace

FaceMatch identify_face(const std::vector<FeatureObservation>& features,
                        const MarkerSet& markers, double ratio_tolerance) {
  const int n = static_cast<int>(features.size());
  if (n < 3) throw std::runtime_error("identify_face: fewer than 3 features");

  bool saw_ambiguous_subset = false;
  double best_score = std::numeric_limits<double>::infinity();
  FaceMatch best;

  std::array<int, 3> idx;
  for (idx[0] = 0; idx[0] < n; ++idx[0])
    for (idx[1] = idx[0] + 1; idx[1] < n; ++idx[1])
      for (idx[2] = idx[1] + 1; idx[2] < n; ++idx[2]) {
        const std::array<Vec2, 3> obs{features[idx[0]].rectified,
                                      features[idx[1]].rectified,
                                      features[idx[2]].rectified};
        std::vector<SubsetMatch> face_hits;
        for (int face_id = 0; face_id < 4; ++face_id) {
          const auto fm = markers.face(face_id);
          if (fm.size() != 3) continue;
          if (auto m = match_subset_to_face(obs, fm, face_id, ratio_tolerance))
            face_hits.push_back(*m);
        }
        if (face_hits.empty()) continue;
        if (face_hits.size() > 1) {
          // One observed triple explained by several faces: unusable.
          saw_ambiguous_subset = true;
          continue;
        }
        const SubsetMatch& m = face_hits.front();
        if (m.score < best_score) {
          best_score = m.score;
          const auto fm = markers.face(m.face_id);
          best.face_id = m.face_id;
          best.score = m.score;
          for (int corner = 0; corner < 3; ++corner) {
            const int fi = idx[m.order[corner]];
            best.feature_indices[corner] = fi;
            best.correspondences[corner] =
                Correspondence{fm[corner].position_body, features[fi].rectified, -1};
          }
        }
      }

  if (best.face_id < 0) {
    if (saw_ambiguous_subset)
      throw std::runtime_error("identify_face: ambiguous face signature");
    throw std::runtime_error("identify_face: no face matches the feature pattern");
  }
  return best;
}

// ---------------------------------------------------------------------------
// Vision EKF

VisionState vision_init(const PoseCandidate& pose, const VisionFilterConfig& cfg,
                        double t, double pattern_extent_m) {
  VisionState vs;
  vs.quat = rot_to_quat(pose.rotation);
  vs.position = pose.translation;
  vs.velocity.setZero();
  vs.covariance = cfg.initial_var.asDiagonal();
  if (pattern_extent_m > 0.0) {
    // First-order P3P error propagation, with margin so honest innovations
    // stay inside the feature gate right after the seed.
    const double d = std::max(pose.translation.z(), pattern_extent_m);
    const double lateral = 3.0 * cfg.feature_sigma_rectified * d;
    const double depth = 3.0 * cfg.feature_sigma_rectified * d * d / pattern_extent_m;
    const double half_angle = 1.5 * cfg.feature_sigma_rectified * d / pattern_extent_m;
    for (int k = 0; k < 4; ++k)
      vs.covariance(k, k) = std::max(vs.covariance(k, k), half_angle * half_angle);
    const Vec3 axis_var(lateral * lateral, lateral * lateral, depth * depth);
    for (int k = 0; k < 3; ++k)
      vs.covariance(4 + k, 4 + k) = std::max(vs.covariance(4 + k, 4 + k), axis_var(k));
  }
  vs.time_s = t;
  vs.converged = false;
  return vs;
}

namespace {

void refresh_convergence(VisionState& vs, const VisionFilterConfig& cfg) {
  const Mat3 pp = vs.covariance.block<3, 3>(4, 4);
  const double max_var = pp.eigenvalues().real().maxCoeff();
  // Release with a margin so the flag does not chatter at the threshold.
  const double limit =
      (vs.converged ? 1.3 : 1.0) * cfg.convergence_pos_3sigma_m;
  vs.converged = 3.0 * std::sqrt(std::max(max_var, 0.0)) < limit;
}

}  // namespace

namespace {

// 4x4 matrix of left quaternion multiplication a (x) b, scalar-last layout.
Eigen::Matrix4d quat_left_matrix(const Vec4& a) {
  Eigen::Matrix4d l;
  const Vec3 v = a.head<3>();
  l.topLeftCorner<3, 3>() = a(3) * Mat3::Identity() + skew3(v);
  l.topRightCorner<3, 1>() = v;
  l.bottomLeftCorner<1, 3>() = -v.transpose();
  l(3, 3) = a(3);
  return l;
}

}  // namespace

void vision_predict(VisionState& vs, double dt, const VisionFilterConfig& cfg,
                    const Vec3& omega_camera) {
  if (dt <= 0.0) return;
  // The camera frame rotates by exp([omega dt]x) over the step; scene
  // coordinates transform with the transpose.  All operators are linear in
  // the state, so F is exact.
  const Vec3 theta = omega_camera * dt;
  const double ang = theta.norm();
  Mat3 drt = Mat3::Identity();
  Eigen::Matrix4d lq = Eigen::Matrix4d::Identity();
  if (ang > 0.0) {
    const Vec3 axis = theta / ang;
    drt = Eigen::AngleAxisd(-ang, axis).toRotationMatrix();
    Vec4 dq_inv;
    dq_inv.head<3>() = std::sin(-ang / 2.0) * axis;
    dq_inv(3) = std::cos(ang / 2.0);
    lq = quat_left_matrix(dq_inv);
  }
  vs.quat = lq * vs.quat;
  vs.position = drt * (vs.position + vs.velocity * dt);
  vs.velocity = drt * vs.velocity;
  Mat10 f = Mat10::Identity();
  f.topLeftCorner<4, 4>() = lq;
  f.block<3, 3>(4, 4) = drt;
  f.block<3, 3>(4, 7) = dt * drt;
  f.block<3, 3>(7, 7) = drt;
  Vec10 q;
  q << cfg.quat_process_var, cfg.quat_process_var, cfg.quat_process_var,
      cfg.quat_process_var, cfg.position_process_var, cfg.position_process_var,
      cfg.position_process_var, cfg.velocity_process_var, cfg.velocity_process_var,
      cfg.velocity_process_var;
  vs.covariance = f * vs.covariance * f.transpose();
  vs.covariance += (dt * q).asDiagonal().toDenseMatrix();
  vs.covariance = ((vs.covariance + vs.covariance.transpose()) / 2.0).eval();
  vs.time_s += dt;
  refresh_convergence(vs, cfg);  // coasting loosens the fix
}

std::optional<Vec2> vision_measurement(const VisionState& vs, const Vec3& point_body,
                                       Eigen::Matrix<double, 2, 10>* jacobian) {
  const Mat3 r = quat_to_rot(vs.quat);
  const Vec3 p = r * point_body + vs.position;
  if (p.z() < 1e-9) return std::nullopt;

  const Vec2 uv(p.x() / p.z(), p.y() / p.z());
  if (jacobian) {
    Eigen::Matrix<double, 2, 3> dproj;
    dproj << 1 / p.z(), 0, -p.x() / (p.z() * p.z()),
             0, 1 / p.z(), -p.y() / (p.z() * p.z());
    jacobian->setZero();
    for (int k = 0; k < 4; ++k)
      jacobian->col(k) = dproj * (quat_to_rot_deriv(vs.quat, k) * point_body);
    jacobian->block<2, 3>(0, 4) = dproj;
  }
  return uv;
}

VisionUpdateStats vision_ekf_update(VisionState& vs,
                                    const std::vector<Correspondence>& correspondences,
                                    const VisionFilterConfig& cfg) {
  VisionUpdateStats stats;
  const double r_var = cfg.feature_sigma_rectified * cfg.feature_sigma_rectified;

  for (const auto& corr : correspondences) {
    Eigen::Matrix<double, 2, 10> h;
    const auto predicted = vision_measurement(vs, corr.point_body, &h);
    if (!predicted) {
      ++stats.behind;
      continue;
    }
    const Vec2 y = corr.rectified - *predicted;
    const Mat2 s = h * vs.covariance * h.transpose() + r_var * Mat2::Identity();
    const double d2 = y.dot(s.ldlt().solve(y));
    if (d2 > cfg.feature_gate_sq) {
      ++stats.gated;
      continue;
    }

    const Eigen::Matrix<double, 10, 2> k = vs.covariance * h.transpose() * s.inverse();
    Vec10 state;
    state << vs.quat, vs.position, vs.velocity;
    state += k * y;
    vs.quat = state.head<4>();
    vs.position = state.segment<3>(4);
    vs.velocity = state.tail<3>();

    const Mat10 ikh = Mat10::Identity() - k * h;
    vs.covariance = ikh * vs.covariance * ikh.transpose() +
                    k * (r_var * Mat2::Identity()) * k.transpose();
    vs.covariance = ((vs.covariance + vs.covariance.transpose()) / 2.0).eval();

    const double qn = vs.quat.norm();
    if (qn < 1e-9) throw std::runtime_error("vision_ekf_update: quaternion collapsed");
    vs.quat /= qn;
    ++stats.used;
  }

  refresh_convergence(vs, cfg);
  return stats;
}

std::vector<Correspondence> associate_features(
    const VisionState& vs, const MarkerSet& markers,
    const std::vector<FeatureObservation>& features) {
  struct Prediction {
    Vec2 uv;
    const Marker* marker;
  };
  const Mat3 r = vs.rotation();
  std::vector<Prediction> preds;
  for (const auto& m : markers.markers) {
    const Vec3 p_c = r * m.position_body + vs.position;
    if (p_c.z() < 1e-6) continue;
    const Vec3 n_c = r * markers.face_normal_body(m.face_id);
    if (n_c.dot(-p_c.normalized()) < 0.17) continue;  // away-facing or grazing
    const auto uv = vision_measurement(vs, m.position_body, nullptr);
    if (uv) preds.push_back({*uv, &m});
  }
  if (preds.size() < 3 || features.size() < 3) return {};

  // Gate radius: well inside the predicted pattern so neighbours cannot grab
  // each other's feature, but wide enough to survive a coasting gap.
  double min_sep = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < preds.size(); ++i)
    for (size_t j = i + 1; j < preds.size(); ++j)
      min_sep = std::min(min_sep, (preds[i].uv - preds[j].uv).norm());
  const double radius = std::clamp(0.4 * min_sep, 0.005, 0.05);

  struct Pair {
    double dist;
    size_t feature;
    size_t pred;
  };
  std::vector<Pair> pairs;
  for (size_t fi = 0; fi < features.size(); ++fi)
    for (size_t pi = 0; pi < preds.size(); ++pi) {
      const double d = (features[fi].rectified - preds[pi].uv).norm();
      if (d < radius) pairs.push_back({d, fi, pi});
    }
  std::sort(pairs.begin(), pairs.end(),
            [](const Pair& a, const Pair& b) { return a.dist < b.dist; });

  std::vector<bool> f_used(features.size(), false), p_used(preds.size(), false);
  std::vector<Correspondence> corrs;
  for (const auto& pr : pairs) {
    if (f_used[pr.feature] || p_used[pr.pred]) continue;
    f_used[pr.feature] = true;
    p_used[pr.pred] = true;
    corrs.push_back(Correspondence{preds[pr.pred].marker->position_body,
                                   features[pr.feature].rectified, -1});
  }
  if (corrs.size() < 3) return {};
  return corrs;
}

RelativePlanarPose planar_pose_output(const VisionState& vs, const CameraMount& mount,
                                      const Vec3& floor_var) {
  const Mat3 r_bc = mount.rotation_body_camera();
  const Vec3 t_bc(mount.position_body.x(), mount.position_body.y(), 0.0);

  const Vec4 q = vs.quat.normalized();
  const Mat3 r_bt = r_bc * quat_to_rot(q);
  const Vec3 t_bt = r_bc * vs.position + t_bc;

  RelativePlanarPose out;
  out.position = t_bt.head<2>();
  out.heading = std::atan2(r_bt(1, 0), r_bt(0, 0));
  out.time_s = vs.time_s;

  // Jacobian of (x, y, psi) w.r.t. (quat, position).
  Eigen::Matrix<double, 3, 7> j = Eigen::Matrix<double, 3, 7>::Zero();
  j.block<2, 3>(0, 4) = r_bc.topRows<2>();
  const double a = r_bt(1, 0), b = r_bt(0, 0);
  const double denom = a * a + b * b;
  for (int k = 0; k < 4; ++k) {
    const Mat3 dr = r_bc * quat_to_rot_deriv(q, k);
    j(2, k) = (b * dr(1, 0) - a * dr(0, 0)) / std::max(denom, 1e-12);
  }
  const Mat3 projected =
      j * vs.covariance.topLeftCorner<7, 7>() * j.transpose();

  out.covariance = projected;
  for (int i = 0; i < 3; ++i)
    out.covariance(i, i) = std::max(projected(i, i), floor_var(i));
  return out;
}

// ---------------------------------------------------------------------------
// Pipeline

VisionPipeline::VisionPipeline(MarkerSet markers, CameraMount mount,
                               VisionFilterConfig cfg, Vec3 floor_var)
    : markers_(std::move(markers)),
      mount_(std::move(mount)),
      cfg_(cfg),
      floor_var_(std::move(floor_var)) {
  markers_.validate();
}

std::optional<RelativePlanarPose> VisionPipeline::process(
    const std::vector<FeatureObservation>& features, double t,
    const std::optional<PoseCandidate>& prior, double gyro_rate_radps) {
  if (initialized_) {
    // Track: transport the state by the gyro, associate features to the
    // predicted marker projections, and update.  The association stays valid
    // under the strong perspective of close oblique views, where the
    // bootstrap signature does not.
    const Vec3 omega_cam = mount_.rotation_body_camera().transpose() *
                           Vec3(0.0, 0.0, gyro_rate_radps);
    vision_predict(state_, t - state_.time_s, cfg_, omega_cam);

    const auto corrs = associate_features(state_, markers_, features);
    if (!corrs.empty()) {
      const auto stats = vision_ekf_update(state_, corrs, cfg_);
      if (stats.used > 0) {
        frames_without_fix_ = 0;
        if (!state_.converged) return std::nullopt;
        return planar_pose_output(state_, mount_, floor_var_);
      }
    }
    // Persistent disagreement (e.g. a divergent track grabbing the wrong
    // features) poisons the filter state; drop it and re-bootstrap later.
    ++frames_without_fix_;
    if (frames_without_fix_ > 10) initialized_ = false;
    return std::nullopt;
  }

  // Bootstrap: identify the face from the distance-ratio signature and seed
  // the filter from P3P.  Pose solutions are disambiguated with the prior
  // (predicted from the navigation estimate); leftover features from a
  // second visible face are not used as a fourth point because their
  // identity is not established.
  FaceMatch match;
  try {
    match = identify_face(features, markers_);
  } catch (const std::runtime_error&) {
    ++frames_without_fix_;
    return std::nullopt;
  }
  try {
    const auto cands = p3p_solve(match.correspondences);
    const PoseCandidate picked = disambiguate(cands, prior, std::nullopt);
    double extent = 0.0;
    for (int i = 0; i < 3; ++i)
      for (int j = i + 1; j < 3; ++j)
        extent = std::max(extent, (match.correspondences[i].point_body -
                                   match.correspondences[j].point_body)
                                      .norm());
    state_ = vision_init(picked, cfg_, t, extent);
    initialized_ = true;
    frames_without_fix_ = 0;
  } catch (const std::exception&) {
    ++frames_without_fix_;
  }
  return std::nullopt;  // first fix seeds the filter; report once converged
}

}  // namespace proxsim
