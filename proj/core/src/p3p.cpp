#include "proxsim/p3p.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace proxsim {

std::vector<double> solve_quartic(double a, double b, double c, double d, double e) {
  const double scale = std::max({std::abs(a), std::abs(b), std::abs(c), std::abs(d),
                                 std::abs(e)});
  if (scale <= 0.0 || std::abs(a) < 1e-14 * scale)
    throw std::invalid_argument("solve_quartic: degenerate leading coefficient");
  const double c3 = b / a, c2 = c / a, c1 = d / a, c0 = e / a;

  Mat4 companion = Mat4::Zero();
  companion(1, 0) = 1.0;
  companion(2, 1) = 1.0;
  companion(3, 2) = 1.0;
  companion(0, 3) = -c0;
  companion(1, 3) = -c1;
  companion(2, 3) = -c2;
  companion(3, 3) = -c3;

  Eigen::EigenSolver<Mat4> eig(companion);
  std::vector<double> roots;
  for (int i = 0; i < 4; ++i) {
    const auto z = eig.eigenvalues()(i);
    if (std::abs(z.imag()) > 1e-6 * (1.0 + std::abs(z.real()))) continue;
    double x = z.real();
    // Newton polish; bail on flat derivative (multiple roots are fine as-is).
    for (int it = 0; it < 3; ++it) {
      const double f = (((x + c3) * x + c2) * x + c1) * x + c0;
      const double fp = ((4 * x + 3 * c3) * x + 2 * c2) * x + c1;
      if (std::abs(fp) < 1e-12) break;
      x -= f / fp;
    }
    roots.push_back(x);
  }
  return roots;
}

std::optional<Vec2> project_candidate(const PoseCandidate& pose, const Vec3& point_body) {
  const Vec3 p = pose.rotation * point_body + pose.translation;
  if (p.z() < 1e-9) return std::nullopt;
  return Vec2(p.x() / p.z(), p.y() / p.z());
}

namespace {

// RMS rectified residual over the three correspondences; infinity when a
// point projects behind the camera.
double candidate_residual(const PoseCandidate& pose,
                          const std::array<Correspondence, 3>& c) {
  double ss = 0.0;
  for (const auto& corr : c) {
    const auto uv = project_candidate(pose, corr.point_body);
    if (!uv) return std::numeric_limits<double>::infinity();
    ss += (*uv - corr.rectified).squaredNorm();
  }
  return std::sqrt(ss / 3.0);
}

double candidate_min_depth(const PoseCandidate& pose,
                           const std::array<Correspondence, 3>& c) {
  double z = std::numeric_limits<double>::infinity();
  for (const auto& corr : c)
    z = std::min(z, (pose.rotation * corr.point_body + pose.translation).z());
  return z;
}

// A few Gauss-Newton iterations on the 6 reprojection residuals to polish a
// candidate (left-multiplied rotation increment, additive translation).
void refine_candidate(PoseCandidate& pose, const std::array<Correspondence, 3>& c) {
  const double before = candidate_residual(pose, c);
  if (!std::isfinite(before)) return;
  PoseCandidate work = pose;
  for (int it = 0; it < 3; ++it) {
    Eigen::Matrix<double, 6, 6> j;
    Eigen::Matrix<double, 6, 1> r;
    bool ok = true;
    for (int i = 0; i < 3; ++i) {
      const Vec3 p = work.rotation * c[i].point_body + work.translation;
      if (p.z() < 1e-9) {
        ok = false;
        break;
      }
      Eigen::Matrix<double, 2, 3> dproj;
      dproj << 1 / p.z(), 0, -p.x() / (p.z() * p.z()),
               0, 1 / p.z(), -p.y() / (p.z() * p.z());
      j.block<2, 3>(2 * i, 0) = -dproj * skew3(work.rotation * c[i].point_body);
      j.block<2, 3>(2 * i, 3) = dproj;
      r.segment<2>(2 * i) = c[i].rectified - Vec2(p.x() / p.z(), p.y() / p.z());
    }
    if (!ok) break;
    const Eigen::Matrix<double, 6, 1> delta = j.fullPivLu().solve(r);
    if (!delta.allFinite()) break;
    const Vec3 w = delta.head<3>();
    const double angle = w.norm();
    if (angle > 1e-15)
      work.rotation = Eigen::AngleAxisd(angle, w / angle).toRotationMatrix() * work.rotation;
    work.translation += delta.tail<3>();
    if (delta.norm() < 1e-14) break;
  }
  if (candidate_residual(work, c) <= before) pose = work;
}

}  // namespace

std::vector<PoseCandidate> p3p_solve(const std::array<Correspondence, 3>& corrs) {
  Vec3 p1 = corrs[0].point_body;
  Vec3 p2 = corrs[1].point_body;
  Vec3 p3 = corrs[2].point_body;

  const double span = std::max((p2 - p1).norm(), (p3 - p1).norm());
  if ((p2 - p1).cross(p3 - p1).norm() <= 1e-12 * std::max(span * span, 1e-12))
    throw std::invalid_argument("p3p_solve: collinear world points");

  auto bearing = [](const Vec2& uv) {
    return Vec3(uv.x(), uv.y(), 1.0).normalized();
  };
  Vec3 f1 = bearing(corrs[0].rectified);
  Vec3 f2 = bearing(corrs[1].rectified);
  Vec3 f3 = bearing(corrs[2].rectified);

  // Intermediate camera frame with e1 = f1, e3 orthogonal to the f1/f2 plane.
  auto make_t = [](const Vec3& fa, const Vec3& fb) {
    Mat3 t;
    const Vec3 e1 = fa;
    Vec3 e3 = fa.cross(fb);
    const double n = e3.norm();
    if (n < 1e-12) throw std::invalid_argument("p3p_solve: parallel bearing vectors");
    e3 /= n;
    const Vec3 e2 = e3.cross(e1);
    t.row(0) = e1;
    t.row(1) = e2;
    t.row(2) = e3;
    return t;
  };

  Mat3 t_mat = make_t(f1, f2);
  Vec3 f3_t = t_mat * f3;
  if (f3_t.z() > 0) {  // keep theta in [0, pi]
    std::swap(f1, f2);
    std::swap(p1, p2);
    t_mat = make_t(f1, f2);
    f3_t = t_mat * f3;
  }
  if (std::abs(f3_t.z()) < 1e-12)
    throw std::invalid_argument("p3p_solve: third bearing in the f1/f2 plane");

  // Intermediate world frame spanned by the world triangle.
  Mat3 n_mat;
  const Vec3 n1 = (p2 - p1).normalized();
  Vec3 n3 = n1.cross(p3 - p1);
  n3.normalize();
  const Vec3 n2 = n3.cross(n1);
  n_mat.row(0) = n1;
  n_mat.row(1) = n2;
  n_mat.row(2) = n3;

  const Vec3 p3_n = n_mat * (p3 - p1);
  const double d_12 = (p2 - p1).norm();
  const double f_1 = f3_t.x() / f3_t.z();
  const double f_2 = f3_t.y() / f3_t.z();
  const double p_1 = p3_n.x();
  const double p_2 = p3_n.y();

  const double cos_beta = f1.dot(f2);
  double b = 1.0 / (1.0 - cos_beta * cos_beta) - 1.0;
  b = (cos_beta < 0) ? -std::sqrt(b) : std::sqrt(b);

  const double f_1_pw2 = f_1 * f_1;
  const double f_2_pw2 = f_2 * f_2;
  const double p_1_pw2 = p_1 * p_1;
  const double p_1_pw3 = p_1_pw2 * p_1;
  const double p_1_pw4 = p_1_pw3 * p_1;
  const double p_2_pw2 = p_2 * p_2;
  const double p_2_pw3 = p_2_pw2 * p_2;
  const double p_2_pw4 = p_2_pw3 * p_2;
  const double d_12_pw2 = d_12 * d_12;
  const double b_pw2 = b * b;

  const double a4 = -f_2_pw2 * p_2_pw4 - p_2_pw4 * f_1_pw2 - p_2_pw4;
  const double a3 = 2 * p_2_pw3 * d_12 * b + 2 * f_2_pw2 * p_2_pw3 * d_12 * b -
                    2 * f_2 * p_2_pw3 * f_1 * d_12;
  const double a2 = -f_2_pw2 * p_2_pw2 * p_1_pw2 -
                    f_2_pw2 * p_2_pw2 * d_12_pw2 * b_pw2 -
                    f_2_pw2 * p_2_pw2 * d_12_pw2 + f_2_pw2 * p_2_pw4 +
                    p_2_pw4 * f_1_pw2 + 2 * p_1 * p_2_pw2 * d_12 +
                    2 * f_1 * f_2 * p_1 * p_2_pw2 * d_12 * b -
                    p_2_pw2 * p_1_pw2 * f_1_pw2 + 2 * p_1 * p_2_pw2 * f_2_pw2 * d_12 -
                    p_2_pw2 * d_12_pw2 * b_pw2 - 2 * p_1_pw2 * p_2_pw2;
  const double a1 = 2 * p_1_pw2 * p_2 * d_12 * b + 2 * f_2 * p_2_pw3 * f_1 * d_12 -
                    2 * f_2_pw2 * p_2_pw3 * d_12 * b - 2 * p_1 * p_2 * d_12_pw2 * b;
  const double a0 = -2 * f_2 * p_2_pw2 * f_1 * p_1 * d_12 * b +
                    f_2_pw2 * p_2_pw2 * d_12_pw2 + 2 * p_1_pw3 * d_12 -
                    p_1_pw2 * d_12_pw2 + f_2_pw2 * p_2_pw2 * p_1_pw2 - p_1_pw4 -
                    2 * f_2_pw2 * p_2_pw2 * p_1 * d_12 +
                    p_2_pw2 * f_1_pw2 * p_1_pw2 + f_2_pw2 * p_2_pw2 * d_12_pw2 * b_pw2;

  std::vector<PoseCandidate> out;
  for (double cos_theta : solve_quartic(a4, a3, a2, a1, a0)) {
    if (std::abs(cos_theta) > 1.0 + 1e-8) continue;
    cos_theta = std::clamp(cos_theta, -1.0, 1.0);

    const double denom = -f_1 * cos_theta * p_2 / f_2 + p_1 - d_12;
    if (std::abs(denom) < 1e-15) continue;
    const double cot_alpha = (-f_1 * p_1 / f_2 - cos_theta * p_2 + d_12 * b) / denom;

    const double sin_theta = std::sqrt(1.0 - cos_theta * cos_theta);
    const double sin_alpha = std::sqrt(1.0 / (cot_alpha * cot_alpha + 1.0));
    double cos_alpha = std::sqrt(1.0 - sin_alpha * sin_alpha);
    if (cot_alpha < 0) cos_alpha = -cos_alpha;

    Mat3 r_ta;
    r_ta << -cos_alpha, -sin_alpha * cos_theta, -sin_alpha * sin_theta,
            sin_alpha, -cos_alpha * cos_theta, -cos_alpha * sin_theta,
            0, -sin_theta, cos_theta;

    const Vec3 c_int(d_12 * cos_alpha * (sin_alpha * b + cos_alpha),
                     cos_theta * d_12 * sin_alpha * (sin_alpha * b + cos_alpha),
                     sin_theta * d_12 * sin_alpha * (sin_alpha * b + cos_alpha));

    PoseCandidate cand;
    cand.rotation = t_mat.transpose() * r_ta * n_mat;
    cand.translation = -(cand.rotation * (p1 + n_mat.transpose() * c_int));

    refine_candidate(cand, corrs);
    cand.residual = candidate_residual(cand, corrs);
    cand.min_depth = candidate_min_depth(cand, corrs);
    out.push_back(cand);
  }
  return out;
}

PoseCandidate disambiguate(const std::vector<PoseCandidate>& candidates,
                           const std::optional<PoseCandidate>& prior,
                           const std::optional<Correspondence>& fourth_point) {
  std::vector<PoseCandidate> viable;
  for (const auto& c : candidates)
    if (c.min_depth > 0) viable.push_back(c);
  if (viable.empty())
    throw std::runtime_error("disambiguate: no candidate with all markers in front");

  const PoseCandidate* best = nullptr;
  double best_score = std::numeric_limits<double>::infinity();

  if (fourth_point) {
    for (const auto& c : viable) {
      const auto uv = project_candidate(c, fourth_point->point_body);
      if (!uv) continue;
      const double score = (*uv - fourth_point->rectified).norm();
      if (score < best_score) {
        best_score = score;
        best = &c;
      }
    }
    if (best) return *best;
    // fourth point behind the camera in every hypothesis; fall through
  }

  if (prior) {
    for (const auto& c : viable) {
      const double score = rotation_angle_between(c.rotation, prior->rotation) +
                           (c.translation - prior->translation).norm();
      if (score < best_score) {
        best_score = score;
        best = &c;
      }
    }
    return *best;
  }

  for (const auto& c : viable) {
    if (c.residual < best_score) {
      best_score = c.residual;
      best = &c;
    }
  }
  if (!best) throw std::runtime_error("disambiguate: no finite-residual candidate");
  return *best;
}

}  // namespace proxsim
