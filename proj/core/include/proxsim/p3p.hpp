/// Minimal perspective-3-point pose solver (Kneip-style intermediate-frame
/// parametrization, quartic in cos(theta)) with Gauss-Newton polish and
/// candidate disambiguation.
#pragma once

#include <optional>
#include <vector>

#include "proxsim/camera.hpp"

namespace proxsim {

/// One camera-from-target pose hypothesis: X_cam = rotation * X_target + translation.
struct PoseCandidate {
  Mat3 rotation{Mat3::Identity()};
  Vec3 translation{Vec3::Zero()};
  double residual{0.0};   // RMS rectified reprojection residual on the 3 points
  double min_depth{0.0};  // smallest predicted Z among the 3 points
};

/// Solve from exactly three correspondences.  Throws std::invalid_argument on
/// collinear world points or parallel bearings.  Returns up to 4 candidates.
std::vector<PoseCandidate> p3p_solve(const std::array<Correspondence, 3>& c);

/// Pick one candidate: by reprojection of a fourth point when available, else
/// by closeness to a prior pose, else by minimal residual.  Candidates whose
/// markers land behind the camera are discarded first; throws
/// std::runtime_error when none survive.
PoseCandidate disambiguate(const std::vector<PoseCandidate>& candidates,
                           const std::optional<PoseCandidate>& prior,
                           const std::optional<Correspondence>& fourth_point);

/// Rectified projection of a target-frame point under a candidate pose;
/// nullopt when the point is at or behind the camera plane.
std::optional<Vec2> project_candidate(const PoseCandidate& pose, const Vec3& point_body);

/// Real roots of a*x^4 + b*x^3 + c*x^2 + d*x + e (companion-matrix
/// eigenvalues plus Newton polish).  Exposed for testing.
std::vector<double> solve_quartic(double a, double b, double c, double d, double e);

}  // namespace proxsim
