/// Numerical self-verification: Jacobians against central finite differences,
/// P3P round trips, gate calibration, and covariance SPD audits.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace proxsim {

struct SelfCheckItem {
  std::string name;
  bool pass{false};
  std::string detail;
};

struct SelfCheckReport {
  std::vector<SelfCheckItem> items;
  bool all_pass() const;
};

SelfCheckReport self_check(std::uint64_t seed = 20240601);

/// Synthesize random camera poses, project marker triples exactly, solve, and
/// disambiguate with a fourth projected point.
struct P3pRoundTripStats {
  int trials{0};
  int failures{0};  // solver threw, or no candidate survived disambiguation
  double max_rotation_err_rad{0.0};
  double max_translation_err_m{0.0};
  double max_orthonormality{0.0};  // max |R^T R - I| over all returned candidates
};

P3pRoundTripStats p3p_round_trip(int trials, std::uint64_t seed);

}  // namespace proxsim
