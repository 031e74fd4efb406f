#pragma once

#include <functional>
#include <string>
#include <vector>

#include "fort/gmm.hpp"
#include "fort/special.hpp"

namespace fort {

struct TestResult {
  std::string kind;  // "J" or "Wald"
  double statistic = 0.0;
  int df = 0;
  double p_value = 1.0;
  long T_eff = 0;
  std::vector<std::string> warnings;
};

std::string test_result_to_json(const TestResult& result);

// Overidentifying-restrictions test: T_eff * g' S^-1 g at the two-step
// solution, chi-square with q - p degrees of freedom under rationality.
// Requires strict overidentification (q > p).
TestResult j_test(const GmmFit& fit);

// Differentiable restriction R(theta) = 0 with analytic Jacobian.
struct Restriction {
  std::string name;
  long l = 0;
  std::function<Vector(const Vector&)> value;
  std::function<Matrix(const Vector&)> jacobian;
};

// H0: theta2 = 0 (level does not move with the state / no seasonal swing).
Restriction zero_slope_restriction();
// H0: theta1 = theta2 (no structural break).
Restriction no_break_restriction();
Restriction restriction_by_name(const std::string& name);

// Wald test of R(theta0) = 0 using the p x p covariance of theta_hat
// (Sigma / T_eff) between the restriction Jacobians.
TestResult wald_test(const GmmFit& fit, const Restriction& restriction);

struct LevelBand {
  std::vector<double> z_grid;
  std::vector<double> level_hat;
  std::vector<double> lower;
  std::vector<double> upper;
  double confidence = 0.0;
};

// Pointwise band for the level curve z -> m(z, theta_hat): a normal
// interval on the linear predictor eta(z, theta) with variance
// c(z)' Sigma_hat c(z), mapped through the strictly monotone link, which
// transfers coverage exactly.
LevelBand level_confidence_band(const GmmFit& fit, const SpecModel& model,
                                const std::vector<double>& z_grid,
                                double confidence);

}  // namespace fort
