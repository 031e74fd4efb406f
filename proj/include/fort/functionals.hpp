#pragma once

#include <string>
#include <vector>

namespace fort {

// Functional family whose level is being modeled. Everything downstream
// (moments, Jacobians, combination) dispatches on this.
enum class Family { Quantile, Expectile };

Family parse_family(const std::string& name);
const char* family_name(Family family);

// Identification function V(x, y) at level tau.
//   Quantile:  1{y <= x} - tau          (ties count as "below")
//   Expectile: |1{x >= y} - tau| (x - y)
// Its conditional expectation is zero exactly when x is the tau-functional
// of the conditional law of y.
double identification(Family family, double x, double y, double tau);

// Exact derivative of identification() in tau:
//   Quantile:  -1
//   Expectile: -|x - y|
double identification_level_derivative(Family family, double x, double y,
                                       double tau);

// Inverse standard normal CDF at tau (delegates to norm_quantile).
double normal_quantile(double tau);

// tau-expectile of the standard normal: unique root of
//   (1-tau)(x Phi(x) + phi(x)) - tau (phi(x) - x (1 - Phi(x))) = 0.
// Residual below 1e-12; bracketed Newton on [-10, 10].
double normal_expectile(double tau);

// Empirical quantile, left-continuous inverse of the ECDF.
double sample_quantile(const std::vector<double>& values, double tau);

// Empirical tau-expectile: root of the sample expectile equation
//   tau * sum_{y_i > e}(y_i - e) = (1-tau) * sum_{y_i <= e}(e - y_i),
// solved exactly on the sorted sample via prefix sums.
double sample_expectile(const std::vector<double>& values, double tau);

}  // namespace fort
