#pragma once

#include <vector>

#include "fort/functionals.hpp"

namespace fort {

// Gaussian predictive density N(mu, sigma^2) attached to a period.
struct DensityForecast {
  double mu = 0.0;
  double sigma = 1.0;
  long t = 0;
};

enum class CombineDistance { Squared, Absolute };

// n point forecasts of the same target, each reporting functional family
// `family` at level levels[i], with weight w(p_values[i]) in the
// combination objective. The weight function is w(p) = p by default.
struct CombinationProblem {
  std::vector<double> forecasts;
  std::vector<double> levels;
  std::vector<double> p_values;
  Family family = Family::Quantile;
  CombineDistance distance = CombineDistance::Squared;
  // Monotone weight map applied to p_values; identity when empty.
  double (*weight_fn)(double) = nullptr;
};

// mu = x - q_m(N(0,1)) * sigma where q_m is the normal quantile (quantile
// family) or normal expectile (expectile family) at level m.
DensityForecast gaussian_closed_form(double x, double m, double sigma,
                                     Family family = Family::Quantile,
                                     long t = 0);

// Picks mu for the Gaussian class with fixed sigma by minimizing
//   sum_i w(p_i) * dist(mu + q_{m_i} * sigma - x_i):
// the weighted mean of the adjusted forecasts a_i = x_i - q_{m_i} sigma for
// squared distance, their lower weighted median for absolute distance.
DensityForecast solve_combination(const CombinationProblem& prob, double sigma,
                                  long t = 0);

// Closed-form CRPS of N(mu, sigma^2) against realization y.
double crps_gaussian(double mu, double sigma, double y);

struct ForecastScores {
  double mse = 0.0;
  double mfll = 0.0;
};

// Mean squared error and mean flexible lin-lin loss
// (m_t - 1{e_t < 0}) * e_t with e_t = x_t - y_t.
ForecastScores score_forecasts(const std::vector<double>& x,
                               const std::vector<double>& y,
                               const std::vector<double>& levels);

// Table-style normalization: each score divided by the larger of the pair,
// so the worse forecast reads 1.
struct ScoreComparison {
  ForecastScores a_raw, b_raw;
  ForecastScores a_norm, b_norm;
};
ScoreComparison compare_scores(const ForecastScores& a,
                               const ForecastScores& b);

// Per-period sigma for the Gaussian class: |y_{t-1} - y_{t-2}|, floored at
// 1e-6 times the sample standard deviation of y so flat stretches cannot
// produce a degenerate density. Defined for t >= 2 (first two entries are
// filled with the floor).
std::vector<double> sigma_recipe_diff2(const std::vector<double>& y);

}  // namespace fort
