#include "fort/combine.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "fort/special.hpp"

namespace fort {

namespace {

double family_shift(Family family, double m) {
  return family == Family::Quantile ? normal_quantile(m) : normal_expectile(m);
}

constexpr double kInvSqrtPi = 0.56418958354775628695;

}  // namespace

DensityForecast gaussian_closed_form(double x, double m, double sigma,
                                     Family family, long t) {
  if (!(m > 0.0 && m < 1.0)) {
    throw std::invalid_argument(
        "gaussian_closed_form: level must lie in (0,1)");
  }
  if (!(sigma > 0.0)) {
    throw std::invalid_argument("gaussian_closed_form: sigma must be > 0");
  }
  DensityForecast d;
  d.mu = x - family_shift(family, m) * sigma;
  d.sigma = sigma;
  d.t = t;
  return d;
}

DensityForecast solve_combination(const CombinationProblem& prob, double sigma,
                                  long t) {
  const size_t n = prob.forecasts.size();
  if (n == 0) {
    throw std::invalid_argument("solve_combination: no forecasts");
  }
  if (prob.levels.size() != n || prob.p_values.size() != n) {
    throw std::invalid_argument(
        "solve_combination: forecasts, levels and p_values must align");
  }
  if (!(sigma > 0.0)) {
    throw std::invalid_argument("solve_combination: sigma must be > 0");
  }

  std::vector<double> adjusted(n), weight(n);
  double total_weight = 0.0;
  for (size_t i = 0; i < n; ++i) {
    if (!(prob.levels[i] > 0.0 && prob.levels[i] < 1.0)) {
      throw std::invalid_argument(
          "solve_combination: levels must lie in (0,1)");
    }
    if (!(prob.p_values[i] >= 0.0 && prob.p_values[i] <= 1.0)) {
      throw std::invalid_argument(
          "solve_combination: p_values must lie in [0,1]");
    }
    adjusted[i] =
        prob.forecasts[i] - family_shift(prob.family, prob.levels[i]) * sigma;
    weight[i] = prob.weight_fn ? prob.weight_fn(prob.p_values[i])
                               : prob.p_values[i];
    if (!(weight[i] >= 0.0) || !std::isfinite(weight[i])) {
      throw std::invalid_argument(
          "solve_combination: weight function produced a negative or "
          "non-finite weight");
    }
    total_weight += weight[i];
  }
  if (total_weight <= 0.0) {
    throw std::invalid_argument("solve_combination: all weights are zero");
  }

  DensityForecast d;
  d.sigma = sigma;
  d.t = t;
  if (prob.distance == CombineDistance::Squared) {
    double acc = 0.0;
    for (size_t i = 0; i < n; ++i) acc += weight[i] * adjusted[i];
    d.mu = acc / total_weight;
  } else {
    // Lower weighted median: smallest a_(i) whose cumulative weight reaches
    // half of the total.
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), size_t{0});
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
      return adjusted[a] < adjusted[b];
    });
    double cum = 0.0;
    d.mu = adjusted[order.back()];
    for (size_t k = 0; k < n; ++k) {
      cum += weight[order[k]];
      if (cum >= 0.5 * total_weight) {
        d.mu = adjusted[order[k]];
        break;
      }
    }
  }
  return d;
}

double crps_gaussian(double mu, double sigma, double y) {
  if (!(sigma > 0.0)) {
    throw std::invalid_argument("crps_gaussian: sigma must be > 0");
  }
  double u = (y - mu) / sigma;
  return sigma *
         (u * (2.0 * norm_cdf(u) - 1.0) + 2.0 * norm_pdf(u) - kInvSqrtPi);
}

ForecastScores score_forecasts(const std::vector<double>& x,
                               const std::vector<double>& y,
                               const std::vector<double>& levels) {
  const size_t n = x.size();
  if (n == 0) throw std::invalid_argument("score_forecasts: empty series");
  if (y.size() != n || levels.size() != n) {
    throw std::invalid_argument(
        "score_forecasts: series lengths must match");
  }
  ForecastScores s;
  for (size_t i = 0; i < n; ++i) {
    if (!(levels[i] > 0.0 && levels[i] < 1.0)) {
      throw std::invalid_argument("score_forecasts: levels must lie in (0,1)");
    }
    double e = x[i] - y[i];
    s.mse += e * e;
    // Check loss at level m: over-predictions weigh 1-m, under-predictions m,
    // so the m-quantile of the outcome distribution is the minimizer.
    s.mfll += ((e > 0.0 ? 1.0 : 0.0) - levels[i]) * e;
  }
  s.mse /= static_cast<double>(n);
  s.mfll /= static_cast<double>(n);
  return s;
}

ScoreComparison compare_scores(const ForecastScores& a,
                               const ForecastScores& b) {
  ScoreComparison cmp;
  cmp.a_raw = a;
  cmp.b_raw = b;
  double mse_den = std::max(a.mse, b.mse);
  double mfll_den = std::max(a.mfll, b.mfll);
  cmp.a_norm.mse = mse_den > 0.0 ? a.mse / mse_den : 1.0;
  cmp.b_norm.mse = mse_den > 0.0 ? b.mse / mse_den : 1.0;
  cmp.a_norm.mfll = mfll_den > 0.0 ? a.mfll / mfll_den : 1.0;
  cmp.b_norm.mfll = mfll_den > 0.0 ? b.mfll / mfll_den : 1.0;
  return cmp;
}

std::vector<double> sigma_recipe_diff2(const std::vector<double>& y) {
  const size_t n = y.size();
  if (n < 3) {
    throw std::invalid_argument("sigma_recipe_diff2: needs at least 3 rows");
  }
  double mean = std::accumulate(y.begin(), y.end(), 0.0) /
                static_cast<double>(n);
  double ss = 0.0;
  for (double v : y) ss += (v - mean) * (v - mean);
  double sd = std::sqrt(ss / static_cast<double>(n - 1));
  double floor_val = 1e-6 * sd;
  if (floor_val <= 0.0) floor_val = 1e-6;

  std::vector<double> sigma(n, floor_val);
  for (size_t t = 2; t < n; ++t) {
    sigma[t] = std::max(std::fabs(y[t - 1] - y[t - 2]), floor_val);
  }
  return sigma;
}

}  // namespace fort
