#include "fort/functionals.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "fort/errors.hpp"
#include "fort/special.hpp"

namespace fort {

namespace {
void check_tau(double tau, const char* who) {
  if (!(tau > 0.0 && tau < 1.0)) {
    throw std::invalid_argument(std::string(who) +
                                ": level must lie strictly in (0,1)");
  }
}
}  // namespace

Family parse_family(const std::string& name) {
  if (name == "quantile") return Family::Quantile;
  if (name == "expectile") return Family::Expectile;
  throw std::invalid_argument("unknown family '" + name +
                              "' (expected quantile or expectile)");
}

const char* family_name(Family family) {
  return family == Family::Quantile ? "quantile" : "expectile";
}

double identification(Family family, double x, double y, double tau) {
  check_tau(tau, "identification");
  if (family == Family::Quantile) {
    return (y <= x ? 1.0 : 0.0) - tau;
  }
  return std::fabs((x >= y ? 1.0 : 0.0) - tau) * (x - y);
}

double identification_level_derivative(Family family, double x, double y,
                                       double tau) {
  check_tau(tau, "identification_level_derivative");
  if (family == Family::Quantile) return -1.0;
  return -std::fabs(x - y);
}

double normal_quantile(double tau) { return norm_quantile(tau); }

namespace {
// Defining function of the standard normal expectile and its derivative.
// f is strictly increasing: f'(x) = (1-tau) Phi(x) + tau (1-Phi(x)) > 0.
double expectile_f(double x, double tau) {
  double cdf = norm_cdf(x);
  double pdf = norm_pdf(x);
  return (1.0 - tau) * (x * cdf + pdf) - tau * (pdf - x * (1.0 - cdf));
}
double expectile_fprime(double x, double tau) {
  double cdf = norm_cdf(x);
  return (1.0 - tau) * cdf + tau * (1.0 - cdf);
}
}  // namespace

double normal_expectile(double tau) {
  check_tau(tau, "normal_expectile");
  double lo = -10.0, hi = 10.0;
  double x = 0.0;
  // Newton with bisection fallback; f is monotone so the bracket only
  // shrinks. 1e-12 residual is reached in a handful of iterations.
  for (int it = 0; it < 200; ++it) {
    double f = expectile_f(x, tau);
    if (std::fabs(f) < 1e-14) return x;
    if (f > 0.0) {
      hi = x;
    } else {
      lo = x;
    }
    double step = f / expectile_fprime(x, tau);
    double next = x - step;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    x = next;
  }
  if (std::fabs(expectile_f(x, tau)) < 1e-12) return x;
  throw NumericalError("normal_expectile: root finder did not converge");
}

double sample_quantile(const std::vector<double>& values, double tau) {
  if (values.empty()) {
    throw std::invalid_argument("sample_quantile: empty sample");
  }
  check_tau(tau, "sample_quantile");
  std::vector<double> sorted(values);
  std::sort(sorted.begin(), sorted.end());
  const auto n = static_cast<double>(sorted.size());
  auto idx = static_cast<long>(std::ceil(n * tau)) - 1;
  idx = std::clamp<long>(idx, 0, static_cast<long>(sorted.size()) - 1);
  return sorted[static_cast<size_t>(idx)];
}

double sample_expectile(const std::vector<double>& values, double tau) {
  if (values.empty()) {
    throw std::invalid_argument("sample_expectile: empty sample");
  }
  check_tau(tau, "sample_expectile");
  std::vector<double> s(values);
  std::sort(s.begin(), s.end());
  const size_t n = s.size();
  // h(e) = tau * sum_{y_i > e}(y_i - e) - (1-tau) * sum_{y_i <= e}(e - y_i)
  // is continuous, strictly decreasing, piecewise linear with knots at the
  // order statistics. Walk the knots, then solve the linear piece exactly.
  double total = std::accumulate(s.begin(), s.end(), 0.0);
  double below = 0.0;  // sum of s[0..k-1]
  for (size_t k = 0; k <= n; ++k) {
    // On [s[k-1], s[k]) there are k points at or below e.
    double lo = (k == 0) ? -std::numeric_limits<double>::infinity() : s[k - 1];
    double hi = (k == n) ? std::numeric_limits<double>::infinity() : s[k];
    double above = total - below;
    // h(e) = tau*(above - (n-k)e) - (1-tau)*(k e - below), linear in e.
    double slope = -(tau * static_cast<double>(n - k) +
                     (1.0 - tau) * static_cast<double>(k));
    double intercept = tau * above + (1.0 - tau) * below;
    double root = intercept / -slope;
    if (root >= lo && root <= hi) return root;
    if (k < n) below += s[k];
  }
  throw NumericalError("sample_expectile: no linear piece contained the root");
}

}  // namespace fort
