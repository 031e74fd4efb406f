#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fort/dataset.hpp"
#include "fort/functionals.hpp"
#include "fort/gmm.hpp"
#include "fort/spec_models.hpp"

namespace fort {

struct ArGarchParams {
  double ar = 0.5;
  double omega = 0.1;
  double beta = 0.8;
  double alpha = 0.1;

  void validate() const;
  // Stationary variance of the GARCH recursion, omega / (1 - alpha - beta).
  double stationary_variance() const;
};

// AR(1)-GARCH(1,1) path: y_t = ar * y_{t-1} + sigma_t * eps_t with
// sigma_t^2 = omega + beta * sigma_{t-1}^2 + alpha * sigma_{t-1}^2 *
// eps_{t-1}^2 and iid standard normal eps.
struct SimPath {
  std::vector<double> y;
  std::vector<double> sigma;  // conditional sd at each t
  std::vector<double> eps;
  ArGarchParams params;
  uint64_t seed = 0;

  long T() const { return static_cast<long>(y.size()); }
};

// Simulates T periods after discarding burn_in; sigma_1^2 starts at the
// stationary value. Counter-based seeding makes the path a pure function
// of (seed).
SimPath simulate_ar_garch(long T, const ArGarchParams& params, uint64_t seed,
                          long burn_in = 500);

// Forecast series aligned with a path; entries before `first` are NaN
// placeholders (the forecast needs lags that do not exist yet).
struct ForecastSeries {
  std::vector<double> x;
  // For the rigid forecaster: the two-step-ahead conditional variance in
  // the decomposed form ar^2 s2 + (omega + (alpha+beta) s2), kept for
  // exact recomputation checks.
  std::vector<double> variance;
  long first = 0;
};

// One-step-ahead forecast from the full information set: the
// 1/(1+a)-expectile of N(ar * y_{t-1}, sigma_t^2).
ForecastSeries full_info_forecast(const SimPath& path, double a = 1.85);

// Information-rigid forecast: the same expectile level applied to the
// two-step-ahead conditional moments (mean ar^2 * y_{t-2}, variance
// ar^2 sigma_{t-1}^2 + omega + (alpha+beta) sigma_{t-1}^2), treating that
// conditional as Gaussian.
ForecastSeries rigid_info_forecast(const SimPath& path, double a = 1.85);

// Rows first..T-1 of the path as a ForecastDataset with state z_t =
// y_{t-1}. `first` must be >= 1 and >= forecast.first.
ForecastDataset forecast_dataset(const SimPath& path,
                                 const ForecastSeries& forecast, long first);

// Asymmetric-information scenario: y = z_f + z_u + eps, forecast x = z_f,
// so the forecast is the F(-z_u)-quantile of y given (x, z_u) with F the
// law of eps. The dataset's state column carries z_u; true_level holds the
// per-row quoted level for validation.
struct AsymInfoScenario {
  ForecastDataset data;
  std::vector<double> true_level;
};

AsymInfoScenario asymmetric_info_scenario(long T, uint64_t seed,
                                          double sd_f = 1.0, double sd_u = 1.0,
                                          double sd_eps = 1.0);

// Test-fixture DGP with a state-dependent quantile forecast: z iid N(0,1),
// y = b z + u with u iid N(0,1), x = b z + Phi^{-1}(m(z, theta0)) where
// m(z, theta0) = link(theta0_1 + z theta0_2). The forecast is the exact
// conditional m(z, theta0)-quantile of y.
struct StateQuantileFixture {
  ForecastDataset data;
  Vector theta0;
};

StateQuantileFixture simulate_state_quantile_forecast(
    long T, const Vector& theta0, uint64_t seed, double b = 0.5,
    Link link = Link::Logistic);

enum class ForecasterKind { FullInfo, Rigid };
enum class InstrumentTiming { NonLagged, Lagged };

const char* forecaster_name(ForecasterKind kind);
const char* timing_name(InstrumentTiming timing);
ForecasterKind parse_forecaster(const std::string& name);
InstrumentTiming parse_timing(const std::string& name);

// Instrument recipes of the size/power study: a constant, the forecast,
// the previous forecast error and its square, plus one further lag of each
// non-constant term; the lagged variant shifts every non-constant term one
// more period back.
InstrumentRecipe mc_recipe(InstrumentTiming timing);

struct McConfig {
  std::vector<long> T_grid = {50, 100, 250, 500, 1000, 2000};
  long replications = 500;
  ForecasterKind forecaster = ForecasterKind::FullInfo;
  std::vector<Family> families = {Family::Quantile, Family::Expectile};
  std::vector<InstrumentTiming> timings = {InstrumentTiming::NonLagged,
                                           InstrumentTiming::Lagged};
  double nominal = 0.05;
  double a = 1.85;
  uint64_t base_seed = 20200825;
  long burn_in = 500;
  int workers = 1;
  ArGarchParams params;
  OptimizerConfig opt;
  HacConfig hac;
};

// One (T, timing, family) cell of the study. reps counts usable
// replications (the rate's denominator); failures counts replications
// whose estimation errored and were excluded.
struct McCell {
  long T = 0;
  InstrumentTiming timing = InstrumentTiming::NonLagged;
  Family family = Family::Quantile;
  double rate = 0.0;
  long reps = 0;
  long failures = 0;
  std::vector<double> j_stats;
  std::vector<double> p_values;
  int df = 0;
};

struct McReport {
  McConfig config;
  std::vector<McCell> cells;
  std::vector<std::string> warnings;

  const McCell& cell(long T, InstrumentTiming timing, Family family) const;
};

// Runs the size/power study: per replication, simulate a path, form the
// forecast, fit the logistic-linear model in the lagged realization for
// each family and instrument timing, and J-test at the nominal level.
// Replication r of sample size T draws from the stream
// derive_seed(derive_seed(base_seed, T), r) regardless of worker count.
McReport mc_size_power(const McConfig& config);

// CSV with header T,setting,family,rate,reps,failures.
std::string mc_report_to_csv(const McReport& report);

}  // namespace fort
