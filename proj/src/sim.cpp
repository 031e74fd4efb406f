#include "fort/sim.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "fort/errors.hpp"
#include "fort/inference.hpp"
#include "fort/parallel.hpp"
#include "fort/rng.hpp"
#include "fort/special.hpp"

namespace fort {

void ArGarchParams::validate() const {
  if (!(omega > 0.0)) {
    throw std::invalid_argument("ar_garch: omega must be > 0");
  }
  if (alpha < 0.0 || beta < 0.0) {
    throw std::invalid_argument("ar_garch: alpha and beta must be >= 0");
  }
  if (!(alpha + beta < 1.0)) {
    throw std::invalid_argument(
        "ar_garch: alpha + beta must be < 1 (stationarity)");
  }
}

double ArGarchParams::stationary_variance() const {
  validate();
  return omega / (1.0 - alpha - beta);
}

SimPath simulate_ar_garch(long T, const ArGarchParams& params, uint64_t seed,
                          long burn_in) {
  params.validate();
  if (T < 10) throw std::invalid_argument("simulate_ar_garch: T must be >= 10");
  if (burn_in < 0) {
    throw std::invalid_argument("simulate_ar_garch: burn_in must be >= 0");
  }
  SimPath path;
  path.params = params;
  path.seed = seed;
  path.y.resize(static_cast<size_t>(T));
  path.sigma.resize(static_cast<size_t>(T));
  path.eps.resize(static_cast<size_t>(T));

  CounterRng rng(seed);
  double y_prev = 0.0;
  double s2 = params.stationary_variance();
  for (long t = -burn_in; t < T; ++t) {
    double eps = rng.normal();
    double sd = std::sqrt(s2);
    double y = params.ar * y_prev + sd * eps;
    if (t >= 0) {
      auto i = static_cast<size_t>(t);
      path.y[i] = y;
      path.sigma[i] = sd;
      path.eps[i] = eps;
    }
    s2 = params.omega + params.beta * s2 + params.alpha * s2 * eps * eps;
    y_prev = y;
  }
  return path;
}

namespace {
double expectile_shift(double a) {
  if (!(a > 0.0)) {
    throw std::invalid_argument("forecast asymmetry a must be > 0");
  }
  return normal_expectile(1.0 / (1.0 + a));
}
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}  // namespace

ForecastSeries full_info_forecast(const SimPath& path, double a) {
  const double shift = expectile_shift(a);
  const long T = path.T();
  ForecastSeries fx;
  fx.first = 1;
  fx.x.assign(static_cast<size_t>(T), kNaN);
  for (long t = 1; t < T; ++t) {
    auto i = static_cast<size_t>(t);
    fx.x[i] = path.params.ar * path.y[i - 1] + path.sigma[i] * shift;
  }
  return fx;
}

ForecastSeries rigid_info_forecast(const SimPath& path, double a) {
  const double shift = expectile_shift(a);
  const long T = path.T();
  if (T < 3) {
    throw std::invalid_argument("rigid_info_forecast: path too short");
  }
  const auto& p = path.params;
  ForecastSeries fx;
  fx.first = 2;
  fx.x.assign(static_cast<size_t>(T), kNaN);
  fx.variance.assign(static_cast<size_t>(T), kNaN);
  for (long t = 2; t < T; ++t) {
    auto i = static_cast<size_t>(t);
    double s2 = path.sigma[i - 1] * path.sigma[i - 1];
    // Two-step-ahead conditional moments, variance kept in the decomposed
    // form: the AR carry-over plus the expected next-period GARCH variance.
    double mean = p.ar * p.ar * path.y[i - 2];
    double variance = p.ar * p.ar * s2 + (p.omega + (p.alpha + p.beta) * s2);
    fx.x[i] = mean + std::sqrt(variance) * shift;
    fx.variance[i] = variance;
  }
  return fx;
}

ForecastDataset forecast_dataset(const SimPath& path,
                                 const ForecastSeries& forecast, long first) {
  const long T = path.T();
  if (first < 1 || first < forecast.first) {
    throw std::invalid_argument(
        "forecast_dataset: first row must leave the forecast and the lagged "
        "state defined");
  }
  if (static_cast<long>(forecast.x.size()) != T) {
    throw std::invalid_argument(
        "forecast_dataset: forecast and path lengths differ");
  }
  if (T - first < 2) {
    throw std::invalid_argument("forecast_dataset: fewer than 2 usable rows");
  }
  ForecastDataset ds;
  for (long t = first; t < T; ++t) {
    auto i = static_cast<size_t>(t);
    ds.t.push_back(static_cast<double>(t + 1));
    ds.y.push_back(path.y[i]);
    ds.x.push_back(forecast.x[i]);
    ds.z.push_back(path.y[i - 1]);
  }
  ds.validate();
  return ds;
}

AsymInfoScenario asymmetric_info_scenario(long T, uint64_t seed, double sd_f,
                                          double sd_u, double sd_eps) {
  if (T < 2) {
    throw std::invalid_argument("asymmetric_info_scenario: T must be >= 2");
  }
  if (!(sd_f > 0.0 && sd_u > 0.0 && sd_eps > 0.0)) {
    throw std::invalid_argument(
        "asymmetric_info_scenario: standard deviations must be > 0");
  }
  CounterRng rng(seed);
  AsymInfoScenario sc;
  for (long t = 0; t < T; ++t) {
    double z_f = sd_f * rng.normal();
    double z_u = sd_u * rng.normal();
    double eps = sd_eps * rng.normal();
    sc.data.t.push_back(static_cast<double>(t + 1));
    sc.data.y.push_back(z_f + z_u + eps);
    sc.data.x.push_back(z_f);
    sc.data.z.push_back(z_u);
    sc.true_level.push_back(norm_cdf(-z_u / sd_eps));
  }
  sc.data.validate();
  return sc;
}

StateQuantileFixture simulate_state_quantile_forecast(long T,
                                                      const Vector& theta0,
                                                      uint64_t seed, double b,
                                                      Link link) {
  if (T < 2) {
    throw std::invalid_argument(
        "simulate_state_quantile_forecast: T must be >= 2");
  }
  if (theta0.size() != 2) {
    throw std::invalid_argument(
        "simulate_state_quantile_forecast: theta0 must have 2 entries");
  }
  CounterRng rng(seed);
  StateQuantileFixture fx;
  fx.theta0 = theta0;
  for (long t = 0; t < T; ++t) {
    double z = rng.normal();
    double u = rng.normal();
    double m = clamp_level(link_value(link, theta0[0] + z * theta0[1]));
    fx.data.t.push_back(static_cast<double>(t + 1));
    fx.data.z.push_back(z);
    fx.data.y.push_back(b * z + u);
    fx.data.x.push_back(b * z + norm_quantile(m));
  }
  fx.data.validate();
  return fx;
}

const char* forecaster_name(ForecasterKind kind) {
  return kind == ForecasterKind::FullInfo ? "full" : "rigid";
}

const char* timing_name(InstrumentTiming timing) {
  return timing == InstrumentTiming::NonLagged ? "nonlagged" : "lagged";
}

ForecasterKind parse_forecaster(const std::string& name) {
  if (name == "full") return ForecasterKind::FullInfo;
  if (name == "rigid") return ForecasterKind::Rigid;
  throw std::invalid_argument("unknown forecaster '" + name +
                              "' (expected full or rigid)");
}

InstrumentTiming parse_timing(const std::string& name) {
  if (name == "nonlagged") return InstrumentTiming::NonLagged;
  if (name == "lagged") return InstrumentTiming::Lagged;
  throw std::invalid_argument("unknown instrument timing '" + name +
                              "' (expected nonlagged or lagged)");
}

InstrumentRecipe mc_recipe(InstrumentTiming timing) {
  InstrumentRecipe recipe =
      parse_recipe("const,forecast,ferr@1,sqferr@1,forecast@1,ferr@2,sqferr@2");
  if (timing == InstrumentTiming::Lagged) recipe = recipe.lagged(1);
  return recipe;
}

const McCell& McReport::cell(long T, InstrumentTiming timing,
                             Family family) const {
  for (const auto& c : cells) {
    if (c.T == T && c.timing == timing && c.family == family) return c;
  }
  throw std::invalid_argument("McReport: no such cell");
}

McReport mc_size_power(const McConfig& config) {
  if (config.replications < 1) {
    throw std::invalid_argument("mc_size_power: replications must be >= 1");
  }
  if (config.T_grid.empty() || config.families.empty() ||
      config.timings.empty()) {
    throw std::invalid_argument("mc_size_power: empty grid");
  }
  if (!(config.nominal > 0.0 && config.nominal < 1.0)) {
    throw std::invalid_argument("mc_size_power: nominal level not in (0,1)");
  }
  config.params.validate();

  McReport report;
  report.config = config;
  if (config.replications < 100) {
    report.warnings.push_back(
        "replications = " + std::to_string(config.replications) +
        " gives a binomial standard error too large for calibration claims");
  }

  const SpecModel model = SpecModel::logistic_linear();

  struct RepOutcome {
    // Indexed [timing][family]; entries are NaN when the fit failed.
    std::vector<std::vector<double>> j_stat;
    std::vector<std::vector<double>> p_value;
    int df = 0;
  };

  for (long T : config.T_grid) {
    const uint64_t seed_T = derive_seed(config.base_seed, static_cast<uint64_t>(T));
    std::vector<RepOutcome> outcomes(static_cast<size_t>(config.replications));

    parallel_for(config.replications, config.workers, [&](long rep) {
      RepOutcome& out = outcomes[static_cast<size_t>(rep)];
      out.j_stat.assign(config.timings.size(),
                        std::vector<double>(config.families.size(),
                                            std::numeric_limits<double>::quiet_NaN()));
      out.p_value = out.j_stat;

      uint64_t seed = derive_seed(seed_T, static_cast<uint64_t>(rep));
      SimPath path = simulate_ar_garch(T, config.params, seed, config.burn_in);
      ForecastSeries fx = config.forecaster == ForecasterKind::FullInfo
                              ? full_info_forecast(path, config.a)
                              : rigid_info_forecast(path, config.a);
      ForecastDataset ds = forecast_dataset(path, fx, fx.first);

      for (size_t ti = 0; ti < config.timings.size(); ++ti) {
        InstrumentRecipe recipe = mc_recipe(config.timings[ti]);
        for (size_t fi = 0; fi < config.families.size(); ++fi) {
          Family family = config.families[fi];
          try {
            AlignedInstruments ai = build_instruments(ds, recipe, family);
            GmmFit fit = two_step_estimate(ai.data, ai.w, family, model,
                                           config.opt, config.hac);
            TestResult jt = j_test(fit);
            out.j_stat[ti][fi] = jt.statistic;
            out.p_value[ti][fi] = jt.p_value;
            out.df = jt.df;
          } catch (const std::exception&) {
            // Failed replication: recorded as NaN and excluded from rates.
          }
        }
      }
    });

    for (size_t ti = 0; ti < config.timings.size(); ++ti) {
      for (size_t fi = 0; fi < config.families.size(); ++fi) {
        McCell cell;
        cell.T = T;
        cell.timing = config.timings[ti];
        cell.family = config.families[fi];
        for (const auto& out : outcomes) {
          double p = out.p_value[ti][fi];
          if (std::isnan(p)) {
            ++cell.failures;
            continue;
          }
          ++cell.reps;
          cell.j_stats.push_back(out.j_stat[ti][fi]);
          cell.p_values.push_back(p);
          if (p < config.nominal) cell.rate += 1.0;
          if (out.df > 0) cell.df = out.df;
        }
        cell.rate = cell.reps > 0 ? cell.rate / static_cast<double>(cell.reps)
                                  : 0.0;
        report.cells.push_back(std::move(cell));
      }
    }
  }
  return report;
}

std::string mc_report_to_csv(const McReport& report) {
  std::string out = "T,setting,family,rate,reps,failures\n";
  for (const auto& c : report.cells) {
    out += std::to_string(c.T);
    out += ",";
    out += timing_name(c.timing);
    out += ",";
    out += family_name(c.family);
    out += ",";
    out += format_double(c.rate);
    out += ",";
    out += std::to_string(c.reps);
    out += ",";
    out += std::to_string(c.failures);
    out += "\n";
  }
  return out;
}

}  // namespace fort
