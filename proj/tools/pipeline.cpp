#include "pipeline.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "fort/combine.hpp"
#include "fort/dataset.hpp"
#include "fort/errors.hpp"
#include "fort/functionals.hpp"
#include "fort/gmm.hpp"
#include "fort/inference.hpp"
#include "fort/instruments.hpp"
#include "fort/sim.hpp"
#include "fort/spec_models.hpp"

namespace fort_cli {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;
using namespace fort;

// ---------------------------------------------------------------------------
// Config plumbing: defaults, allowed keys, typed readers.

[[noreturn]] void bad_key(const std::string& key, const std::string& what) {
  throw std::invalid_argument("config key '" + key + "': " + what);
}

double get_real(const json& cfg, const std::string& key) {
  const json& v = cfg.at(key);
  if (!v.is_number()) bad_key(key, "expected a number");
  return v.get<double>();
}

long get_int(const json& cfg, const std::string& key) {
  const json& v = cfg.at(key);
  if (!v.is_number_integer()) bad_key(key, "expected an integer");
  return v.get<long>();
}

std::string get_str(const json& cfg, const std::string& key) {
  const json& v = cfg.at(key);
  if (!v.is_string()) bad_key(key, "expected a string");
  return v.get<std::string>();
}

json estimation_defaults() {
  return json{
      {"data", ""},
      {"columns", json::object()},
      {"state", "column"},
      {"family", "quantile"},
      {"model", "constant"},
      {"link", "logistic"},
      {"break_time", 0.0},
      {"instruments", "const,forecast,ferr@1"},
      {"iv_level", 0.5},
      {"hac_kernel", "bartlett"},
      {"hac_bandwidth", "auto"},
      {"optimizer",
       json{{"diameter_tol", 1e-9},
            {"max_evals", 10000},
            {"lattice_spacing", 2.0},
            {"simplex_step", 1.0}}},
  };
}

json default_config(const std::string& command) {
  json cfg{{"command", command}, {"out", "out"}};
  if (command == "estimate" || command == "jtest" || command == "wald" ||
      command == "band" || command == "combine") {
    cfg.update(estimation_defaults());
  }
  if (command == "wald") cfg["restrict"] = "zero_slope";
  if (command == "band") {
    cfg["grid"] = "auto";
    cfg["confidence"] = 0.8;
  }
  if (command == "combine") cfg["sigma_recipe"] = "diff2";
  if (command == "simulate") {
    cfg["dgp"] = "ar_garch";
    cfg["T"] = 1000;
    cfg["seed"] = 1;
    cfg["burn_in"] = 500;
    cfg["a"] = 1.85;
    cfg["forecaster"] = "full";
    cfg["params"] = json{
        {"ar", 0.5}, {"omega", 0.1}, {"beta", 0.8}, {"alpha", 0.1}};
    cfg["sd_f"] = 1.0;
    cfg["sd_u"] = 1.0;
    cfg["sd_eps"] = 1.0;
  }
  if (command == "mc") {
    cfg["reps"] = 500;
    cfg["T_grid"] = json::array({250, 1000, 2000});
    cfg["forecaster"] = "full";
    cfg["instrument_timing"] = "both";
    cfg["families"] = json::array({"quantile", "expectile"});
    cfg["nominal"] = 0.05;
    cfg["workers"] = 1;
    cfg["seed"] = 20200825;
    cfg["a"] = 1.85;
    cfg["burn_in"] = 500;
    cfg["params"] = json{
        {"ar", 0.5}, {"omega", 0.1}, {"beta", 0.8}, {"alpha", 0.1}};
    cfg["hac_kernel"] = "bartlett";
    cfg["hac_bandwidth"] = "auto";
    cfg["optimizer"] = estimation_defaults()["optimizer"];
  }
  return cfg;
}

void check_unknown_keys(const json& cfg, const json& defaults,
                        const std::string& where) {
  for (auto it = cfg.begin(); it != cfg.end(); ++it) {
    if (!defaults.contains(it.key())) {
      throw std::invalid_argument("unknown config key '" + where + it.key() +
                                  "'");
    }
    if (defaults.at(it.key()).is_object() && it.key() != "columns") {
      if (!it.value().is_object()) bad_key(it.key(), "expected an object");
      check_unknown_keys(it.value(), defaults.at(it.key()),
                         where + it.key() + ".");
    }
  }
}

// defaults <- config file <- flags, later layers win; nested objects merge
// key by key.
void merge_layer(json& base, const json& overlay) {
  for (auto it = overlay.begin(); it != overlay.end(); ++it) {
    if (base.contains(it.key()) && base.at(it.key()).is_object() &&
        it.value().is_object() && it.key() != "columns") {
      merge_layer(base[it.key()], it.value());
    } else {
      base[it.key()] = it.value();
    }
  }
}

// ---------------------------------------------------------------------------
// Shared estimation assembly.

std::vector<std::string> peek_header(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open file: " + path);
  std::string header;
  if (!std::getline(in, header)) {
    throw std::invalid_argument("empty file (missing header): " + path);
  }
  std::vector<std::string> names;
  std::stringstream ss(header);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    size_t a = cell.find_first_not_of(" \t\r");
    size_t b = cell.find_last_not_of(" \t\r");
    names.push_back(a == std::string::npos ? "" : cell.substr(a, b - a + 1));
  }
  return names;
}

struct EstimationInputs {
  ForecastDataset data;  // aligned with w
  InstrumentMatrix w;
  Family family = Family::Quantile;
  SpecModel model = SpecModel::constant();
  OptimizerConfig opt;
  HacConfig hac;
  InstrumentRecipe recipe;
};

HacConfig read_hac(const json& cfg) {
  HacConfig hac;
  hac.kernel = parse_kernel(get_str(cfg, "hac_kernel"));
  const json& bw = cfg.at("hac_bandwidth");
  if (bw.is_string()) {
    if (bw.get<std::string>() != "auto") {
      bad_key("hac_bandwidth", "expected \"auto\" or a non-negative integer");
    }
    hac.bandwidth = -1;
  } else if (bw.is_number_integer()) {
    hac.bandwidth = static_cast<int>(bw.get<long>());
    if (hac.bandwidth < 0) bad_key("hac_bandwidth", "must be >= 0");
  } else {
    bad_key("hac_bandwidth", "expected \"auto\" or a non-negative integer");
  }
  return hac;
}

OptimizerConfig read_optimizer(const json& cfg) {
  const json& o = cfg.at("optimizer");
  OptimizerConfig opt;
  opt.diameter_tol = get_real(o, "diameter_tol");
  opt.max_evals_per_start = get_int(o, "max_evals");
  opt.lattice_spacing = get_real(o, "lattice_spacing");
  opt.simplex_step = get_real(o, "simplex_step");
  if (!(opt.diameter_tol > 0.0)) bad_key("optimizer.diameter_tol", "must be > 0");
  if (opt.max_evals_per_start < 10) bad_key("optimizer.max_evals", "must be >= 10");
  return opt;
}

EstimationInputs prepare_estimation(const json& cfg) {
  EstimationInputs in;
  std::string path = get_str(cfg, "data");
  if (path.empty()) {
    throw std::invalid_argument(
        "config key 'data': a CSV path is required (--data)");
  }

  // Column map: explicit entries win; otherwise roles bind to columns of
  // the same name when the header has them (y and x are required).
  std::vector<std::string> header = peek_header(path);
  auto has = [&](const std::string& name) {
    return std::find(header.begin(), header.end(), name) != header.end();
  };
  ColumnMap columns;
  const json& cj = cfg.at("columns");
  if (!cj.is_object()) bad_key("columns", "expected an object role -> name");
  for (auto it = cj.begin(); it != cj.end(); ++it) {
    std::string role = it.key();
    if (role != "t" && role != "y" && role != "x" && role != "z") {
      bad_key("columns", "unknown role '" + role +
                             "' (expected t, y, x or z)");
    }
    if (!it.value().is_string()) bad_key("columns." + role, "expected a string");
    columns[role] = it.value().get<std::string>();
  }
  for (const char* role : {"t", "y", "x", "z"}) {
    if (!columns.count(role) && has(role)) columns[role] = role;
  }
  if (!columns.count("y") || !columns.count("x")) {
    throw std::invalid_argument(
        "config key 'columns': roles 'y' and 'x' must map to existing "
        "columns (header of " + path + " lacks defaults)");
  }

  ForecastDataset ds = load_csv(path, columns);
  std::string state = get_str(cfg, "state");
  if (state == "column") {
    // z as loaded (or the time index when no z column exists).
  } else if (state == "y_lag") {
    ds = with_state_lagged_y(ds);
  } else if (state == "time") {
    ds = with_state_time(ds);
  } else {
    bad_key("state", "expected column, y_lag or time");
  }

  in.family = parse_family(get_str(cfg, "family"));
  in.model = SpecModel::from_name(get_str(cfg, "model"),
                                  get_real(cfg, "break_time"),
                                  parse_link(get_str(cfg, "link")));
  in.recipe = parse_recipe(get_str(cfg, "instruments"));
  in.recipe.iv_level = get_real(cfg, "iv_level");
  in.hac = read_hac(cfg);
  in.opt = read_optimizer(cfg);

  AlignedInstruments ai = build_instruments(ds, in.recipe, in.family);
  in.data = std::move(ai.data);
  in.w = std::move(ai.w);
  return in;
}

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (long i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (long j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

json vector_to_json(const Vector& v) {
  json arr = json::array();
  for (long i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

json fit_to_json(const GmmFit& fit, const EstimationInputs& in) {
  json j;
  j["family"] = family_name(fit.family);
  j["model"] = in.model.name();
  j["link"] = link_name(in.model.link());
  j["theta_hat"] = vector_to_json(fit.theta);
  j["sigma_hat"] = matrix_to_json(asymptotic_covariance(fit));
  j["Sigma"] = matrix_to_json(fit.Sigma);
  j["S"] = matrix_to_json(fit.S);
  j["G"] = matrix_to_json(fit.G);
  j["objective"] = fit.objective;
  j["T_eff"] = fit.T_eff;
  j["q"] = fit.q;
  j["p"] = fit.p;
  j["instrument_labels"] = in.w.labels;
  j["diagnostics"] = json{
      {"step1_objective", fit.diagnostics.step1_objective},
      {"step2_objective", fit.diagnostics.step2_objective},
      {"step1_evals", fit.diagnostics.step1_evals},
      {"step2_evals", fit.diagnostics.step2_evals},
      {"step1_starts", fit.diagnostics.step1_starts},
      {"step2_starts", fit.diagnostics.step2_starts},
      {"weight_condition", fit.diagnostics.weight_condition},
      {"final_condition", fit.diagnostics.final_condition},
      {"warnings", fit.diagnostics.warnings},
  };
  return j;
}

void write_text(const fs::path& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) {
    throw std::invalid_argument("cannot write file: " + path.string());
  }
  out << content;
}

void echo_config(const json& cfg, const fs::path& out_dir) {
  write_text(out_dir / "config.json", cfg.dump(2) + "\n");
}

std::string theta_to_text(const Vector& theta) {
  std::string s = "(";
  for (long i = 0; i < theta.size(); ++i) {
    if (i) s += ", ";
    s += format_double(theta[i]);
  }
  return s + ")";
}

// ---------------------------------------------------------------------------
// Commands.

int run_estimate(const json& cfg, const fs::path& out_dir) {
  EstimationInputs in = prepare_estimation(cfg);
  GmmFit fit = two_step_estimate(in.data, in.w, in.family, in.model, in.opt,
                                 in.hac);
  json j = fit_to_json(fit, in);
  write_text(out_dir / "estimate.json", j.dump(2) + "\n");
  std::cout << "estimate: model=" << in.model.name()
            << " family=" << family_name(in.family) << " T_eff=" << fit.T_eff
            << " q=" << fit.q << " p=" << fit.p << "\n"
            << "theta_hat = " << theta_to_text(fit.theta) << "\n"
            << "wrote " << (out_dir / "estimate.json").string() << "\n";
  return 0;
}

int run_jtest(const json& cfg, const fs::path& out_dir) {
  EstimationInputs in = prepare_estimation(cfg);
  GmmFit fit = two_step_estimate(in.data, in.w, in.family, in.model, in.opt,
                                 in.hac);
  TestResult jt = j_test(fit);
  write_text(out_dir / "estimate.json", fit_to_json(fit, in).dump(2) + "\n");
  write_text(out_dir / "jtest.json", test_result_to_json(jt) + "\n");
  std::cout << "J = " << format_double(jt.statistic) << " df = " << jt.df
            << " p = " << format_double(jt.p_value) << "\n"
            << "wrote " << (out_dir / "jtest.json").string() << "\n";
  return 0;
}

int run_wald(const json& cfg, const fs::path& out_dir) {
  EstimationInputs in = prepare_estimation(cfg);
  GmmFit fit = two_step_estimate(in.data, in.w, in.family, in.model, in.opt,
                                 in.hac);
  Restriction r = restriction_by_name(get_str(cfg, "restrict"));
  TestResult wt = wald_test(fit, r);
  write_text(out_dir / "estimate.json", fit_to_json(fit, in).dump(2) + "\n");
  write_text(out_dir / "wald.json", test_result_to_json(wt) + "\n");
  std::cout << "Wald (" << r.name << ") = " << format_double(wt.statistic)
            << " df = " << wt.df << " p = " << format_double(wt.p_value)
            << "\n"
            << "wrote " << (out_dir / "wald.json").string() << "\n";
  return 0;
}

std::vector<double> parse_grid(const std::string& text,
                               const ForecastDataset& ds) {
  if (text == "auto") {
    auto [lo_it, hi_it] = std::minmax_element(ds.z.begin(), ds.z.end());
    double lo = *lo_it, hi = *hi_it;
    int n = 41;
    std::vector<double> grid;
    for (int i = 0; i < n; ++i) {
      grid.push_back(lo + (hi - lo) * static_cast<double>(i) / (n - 1));
    }
    return grid;
  }
  double lo = 0.0, hi = 0.0;
  long n = 0;
  char colon1 = 0, colon2 = 0;
  std::istringstream ss(text);
  ss >> lo >> colon1 >> hi >> colon2 >> n;
  if (ss.fail() || colon1 != ':' || colon2 != ':' || n < 1 ||
      !ss.eof()) {
    bad_key("grid", "expected lo:hi:n, e.g. -2:2:41");
  }
  std::vector<double> grid;
  if (n == 1) {
    grid.push_back(lo);
    return grid;
  }
  for (long i = 0; i < n; ++i) {
    grid.push_back(lo + (hi - lo) * static_cast<double>(i) /
                            static_cast<double>(n - 1));
  }
  return grid;
}

int run_band(const json& cfg, const fs::path& out_dir) {
  EstimationInputs in = prepare_estimation(cfg);
  GmmFit fit = two_step_estimate(in.data, in.w, in.family, in.model, in.opt,
                                 in.hac);
  std::vector<double> grid = parse_grid(get_str(cfg, "grid"), in.data);
  double confidence = get_real(cfg, "confidence");
  LevelBand band = level_confidence_band(fit, in.model, grid, confidence);

  std::string csv = "z,level,lower,upper\n";
  for (size_t i = 0; i < band.z_grid.size(); ++i) {
    csv += format_double(band.z_grid[i]) + "," +
           format_double(band.level_hat[i]) + "," +
           format_double(band.lower[i]) + "," + format_double(band.upper[i]) +
           "\n";
  }
  write_text(out_dir / "estimate.json", fit_to_json(fit, in).dump(2) + "\n");
  write_text(out_dir / "band.csv", csv);
  std::cout << "band: " << band.z_grid.size() << " grid points at confidence "
            << format_double(confidence) << "\n"
            << "wrote " << (out_dir / "band.csv").string() << "\n";
  return 0;
}

int run_combine(const json& cfg, const fs::path& out_dir) {
  EstimationInputs in = prepare_estimation(cfg);
  GmmFit fit = two_step_estimate(in.data, in.w, in.family, in.model, in.opt,
                                 in.hac);
  const ForecastDataset& ds = in.data;
  const long T = ds.T();

  std::string recipe = get_str(cfg, "sigma_recipe");
  std::vector<double> sigma;
  if (recipe == "diff2") {
    sigma = sigma_recipe_diff2(ds.y);
  } else if (recipe.rfind("column:", 0) == 0) {
    std::string name = recipe.substr(7);
    auto it = ds.extra.find(name);
    if (it == ds.extra.end()) {
      bad_key("sigma_recipe", "column '" + name + "' not in dataset");
    }
    sigma = it->second;
    for (double s : sigma) {
      if (!(s > 0.0)) bad_key("sigma_recipe", "column '" + name +
                                                  "' must be strictly positive");
    }
  } else {
    bad_key("sigma_recipe", "expected diff2 or column:<name>");
  }

  std::vector<double> levels(static_cast<size_t>(T));
  std::vector<double> mu(static_cast<size_t>(T));
  double crps_sum = 0.0;
  std::string csv = "t,mu,sigma\n";
  for (long i = 0; i < T; ++i) {
    auto s = static_cast<size_t>(i);
    levels[s] = in.model.level(ds.z[s], fit.theta);
    DensityForecast d = gaussian_closed_form(ds.x[s], levels[s], sigma[s],
                                             in.family, static_cast<long>(ds.t[s]));
    mu[s] = d.mu;
    crps_sum += crps_gaussian(d.mu, d.sigma, ds.y[s]);
    csv += format_double(ds.t[s]) + "," + format_double(d.mu) + "," +
           format_double(d.sigma) + "\n";
  }

  ForecastScores point = score_forecasts(ds.x, ds.y, levels);
  ForecastScores combined = score_forecasts(mu, ds.y, levels);
  ScoreComparison cmp = compare_scores(point, combined);

  json scores;
  scores["point"] = json{{"mse", point.mse}, {"mfll", point.mfll}};
  scores["combined_mean"] = json{{"mse", combined.mse},
                                 {"mfll", combined.mfll},
                                 {"mean_crps", crps_sum / static_cast<double>(T)}};
  scores["normalized"] = json{
      {"point", json{{"mse", cmp.a_norm.mse}, {"mfll", cmp.a_norm.mfll}}},
      {"combined_mean",
       json{{"mse", cmp.b_norm.mse}, {"mfll", cmp.b_norm.mfll}}}};

  write_text(out_dir / "estimate.json", fit_to_json(fit, in).dump(2) + "\n");
  write_text(out_dir / "combined.csv", csv);
  write_text(out_dir / "scores.json", scores.dump(2) + "\n");
  std::cout << "combine: T=" << T << " mse(point)=" << format_double(point.mse)
            << " mse(combined)=" << format_double(combined.mse) << "\n"
            << "wrote " << (out_dir / "combined.csv").string() << " and "
            << (out_dir / "scores.json").string() << "\n";
  return 0;
}

ArGarchParams read_params(const json& cfg) {
  const json& p = cfg.at("params");
  ArGarchParams params;
  params.ar = get_real(p, "ar");
  params.omega = get_real(p, "omega");
  params.beta = get_real(p, "beta");
  params.alpha = get_real(p, "alpha");
  params.validate();
  return params;
}

int run_simulate(const json& cfg, const fs::path& out_dir) {
  std::string dgp = get_str(cfg, "dgp");
  long T = get_int(cfg, "T");
  auto seed = static_cast<uint64_t>(get_int(cfg, "seed"));

  ForecastDataset ds;
  if (dgp == "ar_garch") {
    ArGarchParams params = read_params(cfg);
    SimPath path = simulate_ar_garch(T, params, seed, get_int(cfg, "burn_in"));
    ForecastSeries fx =
        parse_forecaster(get_str(cfg, "forecaster")) == ForecasterKind::FullInfo
            ? full_info_forecast(path, get_real(cfg, "a"))
            : rigid_info_forecast(path, get_real(cfg, "a"));
    ds = forecast_dataset(path, fx, fx.first);
    std::vector<double> sig, eps;
    for (long t = fx.first; t < path.T(); ++t) {
      sig.push_back(path.sigma[static_cast<size_t>(t)]);
      eps.push_back(path.eps[static_cast<size_t>(t)]);
    }
    ds.extra["sigma"] = sig;
    ds.extra["eps"] = eps;
  } else if (dgp == "asym_info") {
    AsymInfoScenario sc =
        asymmetric_info_scenario(T, seed, get_real(cfg, "sd_f"),
                                 get_real(cfg, "sd_u"), get_real(cfg, "sd_eps"));
    ds = sc.data;
    ds.extra["true_level"] = sc.true_level;
  } else {
    bad_key("dgp", "expected ar_garch or asym_info");
  }

  save_csv(ds, (out_dir / "data.csv").string());
  std::cout << "simulate: dgp=" << dgp << " rows=" << ds.T() << " seed=" << seed
            << "\n"
            << "wrote " << (out_dir / "data.csv").string() << "\n";
  return 0;
}

int run_mc(const json& cfg, const fs::path& out_dir) {
  McConfig mc;
  mc.T_grid.clear();
  const json& grid = cfg.at("T_grid");
  if (!grid.is_array() || grid.empty()) bad_key("T_grid", "expected an array");
  for (const auto& v : grid) {
    if (!v.is_number_integer()) bad_key("T_grid", "entries must be integers");
    mc.T_grid.push_back(v.get<long>());
  }
  mc.replications = get_int(cfg, "reps");
  mc.forecaster = parse_forecaster(get_str(cfg, "forecaster"));
  std::string timing = get_str(cfg, "instrument_timing");
  if (timing == "both") {
    mc.timings = {InstrumentTiming::NonLagged, InstrumentTiming::Lagged};
  } else {
    mc.timings = {parse_timing(timing)};
  }
  mc.families.clear();
  const json& fams = cfg.at("families");
  if (!fams.is_array() || fams.empty()) bad_key("families", "expected an array");
  for (const auto& f : fams) {
    if (!f.is_string()) bad_key("families", "entries must be strings");
    mc.families.push_back(parse_family(f.get<std::string>()));
  }
  mc.nominal = get_real(cfg, "nominal");
  mc.base_seed = static_cast<uint64_t>(get_int(cfg, "seed"));
  mc.a = get_real(cfg, "a");
  mc.burn_in = get_int(cfg, "burn_in");
  mc.workers = static_cast<int>(get_int(cfg, "workers"));
  mc.params = read_params(cfg);
  mc.hac = read_hac(cfg);
  mc.opt = read_optimizer(cfg);

  McReport report = mc_size_power(mc);

  json j;
  j["cells"] = json::array();
  for (const auto& c : report.cells) {
    j["cells"].push_back(json{{"T", c.T},
                              {"setting", timing_name(c.timing)},
                              {"family", family_name(c.family)},
                              {"rate", c.rate},
                              {"reps", c.reps},
                              {"failures", c.failures},
                              {"df", c.df}});
  }
  j["warnings"] = report.warnings;
  write_text(out_dir / "mc.csv", mc_report_to_csv(report));
  write_text(out_dir / "mc.json", j.dump(2) + "\n");

  std::cout << "mc: forecaster=" << forecaster_name(mc.forecaster)
            << " reps=" << mc.replications << "\n";
  for (const auto& c : report.cells) {
    std::cout << "  T=" << c.T << " " << timing_name(c.timing) << " "
              << family_name(c.family) << ": rate="
              << format_double(c.rate) << " (reps=" << c.reps
              << ", failures=" << c.failures << ")\n";
  }
  std::cout << "wrote " << (out_dir / "mc.csv").string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// Flag definitions and dispatch.

enum class FlagType { Str, Int, Real, IntOrAuto, IntList };

struct FlagSpec {
  const char* flag;
  const char* key;
  FlagType type;
  const char* help;
};

const std::vector<FlagSpec>& estimation_flags() {
  static const std::vector<FlagSpec> flags = {
      {"--data", "data", FlagType::Str, "input CSV with header row"},
      {"--state", "state", FlagType::Str,
       "state variable source: column, y_lag or time"},
      {"--family", "family", FlagType::Str, "quantile or expectile"},
      {"--model", "model", FlagType::Str,
       "constant, logistic_linear, break or seasonal"},
      {"--link", "link", FlagType::Str, "logistic or probit"},
      {"--break-time", "break_time", FlagType::Real,
       "break period t_b for the break model"},
      {"--instruments", "instruments", FlagType::Str,
       "recipe, e.g. const,forecast,ferr@1,iv@1"},
      {"--iv-level", "iv_level", FlagType::Real,
       "level for the iv instrument term (V evaluated at this level)"},
      {"--hac-kernel", "hac_kernel", FlagType::Str,
       "bartlett, parzen or qs"},
      {"--hac-bandwidth", "hac_bandwidth", FlagType::IntOrAuto,
       "auto or a non-negative integer"},
  };
  return flags;
}

json convert_flag(const FlagSpec& spec, const std::string& raw) {
  switch (spec.type) {
    case FlagType::Str:
      return raw;
    case FlagType::Int: {
      try {
        size_t pos = 0;
        long v = std::stol(raw, &pos);
        if (pos != raw.size()) throw std::invalid_argument(raw);
        return v;
      } catch (const std::exception&) {
        bad_key(spec.key, "expected an integer, got '" + raw + "'");
      }
    }
    case FlagType::Real: {
      try {
        size_t pos = 0;
        double v = std::stod(raw, &pos);
        if (pos != raw.size()) throw std::invalid_argument(raw);
        return v;
      } catch (const std::exception&) {
        bad_key(spec.key, "expected a number, got '" + raw + "'");
      }
    }
    case FlagType::IntOrAuto: {
      if (raw == "auto") return raw;
      try {
        size_t pos = 0;
        long v = std::stol(raw, &pos);
        if (pos != raw.size()) throw std::invalid_argument(raw);
        return v;
      } catch (const std::exception&) {
        bad_key(spec.key, "expected auto or an integer, got '" + raw + "'");
      }
    }
    case FlagType::IntList: {
      json arr = json::array();
      std::stringstream ss(raw);
      std::string tok;
      while (std::getline(ss, tok, ',')) {
        try {
          size_t pos = 0;
          long v = std::stol(tok, &pos);
          if (pos != tok.size()) throw std::invalid_argument(tok);
          arr.push_back(v);
        } catch (const std::exception&) {
          bad_key(spec.key, "expected a comma-separated integer list");
        }
      }
      if (arr.empty()) bad_key(spec.key, "list is empty");
      return arr;
    }
  }
  return json();
}

struct SubcommandState {
  CLI::App* app = nullptr;
  std::string command;
  std::vector<FlagSpec> specs;
  std::map<std::string, std::string> raw_values;
  std::map<std::string, CLI::Option*> options;
  std::string config_path;
  CLI::Option* config_opt = nullptr;
};

void add_flags(SubcommandState& st, const std::vector<FlagSpec>& specs) {
  for (const auto& spec : specs) {
    st.specs.push_back(spec);
    st.options[spec.key] =
        st.app->add_option(spec.flag, st.raw_values[spec.key], spec.help);
  }
}

int dispatch(const SubcommandState& st) {
  json cfg = default_config(st.command);

  if (!st.config_path.empty()) {
    std::ifstream in(st.config_path);
    if (!in) {
      throw std::invalid_argument("cannot open config file: " + st.config_path);
    }
    json file_cfg;
    try {
      in >> file_cfg;
    } catch (const json::parse_error& e) {
      throw std::invalid_argument("config file " + st.config_path +
                                  " is not valid JSON: " + e.what());
    }
    if (!file_cfg.is_object()) {
      throw std::invalid_argument("config file must hold a JSON object");
    }
    if (file_cfg.contains("command")) {
      if (!file_cfg["command"].is_string() ||
          file_cfg["command"].get<std::string>() != st.command) {
        throw std::invalid_argument(
            "config file 'command' does not match subcommand '" + st.command +
            "'");
      }
    }
    check_unknown_keys(file_cfg, cfg, "");
    merge_layer(cfg, file_cfg);
  }

  for (const auto& spec : st.specs) {
    if (st.options.at(spec.key)->count() > 0) {
      cfg[spec.key] = convert_flag(spec, st.raw_values.at(spec.key));
    }
  }
  check_unknown_keys(cfg, default_config(st.command), "");

  fs::path out_dir = get_str(cfg, "out");
  fs::create_directories(out_dir);
  echo_config(cfg, out_dir);

  try {
    if (st.command == "estimate") return run_estimate(cfg, out_dir);
    if (st.command == "jtest") return run_jtest(cfg, out_dir);
    if (st.command == "wald") return run_wald(cfg, out_dir);
    if (st.command == "band") return run_band(cfg, out_dir);
    if (st.command == "combine") return run_combine(cfg, out_dir);
    if (st.command == "simulate") return run_simulate(cfg, out_dir);
    if (st.command == "mc") return run_mc(cfg, out_dir);
  } catch (const fort::NumericalError& e) {
    json err{{"error", e.what()}, {"type", "numerical"}};
    write_text(out_dir / "error.json", err.dump(2) + "\n");
    throw;
  }
  throw std::invalid_argument("unknown command '" + st.command + "'");
}

}  // namespace

int run(int argc, char** argv) {
  CLI::App app{
      "Estimation and testing of state-dependent forecast levels: two-step "
      "GMM, rationality J-tests, Wald specification tests, confidence bands, "
      "density combination and Monte Carlo studies."};
  app.require_subcommand(1);

  std::vector<SubcommandState> states(7);
  const char* names[] = {"estimate", "jtest", "wald", "band",
                         "combine", "simulate", "mc"};
  const char* helps[] = {
      "fit the level model by two-step GMM",
      "rationality test of overidentifying restrictions",
      "Wald test of a parameter restriction",
      "pointwise confidence band for the level curve",
      "Gaussian predictive densities from point forecasts, with scores",
      "simulate a benchmark process and forecaster",
      "Monte Carlo size/power study of the J-test",
  };
  for (int i = 0; i < 7; ++i) {
    states[static_cast<size_t>(i)].command = names[i];
    states[static_cast<size_t>(i)].app = app.add_subcommand(names[i], helps[i]);
  }
  for (auto& st : states) {
    st.config_opt = st.app->add_option("--config", st.config_path,
                                       "JSON config file (flags override it)");
    add_flags(st, {{"--out", "out", FlagType::Str, "output directory"}});
  }
  for (int i = 0; i < 5; ++i) add_flags(states[static_cast<size_t>(i)], estimation_flags());

  add_flags(states[2], {{"--restrict", "restrict", FlagType::Str,
                         "built-in restriction: zero_slope or no_break"}});
  add_flags(states[3],
            {{"--grid", "grid", FlagType::Str, "z grid as lo:hi:n, or auto"},
             {"--confidence", "confidence", FlagType::Real,
              "band confidence level in (0,1)"}});
  add_flags(states[4], {{"--sigma-recipe", "sigma_recipe", FlagType::Str,
                         "diff2 or column:<name>"}});
  add_flags(states[5],
            {{"--dgp", "dgp", FlagType::Str, "ar_garch or asym_info"},
             {"--T", "T", FlagType::Int, "sample size"},
             {"--seed", "seed", FlagType::Int, "RNG seed (all randomness)"},
             {"--burn-in", "burn_in", FlagType::Int, "burn-in periods"},
             {"--a", "a", FlagType::Real, "loss asymmetry of the forecaster"},
             {"--forecaster", "forecaster", FlagType::Str, "full or rigid"}});
  add_flags(states[6],
            {{"--reps", "reps", FlagType::Int, "replications per cell"},
             {"--T-grid", "T_grid", FlagType::IntList,
              "comma-separated sample sizes"},
             {"--forecaster", "forecaster", FlagType::Str, "full or rigid"},
             {"--instrument-timing", "instrument_timing", FlagType::Str,
              "nonlagged, lagged or both"},
             {"--nominal", "nominal", FlagType::Real, "test level"},
             {"--workers", "workers", FlagType::Int,
              "worker threads (0 = hardware)"},
             {"--seed", "seed", FlagType::Int, "base seed"},
             {"--a", "a", FlagType::Real, "loss asymmetry of the forecaster"},
             {"--burn-in", "burn_in", FlagType::Int, "burn-in periods"}});

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  for (const auto& st : states) {
    if (st.app->parsed()) {
      try {
        return dispatch(st);
      } catch (const fort::NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
      } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
      } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
      }
    }
  }
  std::cerr << "error: no subcommand given\n";
  return 2;
}

}  // namespace fort_cli
