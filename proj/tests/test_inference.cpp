#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fort/errors.hpp"
#include "fort/inference.hpp"
#include "fort/instruments.hpp"
#include "fort/rng.hpp"
#include "fort/sim.hpp"
#include "fort/special.hpp"

using namespace fort;

namespace {

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<long>(xs.size()));
  long i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

// Minimal fit with every field the tests below touch filled in by hand.
GmmFit hand_fit() {
  GmmFit fit;
  fit.family = Family::Quantile;
  fit.p = 1;
  fit.q = 2;
  fit.T_eff = 50;
  fit.theta = vec({0.2});
  fit.g_mean = vec({0.1, -0.2});
  fit.S = Matrix::Zero(2, 2);
  fit.S(0, 0) = 2.0;
  fit.S(1, 1) = 4.0;
  fit.G = Matrix::Constant(2, 1, -0.25);
  fit.Sigma = Matrix::Constant(1, 1, 1.0);
  return fit;
}

GmmFit fit_state_quantile(long T, const Vector& theta0, uint64_t seed,
                          const std::string& recipe =
                              "const,state,forecast,ferr@1") {
  StateQuantileFixture fx = simulate_state_quantile_forecast(T, theta0, seed);
  AlignedInstruments ai =
      build_instruments(fx.data, parse_recipe(recipe), Family::Quantile);
  return two_step_estimate(ai.data, ai.w, Family::Quantile,
                           SpecModel::logistic_linear());
}

}  // namespace

TEST_CASE("j test statistic and p-value on a hand-built fit") {
  GmmFit fit = hand_fit();
  TestResult r = j_test(fit);
  CHECK(r.kind == "J");
  CHECK(r.df == 1);
  CHECK(r.T_eff == 50);
  // T * (0.1^2/2 + 0.2^2/4) = 50 * 0.015.
  CHECK(r.statistic == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(r.p_value ==
        doctest::Approx(chi2_survival(0.75, 1)).epsilon(1e-12));
  CHECK(r.p_value == doctest::Approx(2.0 * (1.0 - norm_cdf(std::sqrt(0.75))))
                         .epsilon(1e-10));
}

TEST_CASE("j test requires strict overidentification") {
  GmmFit fit = hand_fit();
  fit.q = 1;
  fit.g_mean = vec({0.1});
  fit.S = Matrix::Constant(1, 1, 2.0);
  try {
    (void)j_test(fit);
    FAIL("expected invalid_argument");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("exactly identified") !=
          std::string::npos);
  }
}

TEST_CASE("test result serializes to json") {
  GmmFit fit = hand_fit();
  fit.T_eff = 10;  // trips the small-sample warning
  TestResult r = j_test(fit);
  nlohmann::json j = nlohmann::json::parse(test_result_to_json(r));
  CHECK(j.at("kind").get<std::string>() == "J");
  CHECK(j.at("df").get<int>() == 1);
  CHECK(j.at("T_eff").get<long>() == 10);
  CHECK(j.at("statistic").get<double>() ==
        doctest::Approx(r.statistic).epsilon(1e-15));
  CHECK(j.at("p_value").get<double>() ==
        doctest::Approx(r.p_value).epsilon(1e-15));
  CHECK(j.at("warnings").size() == 1);
}

TEST_CASE("restriction constructors") {
  Restriction zs = zero_slope_restriction();
  CHECK(zs.name == "zero_slope");
  CHECK(zs.l == 1);
  Vector th = vec({0.7, -0.3});
  CHECK(zs.value(th)[0] == doctest::Approx(-0.3).epsilon(1e-15));
  Matrix jz = zs.jacobian(th);
  CHECK(jz(0, 0) == 0.0);
  CHECK(jz(0, 1) == 1.0);

  Restriction nb = no_break_restriction();
  CHECK(nb.value(th)[0] == doctest::Approx(1.0).epsilon(1e-15));
  Matrix jn = nb.jacobian(th);
  CHECK(jn(0, 0) == 1.0);
  CHECK(jn(0, 1) == -1.0);
  CHECK_THROWS_AS((void)nb.value(vec({1.0, 2.0, 3.0})), std::invalid_argument);

  CHECK(restriction_by_name("zero_slope").name == "zero_slope");
  CHECK(restriction_by_name("no_break").name == "no_break");
  CHECK_THROWS_AS((void)restriction_by_name("nope"), std::invalid_argument);
}

TEST_CASE("wald statistic is zero when the restriction holds exactly") {
  GmmFit fit = hand_fit();
  fit.p = 2;
  fit.theta = vec({0.4, 0.0});
  fit.Sigma = Matrix::Identity(2, 2);
  TestResult r = wald_test(fit, zero_slope_restriction());
  CHECK(r.kind == "Wald");
  CHECK(r.df == 1);
  CHECK(r.statistic == 0.0);
  CHECK(r.p_value == 1.0);
}

TEST_CASE("wald matches the closed scalar form and is scale invariant") {
  GmmFit fit = hand_fit();
  fit.p = 2;
  fit.T_eff = 400;
  fit.theta = vec({0.4, -0.3});
  fit.Sigma = Matrix::Zero(2, 2);
  fit.Sigma(0, 0) = 2.0;
  fit.Sigma(1, 1) = 8.0;
  fit.Sigma(0, 1) = fit.Sigma(1, 0) = 0.5;

  TestResult base = wald_test(fit, zero_slope_restriction());
  double var_slope = 8.0 / 400.0;
  CHECK(base.statistic ==
        doctest::Approx(0.09 / var_slope).epsilon(1e-12));

  // Rescaling the scalar restriction by 3 leaves the statistic unchanged.
  Restriction scaled = zero_slope_restriction();
  auto base_value = scaled.value;
  auto base_jac = scaled.jacobian;
  scaled.value = [base_value](const Vector& t) {
    return Vector(3.0 * base_value(t));
  };
  scaled.jacobian = [base_jac](const Vector& t) {
    return Matrix(3.0 * base_jac(t));
  };
  TestResult r3 = wald_test(fit, scaled);
  CHECK(std::fabs(r3.statistic - base.statistic) <=
        1e-8 * std::fabs(base.statistic));
  CHECK(std::fabs(r3.p_value - base.p_value) <= 1e-10);
}

TEST_CASE("wald rejects shape mismatches and too many restrictions") {
  GmmFit fit = hand_fit();  // p = 1
  Restriction r = zero_slope_restriction();
  r.l = 2;
  CHECK_THROWS_AS((void)wald_test(fit, r), std::invalid_argument);

  fit.p = 2;
  fit.theta = vec({0.1, 0.2});
  fit.Sigma = Matrix::Identity(2, 2);
  Restriction bad = zero_slope_restriction();
  bad.jacobian = [](const Vector&) { return Matrix::Zero(1, 3); };
  CHECK_THROWS_AS((void)wald_test(fit, bad), std::invalid_argument);
}

TEST_CASE("wald test has power against a sloped level") {
  const int reps = 100;
  Vector theta0 = vec({0.3, -0.4});
  int rejections = 0;
  int usable = 0;
  for (int r = 0; r < reps; ++r) {
    try {
      GmmFit fit =
          fit_state_quantile(800, theta0, derive_seed(41000, (uint64_t)r));
      TestResult w = wald_test(fit, zero_slope_restriction());
      ++usable;
      if (w.p_value < 0.05) ++rejections;
    } catch (const NumericalError&) {
      // A rare draw can make the weighting matrix singular; skip it the way
      // the size and power study does.
    }
  }
  CHECK(usable >= 95);
  CHECK(10 * rejections >= 9 * usable);
}

TEST_CASE("wald test keeps its size under the null") {
  const int reps = 100;
  Vector theta0 = vec({0.3, 0.0});
  int rejections = 0;
  int usable = 0;
  for (int r = 0; r < reps; ++r) {
    try {
      // Under the null the forecast is an affine function of the state, so
      // keeping both in the instrument set would make S exactly singular.
      GmmFit fit = fit_state_quantile(800, theta0,
                                      derive_seed(42000, (uint64_t)r),
                                      "const,state,ferr@1");
      TestResult w = wald_test(fit, zero_slope_restriction());
      ++usable;
      if (w.p_value < 0.05) ++rejections;
    } catch (const NumericalError&) {
    }
  }
  CHECK(usable >= 95);
  CHECK(rejections <= 12);
}

TEST_CASE("confidence band closed form at the origin") {
  const long T = 400;
  GmmFit fit;
  fit.family = Family::Quantile;
  fit.p = 2;
  fit.q = 3;
  fit.T_eff = T;
  fit.theta = vec({0.0, 0.0});
  fit.Sigma = Matrix::Identity(2, 2);
  SpecModel model = SpecModel::logistic_linear();

  LevelBand band = level_confidence_band(fit, model, {0.0}, 0.8);
  CHECK(band.confidence == 0.8);
  REQUIRE(band.level_hat.size() == 1);
  CHECK(band.level_hat[0] == doctest::Approx(0.5).epsilon(1e-15));
  double half = normal_quantile(0.9) / std::sqrt(static_cast<double>(T));
  CHECK(band.lower[0] ==
        doctest::Approx(link_value(Link::Logistic, -half)).epsilon(1e-9));
  CHECK(band.upper[0] ==
        doctest::Approx(link_value(Link::Logistic, half)).epsilon(1e-9));

  // At z = 2 the predictor variance grows to 1 + 4 over T.
  LevelBand b2 = level_confidence_band(fit, model, {2.0}, 0.8);
  double half2 = normal_quantile(0.9) * std::sqrt(5.0 / T);
  CHECK(b2.upper[0] ==
        doctest::Approx(link_value(Link::Logistic, half2)).epsilon(1e-9));
}

TEST_CASE("zero covariance collapses the band onto the point estimate") {
  GmmFit fit;
  fit.family = Family::Quantile;
  fit.p = 2;
  fit.q = 2;
  fit.T_eff = 100;
  fit.theta = vec({0.3, -0.1});
  fit.Sigma = Matrix::Zero(2, 2);
  SpecModel model = SpecModel::logistic_linear();
  LevelBand band = level_confidence_band(fit, model, {-1.0, 0.0, 1.0}, 0.9);
  for (size_t i = 0; i < band.z_grid.size(); ++i) {
    CHECK(band.lower[i] == doctest::Approx(band.level_hat[i]).epsilon(1e-14));
    CHECK(band.upper[i] == doctest::Approx(band.level_hat[i]).epsilon(1e-14));
  }
}

TEST_CASE("bands are ordered, in (0,1), and nested across confidence") {
  GmmFit fit = fit_state_quantile(500, vec({0.3, -0.4}), 97);
  SpecModel model = SpecModel::logistic_linear();
  std::vector<double> grid;
  for (int i = 0; i <= 20; ++i) grid.push_back(-2.0 + 0.2 * i);
  LevelBand wide = level_confidence_band(fit, model, grid, 0.8);
  LevelBand narrow = level_confidence_band(fit, model, grid, 0.4);
  for (size_t i = 0; i < grid.size(); ++i) {
    CHECK(wide.lower[i] > 0.0);
    CHECK(wide.upper[i] < 1.0);
    CHECK(wide.lower[i] <= narrow.lower[i]);
    CHECK(narrow.lower[i] <= narrow.level_hat[i]);
    CHECK(narrow.level_hat[i] <= narrow.upper[i]);
    CHECK(narrow.upper[i] <= wide.upper[i]);
  }
}

TEST_CASE("band input validation") {
  GmmFit fit;
  fit.p = 2;
  fit.T_eff = 100;
  fit.theta = vec({0.0, 0.0});
  fit.Sigma = Matrix::Identity(2, 2);
  SpecModel model = SpecModel::logistic_linear();
  CHECK_THROWS_AS((void)level_confidence_band(fit, model, {0.0}, 0.0),
                  std::invalid_argument);
  CHECK_THROWS_AS((void)level_confidence_band(fit, model, {0.0}, 1.0),
                  std::invalid_argument);
  CHECK_THROWS_AS((void)level_confidence_band(fit, model, {}, 0.8),
                  std::invalid_argument);
  GmmFit wrong = fit;
  wrong.theta = vec({0.0});
  CHECK_THROWS_AS((void)level_confidence_band(wrong, model, {0.0}, 0.8),
                  std::invalid_argument);
}
