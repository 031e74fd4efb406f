#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "fort/errors.hpp"
#include "fort/functionals.hpp"
#include "fort/gmm.hpp"
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

ForecastDataset tiny_dataset(std::initializer_list<double> ys,
                             std::initializer_list<double> xs) {
  ForecastDataset ds;
  long i = 0;
  for (double y : ys) {
    ds.t.push_back(static_cast<double>(++i));
    ds.y.push_back(y);
    ds.z.push_back(0.1 * static_cast<double>(i));
  }
  for (double x : xs) ds.x.push_back(x);
  return ds;
}

InstrumentMatrix ones_matrix(long T) {
  InstrumentMatrix w;
  w.w = Eigen::MatrixXd::Ones(T, 1);
  w.labels = {"const"};
  return w;
}

// Random but reproducible fixture with q = 3 instruments.
struct Fixture {
  ForecastDataset ds;
  InstrumentMatrix w;
};

Fixture random_fixture(long T, uint64_t seed) {
  Fixture f;
  CounterRng rng(seed);
  f.w.w.resize(T, 3);
  for (long i = 0; i < T; ++i) {
    auto s = static_cast<size_t>(i);
    f.ds.t.push_back(static_cast<double>(i + 1));
    f.ds.y.push_back(rng.normal());
    f.ds.x.push_back(0.3 * rng.normal());
    f.ds.z.push_back(rng.normal());
    f.w.w(i, 0) = 1.0;
    f.w.w(i, 1) = rng.normal();
    f.w.w(i, 2) = rng.uniform();
    (void)s;
  }
  f.w.labels = {"const", "n", "u"};
  return f;
}

// iid data with a constant forecast pinned at a known functional of the
// conditional (= marginal) distribution.
ForecastDataset iid_quantile_data(long T, double tau, uint64_t seed,
                                  double shift = 0.0) {
  ForecastDataset ds;
  CounterRng rng(seed);
  double q = normal_quantile(tau);
  for (long i = 0; i < T; ++i) {
    ds.t.push_back(static_cast<double>(i + 1));
    ds.y.push_back(rng.normal() + shift);
    ds.x.push_back(q + shift);
    ds.z.push_back(rng.normal());
  }
  return ds;
}

}  // namespace

TEST_CASE("kernel and bandwidth plumbing") {
  CHECK(parse_kernel("bartlett") == HacKernel::Bartlett);
  CHECK(parse_kernel("parzen") == HacKernel::Parzen);
  CHECK(parse_kernel("qs") == HacKernel::QuadraticSpectral);
  CHECK(parse_kernel("quadratic_spectral") == HacKernel::QuadraticSpectral);
  CHECK_THROWS_AS((void)parse_kernel("uniform"), std::invalid_argument);
  CHECK(std::string(kernel_name(HacKernel::Parzen)) == "parzen");

  HacConfig cfg;
  CHECK(cfg.resolve_bandwidth(100) == 4);
  CHECK(cfg.resolve_bandwidth(2000) == 7);
  CHECK(cfg.resolve_bandwidth(25) == 2);
  cfg.bandwidth = 3;
  CHECK(cfg.resolve_bandwidth(1000) == 3);
  cfg.bandwidth = 10;
  CHECK_THROWS_AS((void)cfg.resolve_bandwidth(10), std::invalid_argument);
}

TEST_CASE("moment series on two-point examples") {
  SpecModel c = SpecModel::constant();
  Vector theta = vec({0.0});  // m = 0.5
  for (Family fam : {Family::Quantile, Family::Expectile}) {
    ForecastDataset ds = tiny_dataset({0.0, 2.0}, {1.0, 1.0});
    MomentSeries ms = moment_series(ds, ones_matrix(2), fam, c, theta);
    CHECK(ms.g(0, 0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(ms.g(1, 0) == doctest::Approx(-0.5).epsilon(1e-15));
    CHECK(ms.mean[0] == doctest::Approx(0.0).scale(1.0).epsilon(1e-15));
  }
}

TEST_CASE("moment series equals a hand-coded double loop") {
  Fixture f = random_fixture(20, 1234);
  SpecModel model = SpecModel::logistic_linear();
  Vector theta = vec({0.3, -0.2});
  for (Family fam : {Family::Quantile, Family::Expectile}) {
    MomentSeries ms = moment_series(f.ds, f.w, fam, model, theta);
    REQUIRE(ms.g.rows() == 20);
    REQUIRE(ms.g.cols() == 3);
    for (long t = 0; t < 20; ++t) {
      auto s = static_cast<size_t>(t);
      double m = model.level(f.ds.z[s], theta);
      double v = identification(fam, f.ds.x[s], f.ds.y[s], m);
      for (long j = 0; j < 3; ++j) {
        CHECK(std::fabs(ms.g(t, j) - v * f.w.w(t, j)) <= 1e-10);
      }
    }
    for (long j = 0; j < 3; ++j) {
      long double colsum = 0.0L;
      for (long t = 0; t < 20; ++t) colsum += ms.g(t, j);
      CHECK(std::fabs(ms.mean[j] - static_cast<double>(colsum) / 20.0) <=
            1e-12);
    }
  }
}

TEST_CASE("moment jacobian closed forms") {
  SpecModel c = SpecModel::constant();
  Vector theta = vec({0.0});
  ForecastDataset dq = tiny_dataset({0.4, -1.0}, {0.2, 0.3});
  Matrix G = moment_jacobian(dq, ones_matrix(2), Family::Quantile, c, theta);
  CHECK(G.rows() == 1);
  CHECK(G.cols() == 1);
  CHECK(G(0, 0) == doctest::Approx(-0.25).epsilon(1e-14));

  // Expectile: mean |x - y| = 2 gives G = -0.5.
  ForecastDataset de = tiny_dataset({-1.0, 2.0}, {1.0, 0.0});
  Matrix Ge = moment_jacobian(de, ones_matrix(2), Family::Expectile, c, theta);
  CHECK(Ge(0, 0) == doctest::Approx(-0.5).epsilon(1e-14));
}

TEST_CASE("moment jacobian matches finite differences of the moment mean") {
  Fixture f = random_fixture(20, 99);
  SpecModel model = SpecModel::logistic_linear();
  Vector theta = vec({0.25, 0.4});
  // The quantile jacobian is smooth but the quantile moment itself is a
  // step function, so the finite-difference check uses the expectile
  // family (smooth in theta) plus the brute-force loop for the quantile.
  Matrix G = moment_jacobian(f.ds, f.w, Family::Expectile, model, theta);
  double h = 1e-6;
  for (int k = 0; k < 2; ++k) {
    Vector tp = theta, tm = theta;
    tp[k] += h;
    tm[k] -= h;
    Vector mp = moment_series(f.ds, f.w, Family::Expectile, model, tp).mean;
    Vector mm = moment_series(f.ds, f.w, Family::Expectile, model, tm).mean;
    for (long j = 0; j < 3; ++j) {
      double fd = (mp[j] - mm[j]) / (2.0 * h);
      CHECK(std::fabs(fd - G(j, k)) <= 1e-5);
    }
  }

  // Quantile: brute-force loop oracle.
  Matrix Gq = moment_jacobian(f.ds, f.w, Family::Quantile, model, theta);
  Vector grad(2);
  Matrix want = Matrix::Zero(3, 2);
  for (long t = 0; t < 20; ++t) {
    auto s = static_cast<size_t>(t);
    model.level_gradient(f.ds.z[s], theta, grad);
    for (long j = 0; j < 3; ++j) {
      for (int k = 0; k < 2; ++k) {
        want(j, k) += -1.0 * f.w.w(t, j) * grad[k] / 20.0;
      }
    }
  }
  for (long j = 0; j < 3; ++j) {
    for (int k = 0; k < 2; ++k) {
      CHECK(std::fabs(Gq(j, k) - want(j, k)) <= 1e-10);
    }
  }
}

TEST_CASE("hac at bandwidth zero is exactly the demeaned covariance") {
  Fixture f = random_fixture(20, 5);
  SpecModel model = SpecModel::constant();
  MomentSeries ms =
      moment_series(f.ds, f.w, Family::Expectile, model, vec({0.1}));
  HacConfig cfg;
  cfg.bandwidth = 0;
  Matrix S = hac_covariance(ms, cfg);

  Matrix want = Matrix::Zero(3, 3);
  for (long t = 0; t < 20; ++t) {
    for (long i = 0; i < 3; ++i) {
      for (long j = 0; j < 3; ++j) {
        want(i, j) += (ms.g(t, i) - ms.mean[i]) * (ms.g(t, j) - ms.mean[j]);
      }
    }
  }
  want /= 20.0;
  for (long i = 0; i < 3; ++i) {
    for (long j = 0; j < 3; ++j) {
      CHECK(S(i, j) == want(i, j));  // bit-exact
    }
  }
}

TEST_CASE("hac closed form on the alternating series") {
  const long T = 8;
  MomentSeries ms;
  ms.g.resize(T, 1);
  for (long t = 0; t < T; ++t) ms.g(t, 0) = (t % 2 == 0) ? 1.0 : -1.0;
  ms.mean = Vector::Zero(1);

  // Gamma_0 = 1, Gamma_1 = -(T-1)/T, S = 1 - 2 k(1/2) (T-1)/T.
  auto closed = [&](double k) {
    return 1.0 - 2.0 * k * static_cast<double>(T - 1) / static_cast<double>(T);
  };
  HacConfig cfg;
  cfg.bandwidth = 1;
  cfg.kernel = HacKernel::Bartlett;
  CHECK(hac_covariance(ms, cfg)(0, 0) ==
        doctest::Approx(closed(0.5)).epsilon(1e-14));
  cfg.kernel = HacKernel::Parzen;
  double parzen_half = 1.0 - 6.0 * 0.25 + 6.0 * 0.125;
  CHECK(hac_covariance(ms, cfg)(0, 0) ==
        doctest::Approx(closed(parzen_half)).epsilon(1e-14));
  cfg.kernel = HacKernel::QuadraticSpectral;
  double xq = 1.2 * M_PI * 0.5;
  double qs_half = 25.0 / (12.0 * M_PI * M_PI * 0.25) *
                   (std::sin(xq) / xq - std::cos(xq));
  CHECK(hac_covariance(ms, cfg)(0, 0) ==
        doctest::Approx(closed(qs_half)).epsilon(1e-12));
}

TEST_CASE("hac on iid moments stays near the plain covariance") {
  const long T = 4000;
  CounterRng rng(555);
  MomentSeries ms;
  ms.g.resize(T, 2);
  for (long t = 0; t < T; ++t) {
    ms.g(t, 0) = rng.normal();
    ms.g(t, 1) = 0.5 * rng.normal() + 0.1;
  }
  ms.mean = ms.g.colwise().mean();
  HacConfig with_lags;
  with_lags.bandwidth = 4;
  HacConfig no_lags;
  no_lags.bandwidth = 0;
  Matrix S4 = hac_covariance(ms, with_lags);
  Matrix S0 = hac_covariance(ms, no_lags);
  for (long i = 0; i < 2; ++i) {
    CHECK(std::fabs(S4(i, i) - S0(i, i)) <= 0.10 * S0(i, i));
  }
}

TEST_CASE("hac is permutation-similar under column reordering") {
  Fixture f = random_fixture(30, 8);
  MomentSeries ms = moment_series(f.ds, f.w, Family::Expectile,
                                  SpecModel::constant(), vec({0.2}));
  HacConfig cfg;
  cfg.bandwidth = 2;
  Matrix S = hac_covariance(ms, cfg);

  MomentSeries perm;
  perm.g.resize(30, 3);
  perm.g.col(0) = ms.g.col(2);
  perm.g.col(1) = ms.g.col(0);
  perm.g.col(2) = ms.g.col(1);
  perm.mean = Vector(3);
  perm.mean << ms.mean[2], ms.mean[0], ms.mean[1];
  Matrix Sp = hac_covariance(perm, cfg);
  long p[3] = {2, 0, 1};  // perm column j is original column p[j]
  for (long i = 0; i < 3; ++i) {
    for (long j = 0; j < 3; ++j) {
      CHECK(Sp(i, j) == doctest::Approx(S(p[i], p[j])).epsilon(1e-14));
    }
  }
}

TEST_CASE("two-step recovers a constant quantile level") {
  ForecastDataset ds = iid_quantile_data(2000, 0.7, 2020);
  AlignedInstruments ai =
      build_instruments(ds, parse_recipe("const,ferr@1"), Family::Quantile);
  GmmFit fit = two_step_estimate(ai.data, ai.w, Family::Quantile,
                                 SpecModel::constant());
  CHECK(fit.p == 1);
  CHECK(fit.q == 2);
  CHECK(fit.T_eff == 1999);
  double m_hat = link_value(Link::Logistic, fit.theta[0]);
  CHECK(std::fabs(m_hat - 0.7) <= 0.03);
  CHECK(fit.diagnostics.step2_objective == fit.objective);
  CHECK(fit.S.rows() == 2);
  CHECK(fit.G.rows() == 2);
  CHECK(fit.Sigma.rows() == 1);
  CHECK(fit.Sigma(0, 0) > 0.0);
}

TEST_CASE("two-step recovers the mean as a 0.5 expectile") {
  ForecastDataset ds;
  CounterRng rng(2021);
  for (long i = 0; i < 2000; ++i) {
    ds.t.push_back(static_cast<double>(i + 1));
    ds.y.push_back(rng.normal());
    ds.x.push_back(0.0);
    ds.z.push_back(rng.normal());
  }
  AlignedInstruments ai =
      build_instruments(ds, parse_recipe("const,ferr@1"), Family::Expectile);
  GmmFit fit = two_step_estimate(ai.data, ai.w, Family::Expectile,
                                 SpecModel::constant());
  CHECK(std::fabs(link_value(Link::Logistic, fit.theta[0]) - 0.5) <= 0.03);
}

TEST_CASE("state-dependent quantile model is estimated consistently") {
  StateQuantileFixture fx =
      simulate_state_quantile_forecast(2000, vec({0.3, -0.4}), 77);
  AlignedInstruments ai = build_instruments(
      fx.data, parse_recipe("const,state,forecast,ferr@1"), Family::Quantile);
  GmmFit fit = two_step_estimate(ai.data, ai.w, Family::Quantile,
                                 SpecModel::logistic_linear());
  CHECK(std::fabs(fit.theta[0] - 0.3) <= 0.4);
  CHECK(std::fabs(fit.theta[1] + 0.4) <= 0.4);
  // Step 2 never worsens the weighted objective relative to the step-1
  // point, using the same weight matrix.
  MomentSeries ms1 = moment_series(ai.data, ai.w, Family::Quantile,
                                   SpecModel::logistic_linear(),
                                   fit.diagnostics.step1_theta);
  HacConfig hac;
  Matrix S1 = hac_covariance(ms1, hac);
  Vector g1 = ms1.mean;
  Vector g2 = moment_series(ai.data, ai.w, Family::Quantile,
                            SpecModel::logistic_linear(), fit.theta)
                  .mean;
  double at_step1 = g1.dot(S1.ldlt().solve(g1));
  double at_step2 = g2.dot(S1.ldlt().solve(g2));
  CHECK(at_step2 <= at_step1 * (1.0 + 1e-6) + 1e-9);
}

TEST_CASE("estimation is shift equivariant with shift-invariant instruments") {
  ForecastDataset base = iid_quantile_data(800, 0.7, 31);
  ForecastDataset shifted = iid_quantile_data(800, 0.7, 31, 5.0);
  auto fit = [&](const ForecastDataset& d) {
    AlignedInstruments ai =
        build_instruments(d, parse_recipe("const,ferr@1"), Family::Quantile);
    return two_step_estimate(ai.data, ai.w, Family::Quantile,
                             SpecModel::constant());
  };
  GmmFit a = fit(base);
  GmmFit b = fit(shifted);
  CHECK(a.theta[0] == b.theta[0]);  // moments are identical functions
}

TEST_CASE("moment norm at the truth shrinks at the root-T rate") {
  Vector theta0 = vec({0.3, -0.4});
  SpecModel model = SpecModel::logistic_linear();
  auto mean_norm = [&](long T) {
    double acc = 0.0;
    const int reps = 20;
    for (int r = 0; r < reps; ++r) {
      StateQuantileFixture fx = simulate_state_quantile_forecast(
          T, theta0, derive_seed(9000, static_cast<uint64_t>(r)));
      AlignedInstruments ai = build_instruments(
          fx.data, parse_recipe("const,state,forecast"), Family::Quantile);
      acc += moment_series(ai.data, ai.w, Family::Quantile, model, theta0)
                 .mean.norm();
    }
    return acc / reps;
  };
  double n500 = mean_norm(500);
  double n2000 = mean_norm(2000);
  double n8000 = mean_norm(8000);
  CHECK(n500 / n2000 >= 1.0);
  CHECK(n500 / n2000 <= 4.0);
  CHECK(n2000 / n8000 >= 1.0);
  CHECK(n2000 / n8000 <= 4.0);
}

TEST_CASE("validation and failure modes") {
  // q < p.
  StateQuantileFixture fx =
      simulate_state_quantile_forecast(200, vec({0.3, -0.4}), 4);
  AlignedInstruments ai =
      build_instruments(fx.data, parse_recipe("const"), Family::Quantile);
  CHECK_THROWS_AS((void)two_step_estimate(ai.data, ai.w, Family::Quantile,
                                          SpecModel::logistic_linear()),
                  std::invalid_argument);

  // Constant state column leaves the slope unidentified.
  ForecastDataset flat = fx.data;
  for (auto& z : flat.z) z = 1.0;
  InstrumentMatrix w2;
  w2.w = Eigen::MatrixXd::Ones(flat.T(), 2);
  w2.w.col(1) = Eigen::Map<const Eigen::VectorXd>(flat.x.data(),
                                                  flat.T());
  w2.labels = {"const", "forecast"};
  try {
    (void)two_step_estimate(flat, w2, Family::Quantile,
                            SpecModel::logistic_linear());
    FAIL("expected an identification error");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("state") != std::string::npos);
  }

  // Duplicated instrument columns make S singular.
  ForecastDataset ds = iid_quantile_data(300, 0.5, 12);
  InstrumentMatrix wd;
  wd.w = Eigen::MatrixXd::Ones(300, 2);
  wd.labels = {"const", "const"};
  try {
    (void)two_step_estimate(ds, wd, Family::Quantile, SpecModel::constant());
    FAIL("expected a numerical error");
  } catch (const NumericalError& e) {
    CHECK(std::string(e.what()).find("instrument") != std::string::npos);
  }

  // Samples with T_eff under ten observations per parameter carry a warning.
  ForecastDataset small = iid_quantile_data(10, 0.5, 13);
  AlignedInstruments sa =
      build_instruments(small, parse_recipe("const,ferr@1"), Family::Quantile);
  GmmFit fit = two_step_estimate(sa.data, sa.w, Family::Quantile,
                                 SpecModel::constant());
  bool warned = false;
  for (const auto& wmsg : fit.diagnostics.warnings) {
    if (wmsg.find("small sample") != std::string::npos) warned = true;
  }
  CHECK(warned);
}

TEST_CASE("asymptotic covariance scaling") {
  GmmFit fit;
  fit.p = 1;
  fit.q = 1;
  fit.T_eff = 100;
  fit.S = Matrix::Constant(1, 1, 2.0);
  fit.G = Matrix::Constant(1, 1, -0.5);
  fit.Sigma = Matrix::Constant(1, 1, 2.0 / 0.25);  // S / G^2
  Matrix cov = asymptotic_covariance(fit);
  CHECK(cov(0, 0) == doctest::Approx(8.0 / 100.0).epsilon(1e-15));
  fit.T_eff = 200;
  Matrix cov2 = asymptotic_covariance(fit);
  CHECK(cov2(0, 0) == doctest::Approx(0.5 * cov(0, 0)).epsilon(1e-15));
}

TEST_CASE("two-step fits are deterministic") {
  StateQuantileFixture fx =
      simulate_state_quantile_forecast(600, vec({0.3, -0.4}), 3030);
  AlignedInstruments ai = build_instruments(
      fx.data, parse_recipe("const,state,ferr@1"), Family::Quantile);
  GmmFit a = two_step_estimate(ai.data, ai.w, Family::Quantile,
                               SpecModel::logistic_linear());
  GmmFit b = two_step_estimate(ai.data, ai.w, Family::Quantile,
                               SpecModel::logistic_linear());
  CHECK(a.theta[0] == b.theta[0]);
  CHECK(a.theta[1] == b.theta[1]);
  CHECK(a.objective == b.objective);
  CHECK(a.diagnostics.step1_evals == b.diagnostics.step1_evals);
  CHECK(a.diagnostics.step2_evals == b.diagnostics.step2_evals);
}
