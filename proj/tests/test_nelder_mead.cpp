#include <doctest.h>

#include <cmath>

#include "fort/nelder_mead.hpp"

using namespace fort;

TEST_CASE("quadratic bowl in one dimension") {
  Eigen::VectorXd start(1);
  start[0] = -7.0;
  NelderMeadOptions opt;
  NelderMeadResult res = nelder_mead(
      [](const Eigen::VectorXd& v) { return (v[0] - 3.0) * (v[0] - 3.0); }, start, opt);
  CHECK(res.converged);
  CHECK(std::fabs(res.x[0] - 3.0) <= 1e-6);
  CHECK(res.value <= 1e-12);
  CHECK(res.evals <= opt.max_evals);
}

TEST_CASE("shifted quadratic in four dimensions") {
  Eigen::VectorXd start(4);
  start.setZero();
  auto f = [](const Eigen::VectorXd& v) {
    double s = 0.0;
    for (long i = 0; i < v.size(); ++i) {
      double d = v[i] - (i + 1.0);
      s += (i + 1.0) * d * d;
    }
    return s;
  };
  NelderMeadResult res = nelder_mead(f, start, NelderMeadOptions{});
  CHECK(res.converged);
  for (long i = 0; i < 4; ++i) {
    CHECK(std::fabs(res.x[i] - (i + 1.0)) <= 1e-5);
  }
}

TEST_CASE("rosenbrock valley") {
  Eigen::VectorXd start(2);
  start[0] = -1.2;
  start[1] = 1.0;
  auto f = [](const Eigen::VectorXd& v) {
    double a = 1.0 - v[0];
    double b = v[1] - v[0] * v[0];
    return a * a + 100.0 * b * b;
  };
  NelderMeadResult res = nelder_mead(f, start, NelderMeadOptions{});
  CHECK(res.converged);
  CHECK(std::fabs(res.x[0] - 1.0) <= 1e-4);
  CHECK(std::fabs(res.x[1] - 1.0) <= 1e-4);
}

TEST_CASE("nonsmooth objective (absolute value)") {
  Eigen::VectorXd start(2);
  start[0] = 4.0;
  start[1] = -3.0;
  auto f = [](const Eigen::VectorXd& v) {
    return std::fabs(v[0] - 0.5) + 2.0 * std::fabs(v[1] + 1.5);
  };
  NelderMeadResult res = nelder_mead(f, start, NelderMeadOptions{});
  CHECK(std::fabs(res.x[0] - 0.5) <= 1e-5);
  CHECK(std::fabs(res.x[1] + 1.5) <= 1e-5);
}

TEST_CASE("determinism: identical inputs give identical trajectories") {
  Eigen::VectorXd start(3);
  start[0] = 0.3;
  start[1] = -0.7;
  start[2] = 2.0;
  auto f = [](const Eigen::VectorXd& v) {
    return std::sin(v[0]) * std::sin(v[0]) + v.squaredNorm();
  };
  NelderMeadResult a = nelder_mead(f, start, NelderMeadOptions{});
  NelderMeadResult b = nelder_mead(f, start, NelderMeadOptions{});
  CHECK(a.evals == b.evals);
  CHECK(a.value == b.value);
  for (long i = 0; i < 3; ++i) CHECK(a.x[i] == b.x[i]);
}

TEST_CASE("evaluation budget is respected") {
  Eigen::VectorXd start(2);
  start.setZero();
  NelderMeadOptions opt;
  opt.max_evals = 40;
  long count = 0;
  auto f = [&count](const Eigen::VectorXd& v) {
    ++count;
    return v.squaredNorm();
  };
  NelderMeadResult res = nelder_mead(f, start, opt);
  CHECK(count <= 40);
  CHECK(res.evals == count);
}

TEST_CASE("tight tolerance shrinks the simplex diameter") {
  Eigen::VectorXd start(2);
  start[0] = 5.0;
  start[1] = 5.0;
  NelderMeadOptions opt;
  opt.diameter_tol = 1e-11;
  auto f = [](const Eigen::VectorXd& v) { return v.squaredNorm() + 1.0; };
  NelderMeadResult res = nelder_mead(f, start, opt);
  CHECK(res.converged);
  CHECK(res.value == doctest::Approx(1.0).epsilon(1e-12));
}
