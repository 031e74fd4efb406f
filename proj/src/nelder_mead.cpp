#include "fort/nelder_mead.hpp"

#include <algorithm>
#include <vector>

namespace fort {

namespace {

bool lex_less(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  for (long i = 0; i < a.size(); ++i) {
    if (a[i] != b[i]) return a[i] < b[i];
  }
  return false;
}

}  // namespace

NelderMeadResult nelder_mead(const Objective& f, const Eigen::VectorXd& start,
                             const NelderMeadOptions& options) {
  const long n = start.size();
  struct Vertex {
    Eigen::VectorXd x;
    double fx;
  };
  std::vector<Vertex> simplex;
  simplex.reserve(static_cast<size_t>(n) + 1);

  long evals = 0;
  auto eval = [&](const Eigen::VectorXd& x) {
    ++evals;
    return f(x);
  };

  simplex.push_back({start, eval(start)});
  for (long i = 0; i < n; ++i) {
    Eigen::VectorXd v = start;
    v[i] += options.step;
    simplex.push_back({v, eval(v)});
  }

  auto order = [&]() {
    std::sort(simplex.begin(), simplex.end(),
              [](const Vertex& a, const Vertex& b) {
                if (a.fx != b.fx) return a.fx < b.fx;
                return lex_less(a.x, b.x);
              });
  };
  order();

  NelderMeadResult result;
  while (true) {
    double diameter = 0.0;
    for (long i = 1; i <= n; ++i) {
      diameter = std::max(
          diameter, (simplex[static_cast<size_t>(i)].x - simplex[0].x)
                        .cwiseAbs()
                        .maxCoeff());
    }
    if (diameter < options.diameter_tol) {
      result.converged = true;
      break;
    }
    // One iteration costs at most n + 2 evaluations (reflect, contract,
    // shrink); stop while the budget still covers the worst case.
    if (evals + n + 2 > options.max_evals) break;

    // Centroid of all but the worst vertex.
    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
    for (long i = 0; i < n; ++i) centroid += simplex[static_cast<size_t>(i)].x;
    centroid /= static_cast<double>(n);
    Vertex& worst = simplex[static_cast<size_t>(n)];

    Eigen::VectorXd xr = centroid + (centroid - worst.x);
    double fr = eval(xr);
    if (fr < simplex[0].fx) {
      Eigen::VectorXd xe = centroid + 2.0 * (centroid - worst.x);
      double fe = eval(xe);
      if (fe < fr) {
        worst = {xe, fe};
      } else {
        worst = {xr, fr};
      }
    } else if (fr < simplex[static_cast<size_t>(n - 1)].fx) {
      worst = {xr, fr};
    } else {
      bool outside = fr < worst.fx;
      Eigen::VectorXd xc;
      if (outside) {
        xc = centroid + 0.5 * (xr - centroid);
      } else {
        xc = centroid - 0.5 * (centroid - worst.x);
      }
      double fc = eval(xc);
      if (fc < (outside ? fr : worst.fx)) {
        worst = {xc, fc};
      } else {
        // Shrink toward the best vertex.
        for (long i = 1; i <= n; ++i) {
          auto& v = simplex[static_cast<size_t>(i)];
          v.x = simplex[0].x + 0.5 * (v.x - simplex[0].x);
          v.fx = eval(v.x);
        }
      }
    }
    order();
  }

  result.x = simplex[0].x;
  result.value = simplex[0].fx;
  result.evals = evals;
  return result;
}

}  // namespace fort
