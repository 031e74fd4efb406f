#pragma once

#include <functional>

#include <Eigen/Core>

namespace fort {

using Objective = std::function<double(const Eigen::VectorXd&)>;

struct NelderMeadOptions {
  // Converged when every vertex is within this distance (inf norm) of the
  // best vertex.
  double diameter_tol = 1e-9;
  long max_evals = 10000;
  // Initial simplex edge length per coordinate.
  double step = 1.0;
};

struct NelderMeadResult {
  Eigen::VectorXd x;
  double value = 0.0;
  long evals = 0;
  bool converged = false;
};

// Plain Nelder-Mead simplex (reflection 1, expansion 2, contraction 0.5,
// shrink 0.5). Fully deterministic: vertex ordering breaks ties
// lexicographically, so identical inputs give identical iterates on any
// platform with IEEE doubles.
NelderMeadResult nelder_mead(const Objective& f, const Eigen::VectorXd& start,
                             const NelderMeadOptions& options);

}  // namespace fort
