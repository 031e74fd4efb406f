#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "fort/dataset.hpp"
#include "fort/functionals.hpp"
#include "fort/instruments.hpp"
#include "fort/spec_models.hpp"

namespace fort {

// Per-row moments g_t = V(x_t, y_t; m(z_t, theta)) * w_t and their mean.
// The dataset and instrument matrix must already be row-aligned (see
// build_instruments).
struct MomentSeries {
  Matrix g;     // T_eff x q
  Vector mean;  // q
};

enum class HacKernel { Bartlett, Parzen, QuadraticSpectral };

HacKernel parse_kernel(const std::string& name);
const char* kernel_name(HacKernel kernel);

struct HacConfig {
  HacKernel kernel = HacKernel::Bartlett;
  // Truncation lag; negative means the automatic rule
  // floor(4 * (T/100)^(2/9)).
  int bandwidth = -1;

  int resolve_bandwidth(long T) const;
};

struct OptimizerConfig {
  double diameter_tol = 1e-9;
  long max_evals_per_start = 10000;
  // Multi-start lattice per coordinate: {-spacing, 0, +spacing}.
  double lattice_spacing = 2.0;
  double simplex_step = 1.0;
};

struct GmmDiagnostics {
  Vector step1_theta;
  double step1_objective = 0.0;
  double step2_objective = 0.0;
  long step1_evals = 0;
  long step2_evals = 0;
  int step1_starts = 0;
  int step2_starts = 0;
  // Condition numbers of the HAC matrix before the eigenvalue floor.
  double weight_condition = 0.0;
  double final_condition = 0.0;
  std::vector<std::string> warnings;
};

// Result of the two-step estimation. S and G are evaluated at theta, and
// Sigma = (G' S^-1 G)^-1 is the asymptotic covariance of sqrt(T)(theta_hat
// - theta0); divide by T_eff for the covariance of theta_hat itself.
struct GmmFit {
  Vector theta;
  Matrix S;
  Matrix G;
  Matrix Sigma;
  Vector g_mean;
  double objective = 0.0;  // step-2 objective at theta
  long T_eff = 0;
  long q = 0;
  long p = 0;
  Family family = Family::Quantile;
  GmmDiagnostics diagnostics;
};

MomentSeries moment_series(const ForecastDataset& ds,
                           const InstrumentMatrix& w, Family family,
                           const SpecModel& model, const Vector& theta);

// G_T = (1/T) sum_t dV/dtau(x_t, y_t) * w_t * level_gradient(z_t, theta)',
// the q x p Jacobian of the mean moment in theta.
Matrix moment_jacobian(const ForecastDataset& ds, const InstrumentMatrix& w,
                       Family family, const SpecModel& model,
                       const Vector& theta);

// Kernel-weighted long-run covariance of the moment series:
//   S = C0 + sum_{j=1..h} k(j/(h+1)) (Cj + Cj'),
// autocovariances taken about the sample mean of g. The result is
// symmetrized and its eigenvalues floored at 1e-12 * trace.
Matrix hac_covariance(const MomentSeries& ms, const HacConfig& cfg);

// Two-step estimation: step 1 minimizes g'g, step 2 re-minimizes
// g' S(theta1)^-1 g with the HAC weight from step 1. Both steps run a
// deterministic multi-start simplex over the parameter box; ties are broken
// by objective, then by smallest parameter norm, then lexicographically.
GmmFit two_step_estimate(const ForecastDataset& ds, const InstrumentMatrix& w,
                         Family family, const SpecModel& model,
                         const OptimizerConfig& opt = {},
                         const HacConfig& hac = {});

// (G' S^-1 G)^-1 / T_eff.
Matrix asymptotic_covariance(const GmmFit& fit);

}  // namespace fort
