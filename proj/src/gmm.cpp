#include "fort/gmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <Eigen/Dense>

#include "fort/errors.hpp"
#include "fort/nelder_mead.hpp"

namespace fort {

HacKernel parse_kernel(const std::string& name) {
  if (name == "bartlett") return HacKernel::Bartlett;
  if (name == "parzen") return HacKernel::Parzen;
  if (name == "qs" || name == "quadratic_spectral") {
    return HacKernel::QuadraticSpectral;
  }
  throw std::invalid_argument("unknown HAC kernel '" + name +
                              "' (expected bartlett, parzen or qs)");
}

const char* kernel_name(HacKernel kernel) {
  switch (kernel) {
    case HacKernel::Bartlett:
      return "bartlett";
    case HacKernel::Parzen:
      return "parzen";
    case HacKernel::QuadraticSpectral:
      return "quadratic_spectral";
  }
  return "?";
}

int HacConfig::resolve_bandwidth(long T) const {
  if (bandwidth >= 0) {
    if (bandwidth >= T) {
      throw std::invalid_argument("hac bandwidth " +
                                  std::to_string(bandwidth) +
                                  " must be smaller than T = " +
                                  std::to_string(T));
    }
    return bandwidth;
  }
  // Standard automatic truncation rule.
  auto h = static_cast<long>(std::floor(4.0 * std::pow(
      static_cast<double>(T) / 100.0, 2.0 / 9.0)));
  h = std::clamp<long>(h, 0, T - 1);
  return static_cast<int>(h);
}

namespace {

constexpr double kCondLimit = 1e12;

double kernel_weight(HacKernel kernel, double u) {
  switch (kernel) {
    case HacKernel::Bartlett:
      return 1.0 - u;
    case HacKernel::Parzen:
      if (u <= 0.5) return 1.0 - 6.0 * u * u + 6.0 * u * u * u;
      return 2.0 * (1.0 - u) * (1.0 - u) * (1.0 - u);
    case HacKernel::QuadraticSpectral: {
      double x = 1.2 * M_PI * u;
      return 25.0 / (12.0 * M_PI * M_PI * u * u) *
             (std::sin(x) / x - std::cos(x));
    }
  }
  return 0.0;
}

bool lex_less(const Vector& a, const Vector& b) {
  for (long i = 0; i < a.size(); ++i) {
    if (a[i] != b[i]) return a[i] < b[i];
  }
  return false;
}

// Moment evaluation with preallocated workspaces; the optimizer calls this
// tens of thousands of times per fit, so the per-call path allocates
// nothing.
class MomentEvaluator {
 public:
  MomentEvaluator(const ForecastDataset& ds, const InstrumentMatrix& w,
                  Family family, const SpecModel& model)
      : ds_(ds),
        w_(w),
        family_(family),
        model_(model),
        T_(ds.T()),
        v_(T_),
        mean_(w.q()),
        tmp_(w.q()) {}

  long T() const { return T_; }
  long q() const { return w_.q(); }

  void mean_moments(const Vector& theta, Vector& out) const {
    for (long i = 0; i < T_; ++i) {
      auto s = static_cast<size_t>(i);
      double m = model_.level(ds_.z[s], theta);
      v_[i] = identification(family_, ds_.x[s], ds_.y[s], m);
    }
    out.noalias() = w_.w.transpose() * v_;
    out /= static_cast<double>(T_);
  }

  double objective_identity(const Vector& theta) const {
    mean_moments(theta, mean_);
    return mean_.squaredNorm();
  }

  double objective_weighted(const Vector& theta, const Matrix& winv) const {
    mean_moments(theta, mean_);
    tmp_.noalias() = winv * mean_;
    return mean_.dot(tmp_);
  }

 private:
  const ForecastDataset& ds_;
  const InstrumentMatrix& w_;
  Family family_;
  const SpecModel& model_;
  long T_;
  mutable Vector v_;
  mutable Vector mean_;
  mutable Vector tmp_;
};

struct SymEig {
  Matrix vectors;
  Vector raw;      // eigenvalues before flooring
  Vector floored;  // eigenvalues after flooring
  bool floor_bound = false;

  double raw_condition() const {
    double lo = raw.minCoeff();
    double hi = raw.maxCoeff();
    if (lo <= 0.0) return std::numeric_limits<double>::infinity();
    return hi / lo;
  }

  Matrix inverse() const {
    return vectors * floored.cwiseInverse().asDiagonal() *
           vectors.transpose();
  }
};

// Symmetrize, eigendecompose, floor eigenvalues at 1e-12 * trace.
SymEig analyze_covariance(Matrix& S) {
  S = 0.5 * (S + S.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Matrix> es(S);
  if (es.info() != Eigen::Success) {
    throw NumericalError("hac_covariance: eigendecomposition failed");
  }
  SymEig eig;
  eig.vectors = es.eigenvectors();
  eig.raw = es.eigenvalues();
  eig.floored = eig.raw;
  double floor_val = 1e-12 * S.trace();
  if (floor_val > 0.0) {
    for (long i = 0; i < eig.floored.size(); ++i) {
      if (eig.floored[i] < floor_val) {
        eig.floored[i] = floor_val;
        eig.floor_bound = true;
      }
    }
  }
  if (eig.floor_bound) {
    S = eig.vectors * eig.floored.asDiagonal() * eig.vectors.transpose();
    S = 0.5 * (S + S.transpose()).eval();
  }
  return eig;
}

Matrix hac_raw(const MomentSeries& ms, const HacConfig& cfg) {
  const long T = ms.g.rows();
  const long q = ms.g.cols();
  if (T < 1) throw std::invalid_argument("hac_covariance: empty series");
  const int h = cfg.resolve_bandwidth(T);

  Matrix gc = ms.g;
  gc.rowwise() -= ms.mean.transpose();

  // Hand-rolled accumulation in a fixed order (t outer) so results are
  // bit-reproducible and easy to cross-check against a plain loop.
  Matrix S = Matrix::Zero(q, q);
  for (long t = 0; t < T; ++t) {
    for (long i = 0; i < q; ++i) {
      for (long j = 0; j < q; ++j) {
        S(i, j) += gc(t, i) * gc(t, j);
      }
    }
  }
  S /= static_cast<double>(T);

  Matrix cj(q, q);
  for (int lag = 1; lag <= h; ++lag) {
    cj.setZero();
    for (long t = lag; t < T; ++t) {
      for (long i = 0; i < q; ++i) {
        for (long j = 0; j < q; ++j) {
          cj(i, j) += gc(t, i) * gc(t - lag, j);
        }
      }
    }
    cj /= static_cast<double>(T);
    double k = kernel_weight(cfg.kernel,
                             static_cast<double>(lag) / (h + 1.0));
    S += k * (cj + cj.transpose());
  }
  return S;
}

struct Candidate {
  Vector x;
  double value = 0.0;
};

// Objective within relative 1e-12 of the best counts as a tie; ties go to
// the smallest parameter norm, then lexicographic order.
Candidate pick_best(const std::vector<Candidate>& candidates) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& c : candidates) best = std::min(best, c.value);
  double tol = 1e-12 * std::max(1.0, std::fabs(best));
  const Candidate* chosen = nullptr;
  for (const auto& c : candidates) {
    if (c.value > best + tol) continue;
    if (chosen == nullptr) {
      chosen = &c;
      continue;
    }
    double na = c.x.norm(), nb = chosen->x.norm();
    if (na < nb || (na == nb && lex_less(c.x, chosen->x))) chosen = &c;
  }
  return *chosen;
}

std::vector<Vector> lattice_starts(const SpecModel& model,
                                   const OptimizerConfig& opt,
                                   const Vector& lower, const Vector& upper) {
  const int p = model.p();
  std::vector<std::vector<double>> axis(static_cast<size_t>(p));
  for (int d = 0; d < p; ++d) {
    axis[static_cast<size_t>(d)] = {-opt.lattice_spacing, 0.0,
                                    opt.lattice_spacing};
  }
  if (model.kind() == ModelKind::Seasonal) {
    // The objective is multi-modal in the period; seed a geometric grid
    // across the admissible range instead of the generic lattice.
    std::vector<double> periods;
    for (double period = 4.0; period <= upper[2]; period *= 2.0) {
      periods.push_back(period);
    }
    if (periods.empty()) periods.push_back(lower[2]);
    axis[2] = periods;
  }
  std::vector<Vector> starts;
  std::vector<size_t> idx(static_cast<size_t>(p), 0);
  while (true) {
    Vector v(p);
    for (int d = 0; d < p; ++d) {
      v[d] = axis[static_cast<size_t>(d)][idx[static_cast<size_t>(d)]];
      v[d] = std::clamp(v[d], lower[d], upper[d]);
    }
    starts.push_back(v);
    int d = 0;
    for (; d < p; ++d) {
      auto ds = static_cast<size_t>(d);
      if (++idx[ds] < axis[ds].size()) break;
      idx[ds] = 0;
    }
    if (d == p) break;
  }
  return starts;
}

struct MultiStartOutcome {
  Candidate best;
  long evals = 0;
  int starts = 0;
  bool any_converged = false;
};

MultiStartOutcome multi_start(const Objective& objective,
                              const std::vector<Vector>& starts,
                              const Vector& lower, const Vector& upper,
                              const OptimizerConfig& opt) {
  NelderMeadOptions nm;
  nm.diameter_tol = opt.diameter_tol;
  nm.max_evals = opt.max_evals_per_start;
  nm.step = opt.simplex_step;

  std::vector<Candidate> candidates;
  MultiStartOutcome out;
  for (const auto& start : starts) {
    NelderMeadResult r = nelder_mead(objective, start, nm);
    // Park the solution inside the box and score it without the penalty
    // term so ties compare true objective values.
    Vector clamped = r.x.cwiseMax(lower).cwiseMin(upper);
    candidates.push_back({clamped, objective(clamped)});
    out.evals += r.evals + 1;
    out.any_converged = out.any_converged || r.converged;
    ++out.starts;
  }
  out.best = pick_best(candidates);
  return out;
}

}  // namespace

MomentSeries moment_series(const ForecastDataset& ds,
                           const InstrumentMatrix& w, Family family,
                           const SpecModel& model, const Vector& theta) {
  ds.validate();
  if (ds.T() != w.rows()) {
    throw std::invalid_argument(
        "moment_series: dataset and instrument matrix are not row-aligned");
  }
  MomentSeries ms;
  ms.g.resize(ds.T(), w.q());
  for (long i = 0; i < ds.T(); ++i) {
    auto s = static_cast<size_t>(i);
    double m = model.level(ds.z[s], theta);
    double v = identification(family, ds.x[s], ds.y[s], m);
    ms.g.row(i) = v * w.w.row(i);
  }
  ms.mean = ms.g.colwise().mean();
  return ms;
}

Matrix moment_jacobian(const ForecastDataset& ds, const InstrumentMatrix& w,
                       Family family, const SpecModel& model,
                       const Vector& theta) {
  ds.validate();
  if (ds.T() != w.rows()) {
    throw std::invalid_argument(
        "moment_jacobian: dataset and instrument matrix are not row-aligned");
  }
  const long q = w.q();
  const int p = model.p();
  Matrix G = Matrix::Zero(q, p);
  Vector grad(p);
  for (long i = 0; i < ds.T(); ++i) {
    auto s = static_cast<size_t>(i);
    double m = model.level(ds.z[s], theta);
    double dv = identification_level_derivative(family, ds.x[s], ds.y[s], m);
    model.level_gradient(ds.z[s], theta, grad);
    G.noalias() += dv * w.w.row(i).transpose() * grad.transpose();
  }
  G /= static_cast<double>(ds.T());
  return G;
}

Matrix hac_covariance(const MomentSeries& ms, const HacConfig& cfg) {
  Matrix S = hac_raw(ms, cfg);
  analyze_covariance(S);
  return S;
}

GmmFit two_step_estimate(const ForecastDataset& ds, const InstrumentMatrix& w,
                         Family family, const SpecModel& model,
                         const OptimizerConfig& opt, const HacConfig& hac) {
  ds.validate();
  if (ds.T() != w.rows()) {
    throw std::invalid_argument(
        "two_step_estimate: dataset and instrument matrix are not aligned");
  }
  const long q = w.q();
  const int p = model.p();
  if (q < p) {
    throw std::invalid_argument(
        "two_step_estimate: q = " + std::to_string(q) + " instruments make " +
        std::to_string(p) + " parameters unidentified (need q >= p)");
  }
  if (model.kind() == ModelKind::LogisticLinear) {
    auto [zmin, zmax] = std::minmax_element(ds.z.begin(), ds.z.end());
    if (*zmin == *zmax) {
      throw std::invalid_argument(
          "two_step_estimate: state column is constant, the slope of the "
          "logistic_linear model is not identified");
    }
  }

  GmmFit fit;
  fit.T_eff = ds.T();
  fit.q = q;
  fit.p = p;
  fit.family = family;
  if (fit.T_eff < 10L * p) {
    fit.diagnostics.warnings.push_back(
        "small sample: T_eff = " + std::to_string(fit.T_eff) + " is below 10*p");
  }

  const MomentEvaluator ev(ds, w, family, model);
  Vector lower, upper;
  model.parameter_box(static_cast<double>(ds.T()), lower, upper);

  auto boxed = [&](const auto& base) {
    return [&, base](const Vector& theta) {
      Vector clamped = theta.cwiseMax(lower).cwiseMin(upper);
      double excess = (theta - clamped).cwiseAbs().sum();
      double value = base(clamped);
      if (excess > 0.0) value += 1e6 * excess * (1.0 + excess);
      return value;
    };
  };

  // Step 1: identity weight.
  std::vector<Vector> starts = lattice_starts(model, opt, lower, upper);
  auto identity_obj = boxed(
      [&](const Vector& theta) { return ev.objective_identity(theta); });
  MultiStartOutcome step1 = multi_start(identity_obj, starts, lower, upper, opt);
  if (!step1.any_converged) {
    throw NumericalError(
        "two_step_estimate: step-1 optimizer exhausted its evaluation budget "
        "without converging from any start");
  }
  fit.diagnostics.step1_objective = step1.best.value;
  fit.diagnostics.step1_evals = step1.evals;
  fit.diagnostics.step1_starts = step1.starts;
  const Vector theta1 = step1.best.x;
  fit.diagnostics.step1_theta = theta1;

  // HAC weight at the step-1 solution.
  MomentSeries ms1 = moment_series(ds, w, family, model, theta1);
  Matrix S1 = hac_raw(ms1, hac);
  SymEig eig1 = analyze_covariance(S1);
  fit.diagnostics.weight_condition = eig1.raw_condition();
  if (!(fit.diagnostics.weight_condition < kCondLimit)) {
    throw NumericalError(
        "two_step_estimate: moment covariance is numerically singular "
        "(condition number above 1e12); drop or replace collinear "
        "instruments");
  }
  const Matrix w1inv = eig1.inverse();

  // Step 2: weighted objective, warm-started from the step-1 solution.
  starts.push_back(theta1);
  auto weighted_obj = boxed([&](const Vector& theta) {
    return ev.objective_weighted(theta, w1inv);
  });
  MultiStartOutcome step2 = multi_start(weighted_obj, starts, lower, upper, opt);
  if (!step2.any_converged) {
    throw NumericalError(
        "two_step_estimate: step-2 optimizer exhausted its evaluation budget "
        "without converging from any start");
  }
  fit.theta = step2.best.x;
  fit.objective = step2.best.value;
  fit.diagnostics.step2_objective = step2.best.value;
  fit.diagnostics.step2_evals = step2.evals;
  fit.diagnostics.step2_starts = step2.starts;

  // Final quantities, all at the step-2 solution.
  MomentSeries ms = moment_series(ds, w, family, model, fit.theta);
  fit.g_mean = ms.mean;
  Matrix S = hac_raw(ms, hac);
  SymEig eig = analyze_covariance(S);
  fit.diagnostics.final_condition = eig.raw_condition();
  if (!(fit.diagnostics.final_condition < kCondLimit)) {
    throw NumericalError(
        "two_step_estimate: moment covariance at the solution is numerically "
        "singular (condition number above 1e12); drop or replace collinear "
        "instruments");
  }
  fit.S = S;
  fit.G = moment_jacobian(ds, w, family, model, fit.theta);

  Eigen::ColPivHouseholderQR<Matrix> qr(fit.G);
  if (qr.rank() < p) {
    std::string which;
    const auto& perm = qr.colsPermutation().indices();
    for (long i = qr.rank(); i < p; ++i) {
      if (!which.empty()) which += ", ";
      which += "theta" + std::to_string(perm[i] + 1);
    }
    throw NumericalError(
        "two_step_estimate: moment Jacobian G is rank deficient (rank " +
        std::to_string(qr.rank()) + " < " + std::to_string(p) +
        "); parameters " + which + " are not identified by these instruments");
  }

  const Matrix sinv = eig.inverse();
  Matrix a = fit.G.transpose() * sinv * fit.G;
  a = 0.5 * (a + a.transpose()).eval();
  fit.Sigma = a.inverse();
  fit.Sigma = 0.5 * (fit.Sigma + fit.Sigma.transpose()).eval();
  return fit;
}

Matrix asymptotic_covariance(const GmmFit& fit) {
  if (fit.Sigma.rows() != fit.p) {
    throw std::invalid_argument("asymptotic_covariance: incomplete fit");
  }
  return fit.Sigma / static_cast<double>(fit.T_eff);
}

}  // namespace fort
