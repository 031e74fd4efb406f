#include "fort/inference.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "fort/errors.hpp"
#include "fort/functionals.hpp"

namespace fort {

namespace {

void attach_small_sample_warning(TestResult& result, const GmmFit& fit) {
  if (fit.T_eff < 30L * fit.p) {
    result.warnings.push_back(
        "T_eff = " + std::to_string(fit.T_eff) +
        " is below 30*p; chi-square asymptotics may be unreliable");
  }
}

}  // namespace

std::string test_result_to_json(const TestResult& result) {
  nlohmann::json j;
  j["kind"] = result.kind;
  j["statistic"] = result.statistic;
  j["df"] = result.df;
  j["p_value"] = result.p_value;
  j["T_eff"] = result.T_eff;
  if (!result.warnings.empty()) j["warnings"] = result.warnings;
  return j.dump(2);
}

TestResult j_test(const GmmFit& fit) {
  if (fit.q == fit.p) {
    throw std::invalid_argument(
        "exactly identified: J-test undefined (df = 0)");
  }
  if (fit.q < fit.p || fit.g_mean.size() != fit.q) {
    throw std::invalid_argument("j_test: incomplete fit");
  }
  TestResult result;
  result.kind = "J";
  result.T_eff = fit.T_eff;
  result.df = static_cast<int>(fit.q - fit.p);
  Eigen::LDLT<Matrix> ldlt(fit.S);
  if (ldlt.info() != Eigen::Success) {
    throw NumericalError("j_test: moment covariance is not invertible");
  }
  double quad = fit.g_mean.dot(ldlt.solve(fit.g_mean));
  result.statistic = std::max(0.0, static_cast<double>(fit.T_eff) * quad);
  result.p_value = chi2_survival(result.statistic, result.df);
  attach_small_sample_warning(result, fit);
  return result;
}

Restriction zero_slope_restriction() {
  Restriction r;
  r.name = "zero_slope";
  r.l = 1;
  r.value = [](const Vector& theta) {
    if (theta.size() < 2) {
      throw std::invalid_argument(
          "zero_slope restriction needs at least 2 parameters");
    }
    Vector v(1);
    v[0] = theta[1];
    return v;
  };
  r.jacobian = [](const Vector& theta) {
    if (theta.size() < 2) {
      throw std::invalid_argument(
          "zero_slope restriction needs at least 2 parameters");
    }
    Matrix jac = Matrix::Zero(1, theta.size());
    jac(0, 1) = 1.0;
    return jac;
  };
  return r;
}

Restriction no_break_restriction() {
  Restriction r;
  r.name = "no_break";
  r.l = 1;
  r.value = [](const Vector& theta) {
    if (theta.size() != 2) {
      throw std::invalid_argument("no_break restriction expects 2 parameters");
    }
    Vector v(1);
    v[0] = theta[0] - theta[1];
    return v;
  };
  r.jacobian = [](const Vector& theta) {
    if (theta.size() != 2) {
      throw std::invalid_argument("no_break restriction expects 2 parameters");
    }
    Matrix jac(1, 2);
    jac(0, 0) = 1.0;
    jac(0, 1) = -1.0;
    return jac;
  };
  return r;
}

Restriction restriction_by_name(const std::string& name) {
  if (name == "zero_slope") return zero_slope_restriction();
  if (name == "no_break") return no_break_restriction();
  throw std::invalid_argument("unknown restriction '" + name +
                              "' (built-ins: zero_slope, no_break)");
}

TestResult wald_test(const GmmFit& fit, const Restriction& restriction) {
  if (restriction.l > fit.p) {
    throw std::invalid_argument(
        "wald_test: more restrictions than parameters (l > p)");
  }
  Vector r = restriction.value(fit.theta);
  Matrix rg = restriction.jacobian(fit.theta);
  if (r.size() != restriction.l || rg.rows() != restriction.l ||
      rg.cols() != fit.p) {
    throw std::invalid_argument("wald_test: restriction shape mismatch");
  }

  Matrix cov = asymptotic_covariance(fit);
  Matrix middle = rg * cov * rg.transpose();
  middle = 0.5 * (middle + middle.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Matrix> es(middle);
  if (es.info() != Eigen::Success || es.eigenvalues().minCoeff() <= 0.0 ||
      es.eigenvalues().maxCoeff() / es.eigenvalues().minCoeff() > 1e12) {
    throw NumericalError(
        "wald_test: restriction covariance R_grad Sigma R_grad' is singular");
  }
  Matrix minv = es.eigenvectors() *
                es.eigenvalues().cwiseInverse().asDiagonal() *
                es.eigenvectors().transpose();

  TestResult result;
  result.kind = "Wald";
  result.T_eff = fit.T_eff;
  result.df = static_cast<int>(restriction.l);
  result.statistic = std::max(0.0, r.dot(minv * r));
  result.p_value = chi2_survival(result.statistic, result.df);
  attach_small_sample_warning(result, fit);
  return result;
}

LevelBand level_confidence_band(const GmmFit& fit, const SpecModel& model,
                                const std::vector<double>& z_grid,
                                double confidence) {
  if (!(confidence > 0.0 && confidence < 1.0)) {
    throw std::invalid_argument(
        "level_confidence_band: confidence must lie in (0,1)");
  }
  if (z_grid.empty()) {
    throw std::invalid_argument("level_confidence_band: empty grid");
  }
  if (fit.theta.size() != model.p()) {
    throw std::invalid_argument(
        "level_confidence_band: fit and model disagree on parameter count");
  }
  // Links are strictly increasing by construction; keep a defensive check
  // so a broken custom link cannot silently flip the band.
  if (!(link_value(model.link(), -1.0) < link_value(model.link(), 1.0))) {
    throw NumericalError("level_confidence_band: link is not increasing");
  }

  const Matrix cov = asymptotic_covariance(fit);
  const double zq = normal_quantile(0.5 * (1.0 + confidence));

  LevelBand band;
  band.confidence = confidence;
  band.z_grid = z_grid;
  Vector c(model.p());
  for (double z : z_grid) {
    double eta = model.link_argument(z, fit.theta);
    model.link_argument_gradient(z, fit.theta, c);
    double var = c.dot(cov * c);
    double half = zq * std::sqrt(std::max(var, 0.0));
    band.level_hat.push_back(model.level(z, fit.theta));
    band.lower.push_back(clamp_level(link_value(model.link(), eta - half)));
    band.upper.push_back(clamp_level(link_value(model.link(), eta + half)));
  }
  return band;
}

}  // namespace fort
