#include "fort/spec_models.hpp"

#include <cmath>
#include <stdexcept>

#include "fort/special.hpp"

namespace fort {

namespace {
constexpr double kLevelClamp = 1e-8;
constexpr double kTwoPi = 6.2831853071795864769;
}  // namespace

Link parse_link(const std::string& name) {
  if (name == "logistic") return Link::Logistic;
  if (name == "probit") return Link::Probit;
  throw std::invalid_argument("unknown link '" + name +
                              "' (expected logistic or probit)");
}

const char* link_name(Link link) {
  return link == Link::Logistic ? "logistic" : "probit";
}

double link_value(Link link, double u) {
  if (link == Link::Logistic) return 1.0 / (1.0 + std::exp(-u));
  return norm_cdf(u);
}

double link_derivative(Link link, double u) {
  if (link == Link::Logistic) {
    double p = 1.0 / (1.0 + std::exp(-u));
    return p * (1.0 - p);
  }
  return norm_pdf(u);
}

double link_inverse(Link link, double m) {
  if (!(m > 0.0 && m < 1.0)) {
    throw std::invalid_argument("link_inverse: level must lie in (0,1)");
  }
  if (link == Link::Logistic) return std::log(m / (1.0 - m));
  return norm_quantile(m);
}

double clamp_level(double m) {
  if (m < kLevelClamp) return kLevelClamp;
  if (m > 1.0 - kLevelClamp) return 1.0 - kLevelClamp;
  return m;
}

SpecModel SpecModel::constant(Link link) {
  return SpecModel(ModelKind::Constant, link, 0.0);
}
SpecModel SpecModel::logistic_linear(Link link) {
  return SpecModel(ModelKind::LogisticLinear, link, 0.0);
}
SpecModel SpecModel::structural_break(double t_b, Link link) {
  return SpecModel(ModelKind::StructuralBreak, link, t_b);
}
SpecModel SpecModel::seasonal(Link link) {
  return SpecModel(ModelKind::Seasonal, link, 0.0);
}

SpecModel SpecModel::from_name(const std::string& name, double t_b,
                               Link link) {
  if (name == "constant") return constant(link);
  if (name == "logistic_linear") return logistic_linear(link);
  if (name == "break") return structural_break(t_b, link);
  if (name == "seasonal") return seasonal(link);
  throw std::invalid_argument(
      "unknown model '" + name +
      "' (expected constant, logistic_linear, break or seasonal)");
}

int SpecModel::p() const {
  switch (kind_) {
    case ModelKind::Constant:
      return 1;
    case ModelKind::LogisticLinear:
    case ModelKind::StructuralBreak:
      return 2;
    case ModelKind::Seasonal:
      return 3;
  }
  return 0;
}

const char* SpecModel::name() const {
  switch (kind_) {
    case ModelKind::Constant:
      return "constant";
    case ModelKind::LogisticLinear:
      return "logistic_linear";
    case ModelKind::StructuralBreak:
      return "break";
    case ModelKind::Seasonal:
      return "seasonal";
  }
  return "?";
}

void SpecModel::check_theta(const Vector& theta) const {
  if (theta.size() != p()) {
    throw std::invalid_argument(std::string("model '") + name() +
                                "' expects " + std::to_string(p()) +
                                " parameters, got " +
                                std::to_string(theta.size()));
  }
  if (!theta.allFinite()) {
    throw std::invalid_argument("model parameters must be finite");
  }
  if (kind_ == ModelKind::Seasonal && theta[2] == 0.0) {
    throw std::invalid_argument("seasonal period theta3 must be nonzero");
  }
}

double SpecModel::link_argument(double s, const Vector& theta) const {
  check_theta(theta);
  switch (kind_) {
    case ModelKind::Constant:
      return theta[0];
    case ModelKind::LogisticLinear:
      return theta[0] + s * theta[1];
    case ModelKind::StructuralBreak:
      // Pre-break periods (s <= t_b) carry theta2, post-break theta1.
      return s <= t_b_ ? theta[1] : theta[0];
    case ModelKind::Seasonal:
      return theta[0] + theta[1] * std::sin(kTwoPi * s / theta[2]);
  }
  return 0.0;
}

void SpecModel::link_argument_gradient(double s, const Vector& theta,
                                       Vector& out) const {
  check_theta(theta);
  out.resize(p());
  switch (kind_) {
    case ModelKind::Constant:
      out[0] = 1.0;
      return;
    case ModelKind::LogisticLinear:
      out[0] = 1.0;
      out[1] = s;
      return;
    case ModelKind::StructuralBreak:
      out[0] = s <= t_b_ ? 0.0 : 1.0;
      out[1] = s <= t_b_ ? 1.0 : 0.0;
      return;
    case ModelKind::Seasonal: {
      double w = kTwoPi * s / theta[2];
      out[0] = 1.0;
      out[1] = std::sin(w);
      out[2] = -theta[1] * std::cos(w) * kTwoPi * s / (theta[2] * theta[2]);
      return;
    }
  }
}

double SpecModel::level(double s, const Vector& theta) const {
  return clamp_level(link_value(link_, link_argument(s, theta)));
}

void SpecModel::level_gradient(double s, const Vector& theta,
                               Vector& out) const {
  double dpsi = link_derivative(link_, link_argument(s, theta));
  link_argument_gradient(s, theta, out);
  out *= dpsi;
}

Vector SpecModel::level_gradient(double s, const Vector& theta) const {
  Vector out;
  level_gradient(s, theta, out);
  return out;
}

void SpecModel::parameter_box(double horizon, Vector& lower,
                              Vector& upper) const {
  lower = Vector::Constant(p(), -20.0);
  upper = Vector::Constant(p(), 20.0);
  if (kind_ == ModelKind::Seasonal) {
    lower[2] = 2.0;
    upper[2] = horizon > 2.0 ? horizon : 2.0;
  }
}

}  // namespace fort
