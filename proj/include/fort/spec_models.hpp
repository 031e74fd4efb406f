#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

namespace fort {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Strictly increasing smooth map R -> (0,1) shared by all model variants.
enum class Link { Logistic, Probit };

Link parse_link(const std::string& name);
const char* link_name(Link link);

double link_value(Link link, double u);
double link_derivative(Link link, double u);
// Inverse of the link on (0,1).
double link_inverse(Link link, double m);

// Numerical clamp shared by every level computation: keeps values in
// [1e-8, 1 - 1e-8] so downstream logs and divisions stay finite.
double clamp_level(double m);

enum class ModelKind { Constant, LogisticLinear, StructuralBreak, Seasonal };

// Parametric level map m(s, theta) in (0,1) with analytic gradient.
// The state argument s is the state variable z for Constant/LogisticLinear
// and the time index t for StructuralBreak/Seasonal.
//
// Variants, all routed through the link Psi:
//   Constant        m = Psi(theta1)                              p = 1
//   LogisticLinear  m = Psi(theta1 + s*theta2)                   p = 2
//   StructuralBreak m = Psi(theta2) for s <= t_b, Psi(theta1)    p = 2
//   Seasonal        m = Psi(theta1 + theta2*sin(2*pi*s/theta3))  p = 3
// Seasonal wraps the raw affine-in-sine form in the link so the level is
// guaranteed inside (0,1); theta3 (the period) is kept inside [2, T] by the
// optimizer box.
class SpecModel {
 public:
  static SpecModel constant(Link link = Link::Logistic);
  static SpecModel logistic_linear(Link link = Link::Logistic);
  static SpecModel structural_break(double t_b, Link link = Link::Logistic);
  static SpecModel seasonal(Link link = Link::Logistic);
  static SpecModel from_name(const std::string& name, double t_b = 0.0,
                             Link link = Link::Logistic);

  ModelKind kind() const { return kind_; }
  Link link() const { return link_; }
  int p() const;
  double break_time() const { return t_b_; }
  const char* name() const;

  // Linear predictor eta(s, theta) with m = Psi(eta), and its gradient in
  // theta. Every variant is of this composite form, which is also what the
  // confidence bands operate on.
  double link_argument(double s, const Vector& theta) const;
  void link_argument_gradient(double s, const Vector& theta,
                              Vector& out) const;

  // Level m(s, theta), clamped into (1e-8, 1 - 1e-8).
  double level(double s, const Vector& theta) const;
  // Analytic d m / d theta = Psi'(eta) * d eta / d theta.
  void level_gradient(double s, const Vector& theta, Vector& out) const;
  Vector level_gradient(double s, const Vector& theta) const;

  // Optimization box for theta_i; [-20, 20] everywhere except the seasonal
  // period, which lives in [2, horizon].
  void parameter_box(double horizon, Vector& lower, Vector& upper) const;

 private:
  SpecModel(ModelKind kind, Link link, double t_b)
      : kind_(kind), link_(link), t_b_(t_b) {}
  void check_theta(const Vector& theta) const;

  ModelKind kind_;
  Link link_;
  double t_b_;
};

}  // namespace fort
