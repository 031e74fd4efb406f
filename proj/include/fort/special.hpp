#pragma once

// Scalar special functions shared by the estimation and inference layers.
// Everything here is deterministic and allocation free.

namespace fort {

// Standard normal density.
double norm_pdf(double x);

// Standard normal CDF, computed through erfc so both tails keep full
// relative accuracy.
double norm_cdf(double x);

// Inverse standard normal CDF. Rational initial guess polished with Halley
// steps; absolute error below 1e-10 on (0,1), and the exact endpoints throw
// std::invalid_argument.
double norm_quantile(double p);

// Regularized lower incomplete gamma P(a, x), a > 0, x >= 0.
// Series expansion for x < a + 1, continued fraction otherwise; absolute
// error below 1e-12 over the chi-square range used here.
double gamma_p(double a, double x);

// Regularized upper incomplete gamma Q(a, x) = 1 - P(a, x).
double gamma_q(double a, double x);

// Survival function of a chi-square with df degrees of freedom,
// P[X > x] = Q(df/2, x/2). df must be positive, x negative is clamped to 0.
double chi2_survival(double x, int df);

}  // namespace fort
