#pragma once

// Scalar fractional-calculus primitives: Gamma, the coefficients c_j of the
// Riemann-Liouville integral of monomials, Caputo derivatives of powers and a
// cancellation-free evaluation of Theta^a - (Theta-1)^a.

#include <cmath>
#include <stdexcept>
#include <string>

namespace fraccolloc {

inline double gamma_fn(double x) {
  if (!(x > 0.0)) throw std::domain_error("gamma_fn: argument must be positive, got " + std::to_string(x));
  return std::tgamma(x);
}

/// c_j = Gamma(j+1) / Gamma(j+1+alpha), so that J^alpha t^j = c_j t^(j+alpha).
inline double frac_coeff(int j, double alpha) {
  // lgamma difference keeps large j finite; for j <= 20 both routes agree to ulps.
  if (j <= 20) return gamma_fn(j + 1.0) / gamma_fn(j + 1.0 + alpha);
  return std::exp(std::lgamma(j + 1.0) - std::lgamma(j + 1.0 + alpha));
}

/// J^alpha sigma^j evaluated at sigma = theta on the reference interval.
inline double frac_int_monomial(int j, double alpha, double theta) {
  if (j < 0) throw std::invalid_argument("frac_int_monomial: j must be >= 0");
  if (theta == 0.0) return 0.0;
  return frac_coeff(j, alpha) * std::pow(theta, j + alpha);
}

/// Caputo derivative of t^gamma: coefficient * t^exponent. A zero coefficient
/// means the derivative vanishes (gamma == 0).
struct PowerTerm {
  double coefficient = 0.0;
  double exponent = 0.0;
};

inline PowerTerm caputo_monomial(double gamma, double alpha) {
  if (gamma < 0.0) throw std::domain_error("caputo_monomial: exponent must be >= 0");
  if (gamma == 0.0) return {0.0, 0.0};
  return {gamma_fn(gamma + 1.0) / gamma_fn(gamma + 1.0 - alpha), gamma - alpha};
}

/// (1+d)^alpha - d^alpha for an excess d = Theta - 1 >= 0 known to full precision.
inline double stable_pow_diff_excess(double d, double alpha) {
  if (!(d >= 0.0)) throw std::domain_error("stable_pow_diff: Theta must be >= 1");
  if (d == 0.0) return 1.0;
  const double log_ratio = d < 1.0 ? std::log(d) - std::log1p(d) : std::log1p(-1.0 / (1.0 + d));
  return std::pow(1.0 + d, alpha) * -std::expm1(alpha * log_ratio);
}

/// Theta^alpha - (Theta-1)^alpha for Theta >= 1, evaluated as
/// Theta^alpha * (-expm1(alpha * log1p(-1/Theta))).
/// For Theta < 2 the logarithm is split as log(Theta-1) - log1p(Theta-1), Theta-1 being exact there.
inline double stable_pow_diff(double theta, double alpha) {
  if (!(theta >= 1.0)) throw std::domain_error("stable_pow_diff: Theta must be >= 1");
  if (theta < 2.0) return stable_pow_diff_excess(theta - 1.0, alpha);
  return std::pow(theta, alpha) * -std::expm1(alpha * std::log1p(-1.0 / theta));
}

}  // namespace fraccolloc
