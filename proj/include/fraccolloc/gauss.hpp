#pragma once

// Gauss-Legendre and Gauss-Lobatto node/weight computation on [-1,1] and [0,1].

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <utility>
#include <vector>

namespace fraccolloc::gauss {

/// Legendre polynomial P_n(x) and its derivative, by the three-term recurrence.
inline std::pair<double, double> legendre_with_derivative(int n, double x) {
  if (n == 0) return {1.0, 0.0};
  double p_prev = 1.0;
  double p = x;
  for (int k = 2; k <= n; ++k) {
    const double p_next = ((2.0 * k - 1.0) * x * p - (k - 1.0) * p_prev) / k;
    p_prev = p;
    p = p_next;
  }
  // P_n'(x) = n (x P_n - P_{n-1}) / (x^2 - 1); only used away from +-1.
  const double dp = n * (x * p - p_prev) / (x * x - 1.0);
  return {p, dp};
}

struct Rule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// n-point Gauss-Legendre rule on [-1,1], nodes ascending.
inline Rule legendre(int n) {
  if (n < 1) throw std::invalid_argument("gauss::legendre: n must be >= 1");
  Rule rule{std::vector<double>(n), std::vector<double>(n)};
  for (int i = 0; i < (n + 1) / 2; ++i) {
    // Chebyshev-type initial guess for the i-th largest root.
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      auto [p, d] = legendre_with_derivative(n, x);
      dp = d;
      const double dx = p / d;
      x -= dx;
      if (std::abs(dx) <= 1e-16) break;
    }
    dp = legendre_with_derivative(n, x).second;
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.nodes[i] = -x;
    rule.nodes[n - 1 - i] = x;
    rule.weights[i] = w;
    rule.weights[n - 1 - i] = w;
  }
  if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
  return rule;
}

/// n-point Gauss-Lobatto rule on [-1,1] (n >= 2), endpoints included.
/// Interior nodes are the roots of P'_{n-1}, found by Newton on
/// q(x) = (1 - x^2) P'_{n-1}(x) with Chebyshev-Gauss-Lobatto starting points.
inline Rule lobatto(int n) {
  if (n < 2) throw std::invalid_argument("gauss::lobatto: n must be >= 2");
  const int deg = n - 1;
  Rule rule{std::vector<double>(n), std::vector<double>(n)};
  rule.nodes.front() = -1.0;
  rule.nodes.back() = 1.0;
  for (int i = 1; i < (n + 1) / 2; ++i) {
    double x = -std::cos(std::numbers::pi * i / deg);
    for (int it = 0; it < 100; ++it) {
      auto [p, dp] = legendre_with_derivative(deg, x);
      // (1-x^2) P'' = 2x P' - deg(deg+1) P
      const double d2p = (2.0 * x * dp - deg * (deg + 1.0) * p) / (1.0 - x * x);
      const double dx = dp / d2p;
      x -= dx;
      if (std::abs(dx) <= 1e-16) break;
    }
    rule.nodes[i] = x;
    rule.nodes[n - 1 - i] = -x;
  }
  if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
  for (int i = 0; i < n; ++i) {
    const double p = (i == 0 || i == n - 1) ? 1.0 : legendre_with_derivative(deg, rule.nodes[i]).first;
    rule.weights[i] = 2.0 / (deg * (deg + 1.0) * p * p);
  }
  return rule;
}

/// Affine map of a rule from [-1,1] to [a,b].
inline Rule mapped(const Rule& ref, double a, double b) {
  Rule out = ref;
  const double half = 0.5 * (b - a);
  for (std::size_t i = 0; i < ref.nodes.size(); ++i) {
    out.nodes[i] = a + half * (ref.nodes[i] + 1.0);
    out.weights[i] = half * ref.weights[i];
  }
  return out;
}

}  // namespace fraccolloc::gauss
