#pragma once

// Riemann-Liouville integrals J^alpha of piecewise polynomials stored in the
// local monomial basis. The current interval is handled by the closed form
// J^alpha sigma^j = c_j sigma^(j+alpha); past intervals split the polynomial
// as p(1) - (p(1) - p(sigma)) so the constant part becomes a stable power
// difference and the remainder integrand is free of singularities.

#include <Eigen/Dense>
#include <boost/math/special_functions/beta.hpp>

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "fraccolloc/colloc_core.hpp"
#include "fraccolloc/fractional.hpp"
#include "fraccolloc/gauss.hpp"

namespace fraccolloc {

/// Precomputed data for evaluating J^alpha of degree-m monomial blocks.
class HistoryKernel {
 public:
  /// quad_order <= 0 selects the default max(12, m + 6).
  HistoryKernel(double alpha, int degree, int quad_order = 0)
      : alpha_(alpha), degree_(degree), quad_order_(quad_order > 0 ? quad_order : std::max(12, degree + 6)) {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("HistoryKernel: alpha must lie in (0,1]");
    if (degree < 0) throw std::invalid_argument("HistoryKernel: degree must be >= 0");
    if (quad_order_ < degree_ + 1) throw std::invalid_argument("HistoryKernel: quad_order must be >= m+1");
    inv_gamma_alpha_ = 1.0 / gamma_fn(alpha);
    coeff_.resize(degree + 1);
    for (int j = 0; j <= degree; ++j) coeff_[j] = frac_coeff(j, alpha);
    const auto rule = gauss::mapped(gauss::legendre(quad_order_), 0.0, 1.0);
    nodes_ = rule.nodes;
    weights_ = rule.weights;
  }

  double alpha() const { return alpha_; }
  int degree() const { return degree_; }
  int quad_order() const { return quad_order_; }
  double inv_gamma_alpha() const { return inv_gamma_alpha_; }
  std::span<const double> coefficients() const { return coeff_; }

  /// g_j = int_0^1 (Theta - sigma)^(alpha-1) sigma^j dsigma for Theta = 1 + excess, j = 0..m.
  void history_weights(double excess, std::span<double> g) const {
    if (!(excess >= 0.0)) throw std::domain_error("history_weights: Theta must exceed 1");
    const double head = stable_pow_diff_excess(excess, alpha_) / alpha_;
    std::fill(g.begin(), g.begin() + degree_ + 1, head);
    if (degree_ == 0 || alpha_ == 1.0) {
      if (alpha_ == 1.0) {
        for (int j = 1; j <= degree_; ++j) g[j] = 1.0 / (j + 1.0);
      }
      return;
    }
    // Remainder int (Theta-sigma)^(alpha-1) (sigma^j - 1) in s = 1 - sigma; the kernel
    // (d + s)^(alpha-1) is analytic on [0,1] with its singularity at s = -d. Panels
    // [a, 2a + d] keep the singularity one panel length away from each panel.
    const double d = std::max(excess, 1e-15);
    const double am1 = alpha_ - 1.0;
    double a = 0.0;
    while (a < 1.0) {
      double b = d >= 1.0 ? 1.0 : std::min(1.0, 2.0 * a + d);
      if (b > 0.75 && b < 1.0 && (1.0 - b) < 0.5 * (b - a)) b = 1.0;
      const double len = b - a;
      for (int q = 0; q < quad_order_; ++q) {
        const double s = a + len * nodes_[q];
        const double sigma = 1.0 - s;
        const double kern = weights_[q] * len * std::pow(d + s, am1) * s;
        // sigma^j - 1 = -s * (1 + sigma + ... + sigma^(j-1))
        double geo = 0.0;
        double p = 1.0;
        for (int j = 1; j <= degree_; ++j) {
          geo += p;
          p *= sigma;
          g[j] -= kern * geo;
        }
      }
      a = b;
    }
  }

  /// Local weights c_j sigma^(j+alpha), j = 0..m, for a point inside the current interval.
  void local_weights(double sigma, std::span<double> g) const {
    if (sigma == 0.0) {
      std::fill(g.begin(), g.begin() + degree_ + 1, 0.0);
      return;
    }
    double p = std::pow(sigma, alpha_);
    for (int j = 0; j <= degree_; ++j, p *= sigma) g[j] = coeff_[j] * p;
  }

 private:
  double alpha_;
  int degree_;
  int quad_order_;
  double inv_gamma_alpha_ = 1.0;
  std::vector<double> coeff_;
  std::vector<double> nodes_;
  std::vector<double> weights_;
};

/// Local weights assembled once for a fixed set of relative points (collocation
/// and residual sample points); per interval they only scale by tau_k^alpha.
class LocalWeightTable {
 public:
  LocalWeightTable(const HistoryKernel& kernel, std::span<const double> sigmas)
      : sigmas_(sigmas.begin(), sigmas.end()), table_(static_cast<Eigen::Index>(sigmas.size()), kernel.degree() + 1) {
    std::vector<double> g(kernel.degree() + 1);
    for (std::size_t i = 0; i < sigmas_.size(); ++i) {
      kernel.local_weights(sigmas_[i], g);
      for (int j = 0; j <= kernel.degree(); ++j) table_(static_cast<Eigen::Index>(i), j) = g[j];
    }
  }
  std::span<const double> sigmas() const { return sigmas_; }
  Eigen::RowVectorXd row(std::size_t i) const { return table_.row(static_cast<Eigen::Index>(i)); }

 private:
  std::vector<double> sigmas_;
  Eigen::MatrixXd table_;
};

/// Contribution of one elapsed interval (t_start, t_start + tau] to J^alpha w at t > t_start + tau.
inline Eigen::VectorXd frac_int_history(const HistoryKernel& kernel, const Eigen::MatrixXd& block, double t_start,
                                        double tau, double t) {
  const double excess = (t - (t_start + tau)) / tau;
  if (!(excess > 0.0)) throw std::domain_error("frac_int_history: requires Theta > 1; use the local closed form");
  std::vector<double> g(kernel.degree() + 1);
  kernel.history_weights(excess, g);
  const Eigen::Map<const Eigen::VectorXd> gv(g.data(), static_cast<Eigen::Index>(g.size()));
  return (std::pow(tau, kernel.alpha()) * kernel.inv_gamma_alpha()) * (block.transpose() * gv);
}

inline Eigen::VectorXd frac_int_history(const Eigen::MatrixXd& block, double t_start, double tau, double alpha,
                                        double t) {
  return frac_int_history(HistoryKernel(alpha, static_cast<int>(block.rows()) - 1), block, t_start, tau, t);
}

/// w = jump / Gamma(1-alpha) * t^(-alpha) on (0, t1]: the first-interval L0 representation.
struct SingularHead {
  double t1 = 0.0;
  Eigen::VectorXd jump;  // u(t1) - u0

  /// Its J^alpha at t: jump for t <= t1, jump * I_{t1/t}(1-alpha, alpha) beyond.
  double factor(double alpha, double t) const {
    if (t <= t1) return 1.0;
    return boost::math::ibeta(1.0 - alpha, alpha, t1 / t);
  }
};

/// Adds to acc the contributions of intervals 0..k-1 at t = t_k + offset. Only
/// breakpoints[0..k] are read, so k may index an interval not yet in the mesh.
/// scales[i], if given, must hold tau_i^alpha / Gamma(alpha).
inline void accumulate_history(const HistoryKernel& kernel, std::span<const Eigen::MatrixXd> blocks,
                               std::span<const double> breakpoints, std::span<const double> scales, std::size_t k,
                               double offset, Eigen::VectorXd& acc) {
  std::vector<double> g(kernel.degree() + 1);
  const Eigen::Map<const Eigen::VectorXd> gv(g.data(), static_cast<Eigen::Index>(g.size()));
  for (std::size_t i = 0; i < k; ++i) {
    const double tau_i = breakpoints[i + 1] - breakpoints[i];
    // Theta - 1 = (t - t_{i+1}) / tau_i, formed from breakpoint differences.
    const double excess = ((breakpoints[k] - breakpoints[i + 1]) + offset) / tau_i;
    kernel.history_weights(excess, g);
    const double scale = scales.empty() ? std::pow(tau_i, kernel.alpha()) * kernel.inv_gamma_alpha() : scales[i];
    acc.noalias() += scale * (blocks[i].transpose() * gv);
  }
}

/// Sum over elapsed intervals 0..k-1 of their contributions at t = t_k + sigma tau_k.
inline Eigen::VectorXd frac_int_past(const HistoryKernel& kernel, const PiecewisePolyField& field,
                                     const TemporalMesh& mesh, std::size_t k, double sigma) {
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(field.dofs());
  accumulate_history(kernel, field.blocks, mesh.breakpoints(), {}, k, sigma * mesh.tau(k), acc);
  return acc;
}

/// J^alpha w at t = t_k + sigma tau_k, sigma in [0,1] (history plus closed-form local part).
inline Eigen::VectorXd frac_int_at(const HistoryKernel& kernel, const PiecewisePolyField& field,
                                   const TemporalMesh& mesh, std::size_t k, double sigma,
                                   const SingularHead* head = nullptr) {
  Eigen::VectorXd acc = frac_int_past(kernel, field, mesh, k, sigma);
  std::vector<double> g(kernel.degree() + 1);
  kernel.local_weights(sigma, g);
  const Eigen::Map<const Eigen::VectorXd> gv(g.data(), static_cast<Eigen::Index>(g.size()));
  acc.noalias() += std::pow(mesh.tau(k), kernel.alpha()) * (field.blocks[k].transpose() * gv);
  if (head != nullptr) acc += head->factor(kernel.alpha(), mesh.start(k) + sigma * mesh.tau(k)) * head->jump;
  return acc;
}

/// Full J^alpha w at absolute time t in [0, t_M].
inline Eigen::VectorXd frac_int_eval(const HistoryKernel& kernel, const PiecewisePolyField& field,
                                     const TemporalMesh& mesh, double t, const SingularHead* head = nullptr) {
  if (t == 0.0) return Eigen::VectorXd::Zero(field.dofs());
  if (!(t > 0.0 && t <= mesh.final_time() * (1.0 + 1e-15)))
    throw std::domain_error("frac_int_eval: t beyond the represented mesh");
  t = std::min(t, mesh.final_time());
  const std::size_t k = mesh.locate(t);
  const double sigma = std::clamp((t - mesh.start(k)) / mesh.tau(k), 0.0, 1.0);
  return frac_int_at(kernel, field, mesh, k, sigma, head);
}

inline Eigen::VectorXd frac_int_eval(const PiecewisePolyField& field, const TemporalMesh& mesh, double alpha,
                                     double t) {
  return frac_int_eval(HistoryKernel(alpha, field.degree), field, mesh, t);
}

}  // namespace fraccolloc
