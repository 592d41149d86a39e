#pragma once

// Collocation point families, the per-interval collocation matrices and the
// piecewise-polynomial (local monomial basis) temporal representation.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "fraccolloc/fractional.hpp"
#include "fraccolloc/gauss.hpp"

namespace fraccolloc {

/// Largest supported polynomial degree; monomial Vandermonde conditioning degrades beyond it.
inline constexpr int kMaxDegree = 12;

enum class PointFamily { EquidistantInterior, EquidistantWithZero, GaussLegendre, GaussLobatto, RightEndpoint, Custom };

inline std::string_view to_string(PointFamily family) {
  switch (family) {
    case PointFamily::EquidistantInterior: return "equidistant-interior";
    case PointFamily::EquidistantWithZero: return "equidistant-zero";
    case PointFamily::GaussLegendre: return "gauss-legendre";
    case PointFamily::GaussLobatto: return "gauss-lobatto";
    case PointFamily::RightEndpoint: return "right-endpoint";
    case PointFamily::Custom: return "custom";
  }
  return "unknown";
}

inline PointFamily parse_family(std::string_view name) {
  for (auto f : {PointFamily::EquidistantInterior, PointFamily::EquidistantWithZero, PointFamily::GaussLegendre,
                 PointFamily::GaussLobatto, PointFamily::RightEndpoint, PointFamily::Custom}) {
    if (to_string(f) == name) return f;
  }
  throw std::invalid_argument("unknown point family '" + std::string(name) + "'");
}

/// Relative collocation points theta_0 < ... < theta_m in [0,1] for a named family.
inline std::vector<double> make_points(PointFamily family, int m) {
  if (m < 0 || m > kMaxDegree) throw std::invalid_argument("make_points: degree out of range [0, 12]");
  std::vector<double> theta(m + 1);
  switch (family) {
    case PointFamily::EquidistantInterior:
      for (int l = 0; l <= m; ++l) theta[l] = (l + 1.0) / (m + 2.0);
      break;
    case PointFamily::EquidistantWithZero:
      for (int l = 0; l <= m; ++l) theta[l] = l / (m + 1.0);
      break;
    case PointFamily::GaussLegendre: {
      const auto rule = gauss::legendre(m + 1);
      for (int l = 0; l <= m; ++l) theta[l] = 0.5 * (rule.nodes[l] + 1.0);
      break;
    }
    case PointFamily::GaussLobatto: {
      if (m == 0) throw std::invalid_argument("make_points: Gauss-Lobatto needs m >= 1 (two endpoints)");
      const auto rule = gauss::lobatto(m + 1);
      for (int l = 0; l <= m; ++l) theta[l] = 0.5 * (rule.nodes[l] + 1.0);
      theta.front() = 0.0;
      theta.back() = 1.0;
      break;
    }
    case PointFamily::RightEndpoint:
      if (m != 0) throw std::invalid_argument("make_points: right-endpoint family requires m = 0");
      theta[0] = 1.0;
      break;
    case PointFamily::Custom:
      throw std::invalid_argument("make_points: custom points must be supplied explicitly");
  }
  return theta;
}

class CollocationScheme {
 public:
  static CollocationScheme make(PointFamily family, int m) { return CollocationScheme(family, make_points(family, m)); }
  static CollocationScheme custom(std::vector<double> theta) { return CollocationScheme(PointFamily::Custom, std::move(theta)); }

  int degree() const { return static_cast<int>(theta_.size()) - 1; }
  PointFamily family() const { return family_; }
  std::span<const double> theta() const { return theta_; }
  double theta(int l) const { return theta_[l]; }
  bool starts_at_zero() const { return theta_.front() == 0.0; }
  /// The Caputo derivative of the computed solution is continuous in time.
  bool continuous() const { return theta_.front() == 0.0 && theta_.back() == 1.0; }

  std::string describe() const {
    return std::string(to_string(family_)) + "(m=" + std::to_string(degree()) + ")";
  }

 private:
  CollocationScheme(PointFamily family, std::vector<double> theta) : family_(family), theta_(std::move(theta)) {
    if (theta_.empty() || degree() > kMaxDegree) throw std::invalid_argument("CollocationScheme: need 1..13 points");
    for (std::size_t l = 0; l < theta_.size(); ++l) {
      if (!(theta_[l] >= 0.0 && theta_[l] <= 1.0)) throw std::invalid_argument("CollocationScheme: points must lie in [0,1]");
      if (l > 0 && !(theta_[l] > theta_[l - 1])) throw std::invalid_argument("CollocationScheme: points must be strictly increasing");
    }
  }

  PointFamily family_;
  std::vector<double> theta_;
};

/// Per-interval collocation matrices. Diagonal matrices are stored as their diagonals.
struct CollocMatrices {
  double alpha = 0.0;
  Eigen::MatrixXd W;   // rows (1, theta_l, ..., theta_l^m)
  Eigen::VectorXd D1;  // theta_l^alpha
  Eigen::VectorXd D2;  // c_j
  bool reduced = false;
  // Present iff reduced (theta_0 = 0): m x m matrices over theta_1..theta_m.
  Eigen::MatrixXd What;   // rows (1, theta_l, ..., theta_l^{m-1})
  Eigen::VectorXd D1hat;  // theta_l^alpha, l >= 1
  Eigen::VectorXd D2hat;  // c_1..c_m
  Eigen::VectorXd D3hat;  // theta_1..theta_m
};

inline Eigen::MatrixXd vandermonde(std::span<const double> theta, int columns) {
  Eigen::MatrixXd v(static_cast<Eigen::Index>(theta.size()), columns);
  for (Eigen::Index i = 0; i < v.rows(); ++i) {
    double p = 1.0;
    for (int j = 0; j < columns; ++j, p *= theta[i]) v(i, j) = p;
  }
  return v;
}

inline CollocMatrices build_matrices(const CollocationScheme& scheme, double alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("build_matrices: alpha must lie in (0,1]");
  const int m = scheme.degree();
  CollocMatrices mats;
  mats.alpha = alpha;
  mats.W = vandermonde(scheme.theta(), m + 1);
  mats.D1.resize(m + 1);
  mats.D2.resize(m + 1);
  for (int l = 0; l <= m; ++l) {
    mats.D1[l] = std::pow(scheme.theta(l), alpha);
    mats.D2[l] = frac_coeff(l, alpha);
  }
  if (scheme.starts_at_zero()) {
    mats.reduced = true;
    mats.What = vandermonde(scheme.theta().subspan(1), m);
    mats.D1hat = mats.D1.tail(m);
    mats.D2hat = mats.D2.tail(m);
    mats.D3hat.resize(m);
    for (int l = 1; l <= m; ++l) mats.D3hat[l - 1] = scheme.theta(l);
  }
  return mats;
}

/// Horner evaluation of every column (spatial DOF) of a (m+1) x N monomial block at sigma.
inline Eigen::VectorXd eval_poly(const Eigen::MatrixXd& block, double sigma) {
  if (!(sigma >= 0.0 && sigma <= 1.0)) throw std::domain_error("eval_poly: sigma outside [0,1]");
  Eigen::VectorXd out = block.row(block.rows() - 1).transpose();
  for (Eigen::Index j = block.rows() - 2; j >= 0; --j) out = out * sigma + block.row(j).transpose();
  return out;
}

/// d/dsigma of eval_poly.
inline Eigen::VectorXd eval_poly_deriv(const Eigen::MatrixXd& block, double sigma) {
  if (!(sigma >= 0.0 && sigma <= 1.0)) throw std::domain_error("eval_poly_deriv: sigma outside [0,1]");
  const Eigen::Index m = block.rows() - 1;
  Eigen::VectorXd out = Eigen::VectorXd::Zero(block.cols());
  for (Eigen::Index j = m; j >= 1; --j) out = out * sigma + static_cast<double>(j) * block.row(j).transpose();
  return out;
}

/// Closed-form coercivity (Lax-Milgram) test for the lowest-order schemes.
/// Returns nullopt when no closed form is available for the (m, theta_0) combination.
inline std::optional<bool> check_laxmilgram_loworder(const CollocationScheme& scheme, double alpha) {
  const int m = scheme.degree();
  const double bound = 1.0 / (1.0 + alpha);
  if (!scheme.starts_at_zero()) {
    if (m == 0) return true;
    if (m == 1) return scheme.theta(0) / scheme.theta(1) <= bound;
  } else if (m == 2) {
    return scheme.theta(1) / scheme.theta(2) <= bound;
  }
  return std::nullopt;
}

/// Breakpoints 0 = t_0 < t_1 < ... < t_M. Interval k (0-based) is (t_k, t_{k+1}].
class TemporalMesh {
 public:
  std::size_t intervals() const { return t_.size() - 1; }
  double start(std::size_t k) const { return t_[k]; }
  double end(std::size_t k) const { return t_[k + 1]; }
  double tau(std::size_t k) const { return t_[k + 1] - t_[k]; }
  double final_time() const { return t_.back(); }
  std::span<const double> breakpoints() const { return t_; }

  void append(double tau) {
    if (!(tau > 0.0)) throw std::invalid_argument("TemporalMesh::append: step must be positive");
    t_.push_back(t_.back() + tau);
  }
  /// Append ending exactly at t_end (used to land on the final time without round-off).
  void append_until(double t_end) {
    if (!(t_end > t_.back())) throw std::invalid_argument("TemporalMesh::append_until: end must increase");
    t_.push_back(t_end);
  }
  void pop() {
    if (t_.size() > 1) t_.pop_back();
  }

  /// Interval containing t, with the left-limit convention t in (t_k, t_{k+1}].
  std::size_t locate(double t) const {
    if (!(t > 0.0 && t <= t_.back())) throw std::domain_error("TemporalMesh::locate: t outside (0, t_M]");
    auto it = std::lower_bound(t_.begin() + 1, t_.end(), t);
    return static_cast<std::size_t>(it - t_.begin()) - 1;
  }

 private:
  std::vector<double> t_{0.0};
};

/// Per-interval (m+1) x N coefficient blocks in the local basis sigma^j,
/// sigma = (t - t_k) / tau_k.
struct PiecewisePolyField {
  int degree = 0;
  std::vector<Eigen::MatrixXd> blocks;

  std::size_t intervals() const { return blocks.size(); }
  Eigen::Index dofs() const { return blocks.empty() ? 0 : blocks.front().cols(); }
};

}  // namespace fraccolloc
