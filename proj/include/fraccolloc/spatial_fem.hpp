#pragma once

// 1D Lagrange finite elements (P1/P2) for L u = -(a u')' + b u' + c u on
// (x_left, x_right) with homogeneous Dirichlet conditions.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "fraccolloc/gauss.hpp"

namespace fraccolloc {

using ScalarField = std::function<double(double)>;

struct OperatorCoefficients {
  ScalarField a = [](double) { return 1.0; };
  ScalarField a_prime;  // empty: central differences of a
  ScalarField b = [](double) { return 0.0; };
  ScalarField c = [](double) { return 0.0; };
  bool pure_laplacian = true;  // a = 1, b = c = 0

  static OperatorCoefficients negative_laplacian() { return {}; }
  static OperatorCoefficients general(ScalarField a, ScalarField a_prime, ScalarField b, ScalarField c) {
    return {std::move(a), std::move(a_prime), std::move(b), std::move(c), false};
  }

  double da(double x) const {
    if (a_prime) return a_prime(x);
    if (pure_laplacian) return 0.0;
    const double h = 1e-5 * std::max(1.0, std::abs(x));
    return (a(x + h) - a(x - h)) / (2.0 * h);
  }
};

namespace detail {

struct LocalBasis {
  std::array<double, 3> value{};
  std::array<double, 3> d1{};  // d/dxi
  std::array<double, 3> d2{};  // d2/dxi2
};

inline LocalBasis local_basis(int degree, double xi) {
  LocalBasis lb;
  if (degree == 1) {
    lb.value = {1.0 - xi, xi, 0.0};
    lb.d1 = {-1.0, 1.0, 0.0};
  } else {
    lb.value = {(1.0 - xi) * (1.0 - 2.0 * xi), 4.0 * xi * (1.0 - xi), xi * (2.0 * xi - 1.0)};
    lb.d1 = {4.0 * xi - 3.0, 4.0 - 8.0 * xi, 4.0 * xi - 1.0};
    lb.d2 = {4.0, -8.0, 4.0};
  }
  return lb;
}

}  // namespace detail

class SpatialSystem;
inline SpatialSystem assemble(double x_left, double x_right, int cells, int degree,
                              OperatorCoefficients coeffs = OperatorCoefficients::negative_laplacian());

class SpatialSystem {
 public:
  double x_left() const { return vertices_.front(); }
  double x_right() const { return vertices_.back(); }
  int degree() const { return degree_; }
  std::size_t cells() const { return vertices_.size() - 1; }
  Eigen::Index dofs() const { return n_; }
  const std::vector<double>& vertices() const { return vertices_; }
  const std::vector<double>& dof_coords() const { return dof_coords_; }
  const std::vector<double>& sample_points() const { return samples_; }
  const Eigen::MatrixXd& mass() const { return mass_; }
  const Eigen::MatrixXd& stiff() const { return stiff_; }
  const OperatorCoefficients& coefficients() const { return coeffs_; }
  /// Values at sample_points() of the FE function with given interior DOFs.
  const Eigen::MatrixXd& sample_matrix() const { return sample_matrix_; }

  /// Load vector (f(.), phi_i) by 5-point Gauss quadrature per cell.
  Eigen::VectorXd load_vector(const ScalarField& f) const {
    Eigen::VectorXd fq(static_cast<Eigen::Index>(quad_points_.size()));
    for (std::size_t q = 0; q < quad_points_.size(); ++q) fq[static_cast<Eigen::Index>(q)] = f(quad_points_[q]);
    return load_matrix_ * fq;
  }

  Eigen::VectorXd interpolate(const ScalarField& g) const {
    Eigen::VectorXd v(n_);
    for (Eigen::Index i = 0; i < n_; ++i) v[i] = g(dof_coords_[static_cast<std::size_t>(i)]);
    return v;
  }

  /// Cell index and reference coordinate of x (clamped to the closed domain).
  std::pair<std::size_t, double> locate(double x) const {
    if (!(x >= x_left() - 1e-14 && x <= x_right() + 1e-14)) throw std::domain_error("SpatialSystem: x outside the domain");
    auto it = std::upper_bound(vertices_.begin(), vertices_.end(), x);
    std::size_t cell = it == vertices_.begin() ? 0 : static_cast<std::size_t>(it - vertices_.begin()) - 1;
    cell = std::min(cell, cells() - 1);
    const double h = vertices_[cell + 1] - vertices_[cell];
    return {cell, std::clamp((x - vertices_[cell]) / h, 0.0, 1.0)};
  }

  /// Global node index (boundary nodes included) of local node r of a cell.
  std::size_t global_node(std::size_t cell, int r) const { return cell * static_cast<std::size_t>(degree_) + static_cast<std::size_t>(r); }
  /// Interior DOF of a global node, or -1 on the Dirichlet boundary.
  Eigen::Index dof_of(std::size_t node) const {
    const std::size_t last = cells() * static_cast<std::size_t>(degree_);
    if (node == 0 || node == last) return -1;
    return static_cast<Eigen::Index>(node) - 1;
  }

 private:
  friend SpatialSystem assemble(double, double, int, int, OperatorCoefficients);

  std::vector<double> vertices_;
  int degree_ = 2;
  Eigen::Index n_ = 0;
  Eigen::MatrixXd mass_, stiff_;
  std::vector<double> dof_coords_, samples_;
  Eigen::MatrixXd sample_matrix_;
  std::vector<double> quad_points_;
  Eigen::MatrixXd load_matrix_;
  OperatorCoefficients coeffs_;
};

/// Uniform mesh of `cells` cells on (x_left, x_right), Dirichlet DOFs eliminated.
inline SpatialSystem assemble(double x_left, double x_right, int cells, int degree, OperatorCoefficients coeffs) {
  if (degree != 1 && degree != 2) throw std::invalid_argument("assemble: degree must be 1 or 2");
  if (cells < 1 || !(x_right > x_left)) throw std::invalid_argument("assemble: need cells >= 1 and x_right > x_left");
  const Eigen::Index n = static_cast<Eigen::Index>(cells) * degree - 1;
  if (n <= 0) throw std::invalid_argument("assemble: no interior degrees of freedom (degenerate mesh)");

  SpatialSystem sys;
  sys.degree_ = degree;
  sys.n_ = n;
  sys.coeffs_ = std::move(coeffs);
  sys.vertices_.resize(static_cast<std::size_t>(cells) + 1);
  for (int i = 0; i <= cells; ++i) sys.vertices_[i] = x_left + (x_right - x_left) * i / cells;
  sys.vertices_.back() = x_right;

  for (Eigen::Index i = 0; i < n; ++i) {
    const std::size_t node = static_cast<std::size_t>(i) + 1;
    const std::size_t cell = std::min(node / degree, static_cast<std::size_t>(cells) - 1);
    const int r = static_cast<int>(node - cell * degree);
    const double h = sys.vertices_[cell + 1] - sys.vertices_[cell];
    sys.dof_coords_.push_back(sys.vertices_[cell] + h * r / degree);
  }

  const auto ref = gauss::mapped(gauss::legendre(5), 0.0, 1.0);
  const int nloc = degree + 1;
  sys.mass_ = Eigen::MatrixXd::Zero(n, n);
  sys.stiff_ = Eigen::MatrixXd::Zero(n, n);
  sys.load_matrix_ = Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(cells) * 5);
  const auto& cf = sys.coeffs_;
  for (std::size_t cell = 0; cell < static_cast<std::size_t>(cells); ++cell) {
    const double x0 = sys.vertices_[cell];
    const double h = sys.vertices_[cell + 1] - x0;
    for (std::size_t q = 0; q < ref.nodes.size(); ++q) {
      const double x = x0 + h * ref.nodes[q];
      const double wq = h * ref.weights[q];
      const double a = cf.a(x), b = cf.b(x), c = cf.c(x);
      if (!(a > 0.0)) {
        std::ostringstream msg;
        msg << "assemble: diffusion coefficient a(x) must be positive, a(" << x << ") = " << a;
        throw std::invalid_argument(msg.str());
      }
      const auto lb = detail::local_basis(degree, ref.nodes[q]);
      const Eigen::Index qcol = static_cast<Eigen::Index>(cell * 5 + q);
      sys.quad_points_.push_back(x);
      for (int r = 0; r < nloc; ++r) {
        const Eigen::Index i = sys.dof_of(sys.global_node(cell, r));
        if (i < 0) continue;
        sys.load_matrix_(i, qcol) += wq * lb.value[r];
        for (int s = 0; s < nloc; ++s) {
          const Eigen::Index j = sys.dof_of(sys.global_node(cell, s));
          if (j < 0) continue;
          const double di = lb.d1[r] / h, dj = lb.d1[s] / h;
          sys.mass_(i, j) += wq * lb.value[r] * lb.value[s];
          sys.stiff_(i, j) += wq * (a * dj * di + b * dj * lb.value[r] + c * lb.value[s] * lb.value[r]);
        }
      }
    }
  }

  for (std::size_t cell = 0; cell < static_cast<std::size_t>(cells); ++cell) {
    const double h = sys.vertices_[cell + 1] - sys.vertices_[cell];
    for (int j = 1; j <= 4; ++j) sys.samples_.push_back(sys.vertices_[cell] + h * j / 5.0);
  }
  sys.samples_.insert(sys.samples_.end(), sys.dof_coords_.begin(), sys.dof_coords_.end());
  std::sort(sys.samples_.begin(), sys.samples_.end());

  sys.sample_matrix_ = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(sys.samples_.size()), n);
  for (std::size_t p = 0; p < sys.samples_.size(); ++p) {
    const auto [cell, xi] = sys.locate(sys.samples_[p]);
    const auto lb = detail::local_basis(degree, xi);
    for (int r = 0; r < nloc; ++r) {
      const Eigen::Index i = sys.dof_of(sys.global_node(cell, r));
      if (i >= 0) sys.sample_matrix_(static_cast<Eigen::Index>(p), i) += lb.value[r];
    }
  }
  return sys;
}

/// Finite element interpolant of the DOF vector at x.
inline double eval_field(const SpatialSystem& sys, const Eigen::VectorXd& dofs, double x) {
  const auto [cell, xi] = sys.locate(x);
  const auto lb = detail::local_basis(sys.degree(), xi);
  double v = 0.0;
  for (int r = 0; r <= sys.degree(); ++r) {
    const Eigen::Index i = sys.dof_of(sys.global_node(cell, r));
    if (i >= 0) v += dofs[i] * lb.value[r];
  }
  return v;
}

/// Elementwise -(a u_h')' + b u_h' + c u_h at x.
inline double eval_Lu(const SpatialSystem& sys, const Eigen::VectorXd& dofs, double x) {
  const auto [cell, xi] = sys.locate(x);
  const double h = sys.vertices()[cell + 1] - sys.vertices()[cell];
  const auto lb = detail::local_basis(sys.degree(), xi);
  double u = 0.0, du = 0.0, d2u = 0.0;
  for (int r = 0; r <= sys.degree(); ++r) {
    const Eigen::Index i = sys.dof_of(sys.global_node(cell, r));
    if (i < 0) continue;
    u += dofs[i] * lb.value[r];
    du += dofs[i] * lb.d1[r] / h;
    d2u += dofs[i] * lb.d2[r] / (h * h);
  }
  const auto& cf = sys.coefficients();
  return -cf.da(x) * du - cf.a(x) * d2u + cf.b(x) * du + cf.c(x) * u;
}

/// Constants (lambda, omega) with L g >= lambda and 1 <= g <= 1 + omega for some g.
struct BarrierPair {
  double lambda = 0.0;
  double omega = 0.0;
};

/// For -d^2/dx^2 on an interval of length L: g = 1 + lambda/2 (x - x_L)(x_R - x),
/// lambda = pi^2 / L^2, omega = lambda L^2 / 8 (so (pi^2, pi^2/8) on (0,1)).
inline BarrierPair barrier_pair(const SpatialSystem& sys) {
  if (!sys.coefficients().pure_laplacian)
    throw std::invalid_argument("barrier_pair: closed form only for -d2/dx2; supply (lambda, omega, g) explicitly");
  const double len = sys.x_right() - sys.x_left();
  const double lambda = std::numbers::pi * std::numbers::pi / (len * len);
  return {lambda, lambda * len * len / 8.0};
}

/// Verifies a user-supplied comparison function g (and its image L g) at the sample points.
inline BarrierPair barrier_pair(const SpatialSystem& sys, double lambda, double omega, const ScalarField& g,
                                const ScalarField& Lg) {
  if (omega < 0.0) throw std::invalid_argument("barrier_pair: omega must be non-negative");
  std::vector<double> pts = sys.sample_points();
  pts.push_back(sys.x_left());
  pts.push_back(sys.x_right());
  for (double x : pts) {
    const double gx = g(x), lgx = Lg(x);
    const double slack = 1e-12 * std::max(1.0, std::abs(lambda));
    if (lgx < lambda - slack || gx < 1.0 - 1e-12 || gx > 1.0 + omega + 1e-12) {
      std::ostringstream msg;
      msg << "barrier_pair: comparison function violates L g >= lambda, 1 <= g <= 1 + omega at x = " << x
          << " (g = " << gx << ", L g = " << lgx << ")";
      throw std::runtime_error(msg.str());
    }
  }
  return {lambda, omega};
}

/// g = 1: omega = 0 and lambda = min c over the sample points and vertices.
inline BarrierPair barrier_pair_constant(const SpatialSystem& sys) {
  double lambda = std::numeric_limits<double>::infinity();
  for (double x : sys.sample_points()) lambda = std::min(lambda, sys.coefficients().c(x));
  for (double x : sys.vertices()) lambda = std::min(lambda, sys.coefficients().c(x));
  return {lambda, 0.0};
}

/// Smallest eigenvalue of the pencil (Stiff, Mass): the discrete coercivity constant.
inline double smallest_generalized_eigenvalue(const SpatialSystem& sys) {
  const Eigen::MatrixXd sym = 0.5 * (sys.stiff() + sys.stiff().transpose());
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(sym, sys.mass());
  if (es.info() != Eigen::Success) throw std::runtime_error("smallest_generalized_eigenvalue: eigensolver failed");
  return es.eigenvalues().minCoeff();
}

}  // namespace fraccolloc
