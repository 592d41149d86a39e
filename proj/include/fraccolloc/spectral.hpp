#pragma once

// Well-posedness analysis of the per-interval collocation systems: the matrix
// M = W^-1 D1^-1 W D2^-1 (or its reduced counterpart when theta_0 = 0), its
// spectrum over alpha sweeps, and the coefficients a_j of
// det(M1 - lambda M2) = sum_j (-lambda)^j a_j by subset enumeration.

#include <Eigen/Dense>

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fraccolloc/colloc_core.hpp"
#include "fraccolloc/csv.hpp"

namespace fraccolloc {

inline constexpr int kMaxEigenDimension = 13;

struct WellPosednessMatrix {
  Eigen::MatrixXd M;
  double cond_W = 1.0;  // 2-norm condition number of the Vandermonde factor used
  bool reduced = false;
};

inline double condition_number(const Eigen::MatrixXd& a) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
  const auto& s = svd.singularValues();
  return s(0) / s(s.size() - 1);
}

inline WellPosednessMatrix build_M(const CollocationScheme& scheme, double alpha) {
  const auto mats = build_matrices(scheme, alpha);
  WellPosednessMatrix out;
  if (mats.reduced) {
    if (scheme.degree() == 0) throw std::invalid_argument("build_M: theta_0 = 0 with m = 0 leaves an empty reduced system");
    out.reduced = true;
    const Eigen::MatrixXd rhs = mats.D1hat.cwiseInverse().asDiagonal() * mats.What * mats.D2hat.cwiseInverse().asDiagonal();
    out.M = mats.What.partialPivLu().solve(rhs);
    out.cond_W = condition_number(mats.What);
  } else {
    const Eigen::MatrixXd rhs = mats.D1.cwiseInverse().asDiagonal() * mats.W * mats.D2.cwiseInverse().asDiagonal();
    out.M = mats.W.partialPivLu().solve(rhs);
    out.cond_W = condition_number(mats.W);
  }
  return out;
}

/// All eigenvalues of a small real matrix, sorted by (real, imaginary) part.
inline std::vector<std::complex<double>> eigenvalues(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols()) throw std::invalid_argument("eigenvalues: matrix must be square");
  if (m.rows() > kMaxEigenDimension) throw std::invalid_argument("eigenvalues: dimension exceeds 13");
  Eigen::EigenSolver<Eigen::MatrixXd> es(m, false);
  if (es.info() != Eigen::Success) throw std::runtime_error("eigenvalues: QR iteration did not converge");
  std::vector<std::complex<double>> ev(es.eigenvalues().begin(), es.eigenvalues().end());
  std::sort(ev.begin(), ev.end(), [](auto a, auto b) { return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag(); });
  return ev;
}

/// Distance of lambda to the closed negative real axis (origin included).
inline double neg_axis_distance(std::complex<double> lambda) {
  return lambda.real() < 0.0 ? std::abs(lambda.imag()) : std::abs(lambda);
}

/// Determinant of [theta_i^beta_k]. Positivity is checked, not assumed, when both
/// sequences are strictly increasing with theta in (0,1].
inline double gen_vandermonde_det(std::span<const double> theta, std::span<const double> beta) {
  const auto n = static_cast<Eigen::Index>(theta.size());
  if (theta.size() != beta.size() || n == 0) throw std::invalid_argument("gen_vandermonde_det: need matching non-empty sequences");
  bool strict = true;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(theta[i] > 0.0 && theta[i] <= 1.0)) throw std::invalid_argument("gen_vandermonde_det: theta must lie in (0,1]");
    if (beta[i] < 0.0) throw std::invalid_argument("gen_vandermonde_det: exponents must be >= 0");
    if (i > 0) {
      if (!(theta[i] > theta[i - 1])) throw std::invalid_argument("gen_vandermonde_det: theta must be strictly increasing");
      if (beta[i] < beta[i - 1]) throw std::invalid_argument("gen_vandermonde_det: exponents must be nondecreasing");
      if (beta[i] == beta[i - 1]) strict = false;
    }
  }
  if (!strict) return 0.0;
  Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic> g(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index k = 0; k < n; ++k) g(i, k) = std::pow(static_cast<long double>(theta[i]), static_cast<long double>(beta[k]));
  const auto det = static_cast<double>(g.partialPivLu().determinant());
  if (!(det > 0.0)) throw std::runtime_error("gen_vandermonde_det: computed determinant is not positive (loss of precision)");
  return det;
}

/// M1 = W D2^-1 and M2 = D1 W of the characteristic pencil.
struct CharacteristicPencil {
  Eigen::MatrixXd M1;
  Eigen::MatrixXd M2;
};

inline CharacteristicPencil characteristic_pencil(const CollocationScheme& scheme, double alpha) {
  if (scheme.starts_at_zero()) throw std::invalid_argument("char_coeffs: requires theta_0 > 0 (use the reduced M)");
  const auto mats = build_matrices(scheme, alpha);
  return {mats.W * mats.D2.cwiseInverse().asDiagonal(), mats.D1.asDiagonal() * mats.W};
}

/// a_j = sum over column subsets I with |I| = j of det M_I, where column k of M_I
/// comes from M2 if k in I and from M1 otherwise.
inline std::vector<double> char_coeffs(const CollocationScheme& scheme, double alpha) {
  const int m = scheme.degree();
  if (m > 10) throw std::invalid_argument("char_coeffs: subset enumeration limited to m <= 10");
  const auto pencil = characteristic_pencil(scheme, alpha);
  const int n = m + 1;
  std::vector<long double> acc(static_cast<std::size_t>(n) + 1, 0.0L);
  using LMat = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
  const LMat m1 = pencil.M1.cast<long double>();
  const LMat m2 = pencil.M2.cast<long double>();
  LMat mi(n, n);
  for (unsigned subset = 0; subset < (1u << n); ++subset) {
    for (int k = 0; k < n; ++k) mi.col(k) = (subset >> k) & 1u ? m2.col(k) : m1.col(k);
    acc[static_cast<std::size_t>(std::popcount(subset))] += mi.partialPivLu().determinant();
  }
  return {acc.begin(), acc.end()};
}

struct SweepFailure {
  double alpha = 0.0;
  std::string message;
};

struct SpectrumReport {
  std::string scheme;
  int degree = 0;
  bool reduced = false;
  std::vector<double> alpha_grid;
  std::vector<std::vector<std::complex<double>>> eigenvalues;
  std::vector<double> min_neg_axis_distance;
  std::vector<double> min_real_part;
  std::vector<std::vector<double>> coeffs;  // empty unless requested
  std::vector<SweepFailure> failures;
  std::vector<std::string> warnings;

  /// No eigenvalue touches the closed negative real axis at any alpha.
  bool well_posed() const {
    return failures.empty() && std::all_of(min_neg_axis_distance.begin(), min_neg_axis_distance.end(), [](double d) { return d > 0.0; });
  }
  bool all_real_parts_positive() const {
    return failures.empty() && std::all_of(min_real_part.begin(), min_real_part.end(), [](double r) { return r > 0.0; });
  }
};

/// n points spaced evenly on [lo, hi].
inline std::vector<double> linspace(double lo, double hi, int n) {
  std::vector<double> v(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = n == 1 ? hi : lo + (hi - lo) * i / (n - 1);
  if (n > 1) v.back() = hi;
  return v;
}

/// Default alpha grid for spectrum figures: 199 points on [0.005, 1].
inline std::vector<double> default_alpha_grid(int points = 199) { return linspace(0.005, 1.0, points); }

inline SpectrumReport sweep(const CollocationScheme& scheme, std::span<const double> alpha_grid, bool with_coeffs = false) {
  SpectrumReport rep;
  rep.scheme = scheme.describe();
  rep.degree = scheme.degree();
  rep.reduced = scheme.starts_at_zero();
  for (double alpha : alpha_grid) {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("sweep: alpha grid must lie in (0,1]");
  }
  rep.alpha_grid.assign(alpha_grid.begin(), alpha_grid.end());
  const bool coeffs_ok = with_coeffs && !rep.reduced && scheme.degree() <= 10;
  for (double alpha : alpha_grid) {
    std::vector<std::complex<double>> ev;
    double min_dist = 0.0, min_re = 0.0;
    try {
      const auto wm = build_M(scheme, alpha);
      if (scheme.degree() >= 9 && rep.warnings.empty())
        rep.warnings.push_back("m >= 9: Vandermonde condition number " + format_double(wm.cond_W) + "; spectra may be inaccurate");
      ev = eigenvalues(wm.M);
      min_dist = std::numeric_limits<double>::infinity();
      min_re = std::numeric_limits<double>::infinity();
      for (auto lam : ev) {
        min_dist = std::min(min_dist, neg_axis_distance(lam));
        min_re = std::min(min_re, lam.real());
      }
    } catch (const std::exception& e) {
      rep.failures.push_back({alpha, e.what()});
    }
    rep.eigenvalues.push_back(std::move(ev));
    rep.min_neg_axis_distance.push_back(min_dist);
    rep.min_real_part.push_back(min_re);
    if (coeffs_ok) rep.coeffs.push_back(char_coeffs(scheme, alpha));
  }
  return rep;
}

/// CSV: alpha,index,re,im,neg_axis_distance[,a_0..a_{m+1}], one row per eigenvalue.
inline void write_spectrum_csv(std::ostream& os, const SpectrumReport& rep) {
  os << "alpha,index,re,im,neg_axis_distance";
  const bool with_coeffs = !rep.coeffs.empty();
  if (with_coeffs)
    for (std::size_t j = 0; j < rep.coeffs.front().size(); ++j) os << ",a_" << j;
  os << '\n';
  for (std::size_t i = 0; i < rep.alpha_grid.size(); ++i) {
    for (std::size_t e = 0; e < rep.eigenvalues[i].size(); ++e) {
      const auto lam = rep.eigenvalues[i][e];
      os << format_double(rep.alpha_grid[i]) << ',' << e << ',' << format_double(lam.real()) << ','
         << format_double(lam.imag()) << ',' << format_double(neg_axis_distance(lam));
      if (with_coeffs)
        for (double a : rep.coeffs[i]) os << ',' << format_double(a);
      os << '\n';
    }
  }
}

}  // namespace fraccolloc
