#pragma once

// Collocation time stepping for d_t^alpha u + L u = f in the w-formulation:
// w = d_t^alpha u is a piecewise polynomial of degree m, u = u0 + J^alpha w,
// and on each interval w + L J^alpha w = f - L u0 holds at the collocation
// points. Includes the residual, the a-posteriori residual barriers and the
// adaptive step controller.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "fraccolloc/colloc_core.hpp"
#include "fraccolloc/frac_quad.hpp"
#include "fraccolloc/fractional.hpp"
#include "fraccolloc/spatial_fem.hpp"

namespace fraccolloc {

/// Numerical breakdown during a run (singular block system, step size collapse).
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Problem {
  ScalarField u0;
  std::function<double(double x, double t)> f;
  double T = 1.0;
};

enum class NormKind { L2, Linf };
enum class BarrierKind { R0, R1 };

struct BarrierSpec {
  BarrierKind kind = BarrierKind::R0;
  double tol = 1e-4;
  double lambda = 0.0;
  double omega = 0.0;
  double tau_param = 0.0;  // R1 only; <= 0 means "use t_1 of the current mesh"
  NormKind norm = NormKind::Linf;

  void validate() const {
    if (!(tol > 0.0)) throw std::invalid_argument("BarrierSpec: TOL must be positive");
    if (omega < 0.0) throw std::invalid_argument("BarrierSpec: omega must be non-negative");
    if (norm == NormKind::L2 && omega != 0.0) throw std::invalid_argument("BarrierSpec: omega must be 0 for the L2 norm");
  }
};

/// TOL * R(t) / (1 + omega) with
///   R0(t) = t^-alpha / Gamma(1-alpha) + lambda,
///   R1(t) = t^-1 [t^(1-alpha) - ((t-tau)^+)^(1-alpha)] / (Gamma(1-alpha) tau^(1-alpha)) + lambda max(tau, t)^(alpha-1).
/// At alpha = 1 the memory terms vanish (1/Gamma(0) = 0).
inline double barrier_value(const BarrierSpec& spec, double alpha, double t, double tau_param = 0.0) {
  if (!(t > 0.0)) throw std::domain_error("barrier_value: t must be positive");
  const double inv_g = alpha < 1.0 ? 1.0 / gamma_fn(1.0 - alpha) : 0.0;
  double r = 0.0;
  if (spec.kind == BarrierKind::R0) {
    r = std::pow(t, -alpha) * inv_g + spec.lambda;
  } else {
    const double tau = spec.tau_param > 0.0 ? spec.tau_param : tau_param;
    if (!(tau > 0.0)) throw std::invalid_argument("barrier_value: R1 needs a positive tau parameter");
    const double beta = 1.0 - alpha;
    double bracket;
    if (t <= tau) {
      bracket = std::pow(t, beta);
    } else {
      // t^beta - (t - tau)^beta = tau^beta [Theta^beta - (Theta-1)^beta], Theta = t / tau.
      bracket = beta == 0.0 ? 0.0 : std::pow(tau, beta) * stable_pow_diff(t / tau, beta);
    }
    r = bracket / (t * std::pow(tau, beta)) * inv_g + spec.lambda * std::pow(std::max(tau, t), alpha - 1.0);
  }
  return spec.tol * r / (1.0 + spec.omega);
}

class SolverState {
 public:
  SolverState(CollocationScheme scheme, double alpha, SpatialSystem system, Problem problem, int quad_order = 0)
      : scheme_(std::move(scheme)),
        alpha_(alpha),
        mats_(build_matrices(scheme_, alpha)),
        system_(std::move(system)),
        problem_(std::move(problem)),
        kernel_(alpha, scheme_.degree(), quad_order) {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("SolverState: alpha must lie in (0,1]");
    if (!problem_.u0 || !problem_.f) throw std::invalid_argument("SolverState: problem needs u0 and f");
    if (!(problem_.T > 0.0)) throw std::invalid_argument("SolverState: T must be positive");
    field_.degree = scheme_.degree();
    u0_ = system_.interpolate(problem_.u0);
    mass_llt_.compute(system_.mass());
    if (mass_llt_.info() != Eigen::Success) throw SolverError("SolverState: mass matrix is not positive definite");
    discrete_op_ = mass_llt_.solve(system_.stiff());
  }

  const CollocationScheme& scheme() const { return scheme_; }
  const CollocMatrices& matrices() const { return mats_; }
  const SpatialSystem& system() const { return system_; }
  const Problem& problem() const { return problem_; }
  const TemporalMesh& mesh() const { return mesh_; }
  const PiecewisePolyField& field() const { return field_; }
  const HistoryKernel& kernel() const { return kernel_; }
  const std::optional<SingularHead>& head() const { return head_; }
  double alpha() const { return alpha_; }
  const Eigen::VectorXd& u0_dofs() const { return u0_; }
  std::size_t intervals() const { return mesh_.intervals(); }

  /// Load vector (f(., t), phi_i).
  Eigen::VectorXd load(double t) const {
    return system_.load_vector([&](double x) { return problem_.f(x, t); });
  }

  /// J^alpha w at t = t_k + offset from intervals 0..k-1 (and the L0 head).
  Eigen::VectorXd history(std::size_t k, double offset) const {
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(system_.dofs());
    accumulate_history(kernel_, field_.blocks, mesh_.breakpoints(), scales_, k, offset, acc);
    if (head_) acc += head_->factor(alpha_, mesh_.start(k) + offset) * head_->jump;
    return acc;
  }

  /// w(t_k^+) for theta_0 = 0 schemes: Mass w = b(t_k) - Stiff (u0 + J^alpha w(t_k)).
  /// k may equal intervals() (the interval about to be solved).
  Eigen::VectorXd initial_w(std::size_t k) const {
    if (!scheme_.starts_at_zero()) throw std::logic_error("initial_w: only defined for theta_0 = 0 schemes");
    if (k > intervals()) throw std::out_of_range("initial_w: interval not reachable");
    const Eigen::VectorXd u = u0_ + history(k, 0.0);
    return mass_llt_.solve(load(mesh_.start(k)) - system_.stiff() * u);
  }

  /// Coefficient block of the next interval (t_M, t_M + tau], not yet committed.
  Eigen::MatrixXd solve_interval(double tau) const {
    if (!(tau > 0.0)) throw std::invalid_argument("solve_interval: tau must be positive");
    const std::size_t k = intervals();
    const Eigen::Index n = system_.dofs();
    const int m = scheme_.degree();
    const double t0 = mesh_.start(k);
    const double ta = std::pow(tau, alpha_);
    const Eigen::MatrixXd& mass = system_.mass();
    const Eigen::MatrixXd& stiff = system_.stiff();

    auto collocation_rhs = [&](int l) -> Eigen::VectorXd {
      const double offset = scheme_.theta(l) * tau;
      const Eigen::VectorXd u = u0_ + history(k, offset);
      return load(t0 + offset) - stiff * u;
    };

    Eigen::MatrixXd block(m + 1, n);
    if (!mats_.reduced) {
      const Eigen::MatrixXd mem = mats_.D1.asDiagonal() * mats_.W * mats_.D2.asDiagonal();
      Eigen::VectorXd rhs(n * (m + 1));
      for (int l = 0; l <= m; ++l) rhs.segment(l * n, n) = collocation_rhs(l);
      const Eigen::VectorXd v = solve_block(mats_.W, mem, ta, rhs);
      for (int j = 0; j <= m; ++j) block.row(j) = v.segment(j * n, n).transpose();
      return block;
    }

    const Eigen::VectorXd w0 = initial_w(k);
    block.row(0) = w0.transpose();
    if (m == 0) return block;
    const Eigen::MatrixXd mem = mats_.D1hat.asDiagonal() * mats_.What * mats_.D2hat.asDiagonal();
    const Eigen::VectorXd mass_w0 = mass * w0;
    const Eigen::VectorXd stiff_w0 = stiff * w0;
    const double c0 = mats_.D2[0];
    Eigen::VectorXd rhs(n * m);
    for (int l = 1; l <= m; ++l) {
      const double th = scheme_.theta(l);
      rhs.segment((l - 1) * n, n) =
          (collocation_rhs(l) - mass_w0 - (ta * c0 * std::pow(th, alpha_)) * stiff_w0) / th;
    }
    const Eigen::VectorXd v = solve_block(mats_.What, mem, ta, rhs);
    for (int j = 1; j <= m; ++j) block.row(j) = v.segment((j - 1) * n, n).transpose();
    return block;
  }

  /// Same block via the (Stiff, Mass) eigenbasis: one small dense solve per mode.
  /// Requires a symmetric operator (b = 0) and theta_0 > 0.
  Eigen::MatrixXd solve_interval_modal(double tau) const {
    if (mats_.reduced) throw std::logic_error("solve_interval_modal: theta_0 > 0 only");
    const std::size_t k = intervals();
    const int m = scheme_.degree();
    const double ta = std::pow(tau, alpha_);
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(system_.stiff(), system_.mass());
    const Eigen::MatrixXd& psi = es.eigenvectors();  // psi^T Mass psi = I
    Eigen::MatrixXd rhs_modal(m + 1, system_.dofs());
    for (int l = 0; l <= m; ++l) {
      const double offset = scheme_.theta(l) * tau;
      const Eigen::VectorXd u = u0_ + history(k, offset);
      rhs_modal.row(l) = (psi.transpose() * (load(mesh_.start(k) + offset) - system_.stiff() * u)).transpose();
    }
    const Eigen::MatrixXd mem = mats_.D1.asDiagonal() * mats_.W * mats_.D2.asDiagonal();
    Eigen::MatrixXd coeff_modal(m + 1, system_.dofs());
    for (Eigen::Index q = 0; q < system_.dofs(); ++q) {
      const Eigen::MatrixXd a = mats_.W + ta * es.eigenvalues()[q] * mem;
      coeff_modal.col(q) = a.partialPivLu().solve(rhs_modal.col(q));
    }
    return coeff_modal * psi.transpose();
  }

  void push_interval(double tau, Eigen::MatrixXd block) {
    if (block.rows() != scheme_.degree() + 1 || block.cols() != system_.dofs())
      throw std::invalid_argument("push_interval: block shape mismatch");
    if (mesh_.start(intervals()) + tau >= problem_.T * (1.0 - 1e-14) && mesh_.start(intervals()) < problem_.T)
      mesh_.append_until(std::max(problem_.T, mesh_.start(intervals()) + tau));
    else
      mesh_.append(tau);
    field_.blocks.push_back(std::move(block));
    scales_.push_back(std::pow(mesh_.tau(intervals() - 1), alpha_) * kernel_.inv_gamma_alpha());
  }

  void pop_interval() {
    if (intervals() == 0) return;
    mesh_.pop();
    field_.blocks.pop_back();
    scales_.pop_back();
    if (intervals() == 0) head_.reset();
  }

  /// Solve and commit the next interval.
  void step(double tau) { push_interval(tau, solve_interval(tau)); }

  /// First interval (0, tau1] by the L0 scheme: u constant on (0, t1], so
  /// w = (u1 - u0) t^-alpha / Gamma(1-alpha) there, and
  /// (g Mass + Stiff) u1 = g Mass u0 + b(t1) with g = t1^-alpha / Gamma(1-alpha).
  /// Returns u(t1).
  Eigen::VectorXd l0_first_interval(double tau1) {
    if (intervals() != 0) throw std::logic_error("l0_first_interval: only for the first interval");
    if (!(alpha_ < 1.0)) throw std::invalid_argument("l0_first_interval: requires alpha < 1");
    if (!(tau1 > 0.0)) throw std::invalid_argument("l0_first_interval: tau must be positive");
    const double g = std::pow(tau1, -alpha_) / gamma_fn(1.0 - alpha_);
    const Eigen::MatrixXd a = g * system_.mass() + system_.stiff();
    const Eigen::VectorXd rhs = g * (system_.mass() * u0_) + load(tau1);
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(a);
    const Eigen::VectorXd u1 = lu.solve(rhs);
    push_interval(tau1, Eigen::MatrixXd::Zero(scheme_.degree() + 1, system_.dofs()));
    head_ = SingularHead{mesh_.end(0), u1 - u0_};
    return u1;
  }

  // Evaluation at t = t_k + sigma tau_k. Interval k owns its closed end points, so
  // sigma = 0 gives the right limit at t_k and sigma = 1 the left limit at t_{k+1}.

  Eigen::VectorXd w_at(std::size_t k, double sigma) const {
    Eigen::VectorXd w = eval_poly(field_.blocks.at(k), sigma);
    if (head_ && k == 0) {
      const double t = sigma * mesh_.tau(0);
      w += (std::pow(t, -alpha_) / gamma_fn(1.0 - alpha_)) * head_->jump;
    }
    return w;
  }

  Eigen::VectorXd u_at(std::size_t k, double sigma) const {
    if (head_ && k == 0) return sigma == 0.0 ? u0_ : Eigen::VectorXd(u0_ + head_->jump);
    Eigen::VectorXd u = u0_ + history(k, sigma * mesh_.tau(k));
    std::vector<double> g(kernel_.degree() + 1);
    kernel_.local_weights(sigma, g);
    const Eigen::Map<const Eigen::VectorXd> gv(g.data(), static_cast<Eigen::Index>(g.size()));
    u.noalias() += std::pow(mesh_.tau(k), alpha_) * (field_.blocks[k].transpose() * gv);
    return u;
  }

  /// u_tau(., t) = u0 + J^alpha w_tau; continuous in t.
  Eigen::VectorXd u_at(double t) const {
    if (t == 0.0) return u0_;
    auto [k, sigma] = locate(t);
    return u_at(k, sigma);
  }

  /// Discrete residual R = w + L_h u - P_h f with L_h = Mass^-1 Stiff and P_h f = Mass^-1 b(t).
  Eigen::VectorXd residual_dofs(std::size_t k, double sigma) const {
    const double t = mesh_.start(k) + sigma * mesh_.tau(k);
    return w_at(k, sigma) + discrete_op_ * u_at(k, sigma) - mass_llt_.solve(load(t));
  }

  double norm(const Eigen::VectorXd& dofs, NormKind kind) const {
    if (kind == NormKind::L2) return std::sqrt(std::max(0.0, dofs.dot(system_.mass() * dofs)));
    return (system_.sample_matrix() * dofs).cwiseAbs().maxCoeff();
  }

  double residual_norm(std::size_t k, double sigma, NormKind kind) const { return norm(residual_dofs(k, sigma), kind); }

  double residual_norm(double t, NormKind kind) const {
    if (!(t > 0.0)) throw std::domain_error("residual_norm: t must be positive");
    auto [k, sigma] = locate(t);
    return residual_norm(k, sigma, kind);
  }

  /// Interval and relative position of t with the (t_k, t_{k+1}] convention.
  std::pair<std::size_t, double> locate(double t) const {
    const std::size_t k = mesh_.locate(std::min(t, mesh_.final_time()));
    return {k, std::clamp((t - mesh_.start(k)) / mesh_.tau(k), 0.0, 1.0)};
  }

 private:
  Eigen::VectorXd solve_block(const Eigen::MatrixXd& w, const Eigen::MatrixXd& mem, double ta,
                              const Eigen::VectorXd& rhs) const {
    const Eigen::Index n = system_.dofs();
    const Eigen::Index r = w.rows();
    Eigen::MatrixXd a(n * r, n * r);
    for (Eigen::Index l = 0; l < r; ++l)
      for (Eigen::Index j = 0; j < r; ++j)
        a.block(l * n, j * n, n, n) = w(l, j) * system_.mass() + (ta * mem(l, j)) * system_.stiff();
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(a);
    const double rc = lu.rcond();
    if (!(rc > 1e-16)) {
      std::ostringstream msg;
      msg << "solve_interval: block system numerically singular (reciprocal condition estimate " << rc << ")";
      throw SolverError(msg.str());
    }
    return lu.solve(rhs);
  }

  CollocationScheme scheme_;
  double alpha_;
  CollocMatrices mats_;
  SpatialSystem system_;
  Problem problem_;
  HistoryKernel kernel_;
  TemporalMesh mesh_;
  PiecewisePolyField field_;
  std::vector<double> scales_;  // tau_i^alpha / Gamma(alpha)
  std::optional<SingularHead> head_;
  Eigen::VectorXd u0_;
  Eigen::LLT<Eigen::MatrixXd> mass_llt_;
  Eigen::MatrixXd discrete_op_;
};

struct StepControls {
  double tau_init = 0.0;  // <= 0: start from the whole remaining horizon
  double growth = 2.0;
  double shrink = 0.5;
  int max_rejections = 60;
  int samples = 16;
  bool l0_first = false;

  void validate() const {
    if (!(growth >= 1.0)) throw std::invalid_argument("StepControls: growth factor must be >= 1");
    if (!(shrink > 0.0 && shrink < 1.0)) throw std::invalid_argument("StepControls: shrink factor must lie in (0,1)");
    if (max_rejections < 0 || samples < 1) throw std::invalid_argument("StepControls: invalid rejection/sample counts");
  }
};

/// Residual sample positions sigma_i = i / S, i = 1..S, covering (t_{k-1}, t_k].
inline std::vector<double> residual_samples(int s) {
  std::vector<double> v(static_cast<std::size_t>(s));
  for (int i = 0; i < s; ++i) v[static_cast<std::size_t>(i)] = (i + 1.0) / s;
  return v;
}

struct IntervalLog {
  double t_end = 0.0;
  double tau = 0.0;
  int rejections = 0;
  double max_ratio = 0.0;  // max residual / barrier over the samples
};

struct RunLog {
  std::vector<IntervalLog> intervals;
  int solves = 0;
};

/// Largest residual-to-barrier ratio over the sample points of interval k.
inline double interval_ratio(const SolverState& state, const BarrierSpec& barrier, std::size_t k,
                             std::span<const double> samples) {
  const double tau1 = state.mesh().end(0);
  double worst = 0.0;
  for (double sigma : samples) {
    const double t = state.mesh().start(k) + sigma * state.mesh().tau(k);
    const double r = state.residual_norm(k, sigma, barrier.norm);
    worst = std::max(worst, r / barrier_value(barrier, state.alpha(), t, tau1));
  }
  return worst;
}

/// Adaptive stepping to T: each candidate interval is accepted iff the residual
/// stays below the barrier at every sample point; rejected steps shrink, accepted
/// steps propose growth * tau for the next interval.
inline RunLog adapt_run(SolverState& state, const BarrierSpec& barrier, const StepControls& controls) {
  barrier.validate();
  controls.validate();
  const double T = state.problem().T;
  const auto samples = residual_samples(controls.samples);
  RunLog log;
  double tau = controls.tau_init > 0.0 ? controls.tau_init : T - state.mesh().final_time();
  while (state.mesh().final_time() < T) {
    const double t0 = state.mesh().final_time();
    int rejections = 0;
    while (true) {
      tau = std::min(tau, T - t0);
      const std::size_t k = state.intervals();
      if (controls.l0_first && k == 0)
        state.l0_first_interval(tau);
      else
        state.step(tau);
      ++log.solves;
      const double ratio = interval_ratio(state, barrier, k, samples);
      if (ratio <= 1.0) {
        log.intervals.push_back({state.mesh().end(k), state.mesh().tau(k), rejections, ratio});
        break;
      }
      state.pop_interval();
      if (++rejections > controls.max_rejections) {
        std::ostringstream msg;
        msg << "adapt_run: step at t = " << t0 << " rejected " << rejections << " times (last tau = " << tau
            << ", residual/barrier = " << ratio << ")";
        throw SolverError(msg.str());
      }
      tau *= controls.shrink;
    }
    tau = controls.growth * state.mesh().tau(state.intervals() - 1);
  }
  return log;
}

}  // namespace fraccolloc
