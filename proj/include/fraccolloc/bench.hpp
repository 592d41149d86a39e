#pragma once

// Manufactured test problems, exact-error measurement, adaptive run records
// and convergence studies.

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <ostream>
#include <atomic>
#include <exception>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "fraccolloc/colloc_core.hpp"
#include "fraccolloc/csv.hpp"
#include "fraccolloc/fractional.hpp"
#include "fraccolloc/spatial_fem.hpp"
#include "fraccolloc/stepper.hpp"

namespace fraccolloc {

/// u(x,t) = sum_k coeff_k t^gamma_k * x(1-x) on (0,1) with L = -d2/dx2.
struct TestProblem {
  std::string name;
  double alpha = 0.5;
  double T = 1.0;
  std::vector<PowerTerm> time_modes;  // u = (sum c t^e) x(1-x)
  std::function<double(double, double)> u_exact;
  std::function<double(double)> u0;
  std::function<double(double, double)> f;
  std::vector<double> singular_exponents;  // exponents of t present in d_t^alpha u

  Problem problem() const { return {u0, f, T}; }
};

/// Builds u = (sum c_k t^{e_k}) x(1-x) with f = d_t^alpha u - u_xx from the monomial Caputo rule.
inline TestProblem manufactured_problem(std::string name, double alpha, std::vector<PowerTerm> modes, double T = 1.0) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("manufactured_problem: alpha must lie in (0,1]");
  TestProblem p;
  p.name = std::move(name);
  p.alpha = alpha;
  p.T = T;
  p.time_modes = modes;
  std::vector<PowerTerm> caputo;
  for (const auto& mode : modes) {
    const auto d = caputo_monomial(mode.exponent, alpha);
    if (d.coefficient != 0.0) {
      caputo.push_back({mode.coefficient * d.coefficient, d.exponent});
      if (std::find(p.singular_exponents.begin(), p.singular_exponents.end(), d.exponent) == p.singular_exponents.end())
        p.singular_exponents.push_back(d.exponent);
    }
  }
  auto sum = [](const std::vector<PowerTerm>& terms, double t) {
    double s = 0.0;
    for (const auto& term : terms) s += term.coefficient * (term.exponent == 0.0 ? 1.0 : std::pow(t, term.exponent));
    return s;
  };
  p.u_exact = [modes, sum](double x, double t) { return sum(modes, t) * x * (1.0 - x); };
  p.u0 = [modes, sum](double x) { return sum(modes, 0.0) * x * (1.0 - x); };
  p.f = [modes, caputo, sum](double x, double t) { return sum(caputo, t) * x * (1.0 - x) + 2.0 * sum(modes, t); };
  return p;
}

/// u = (t^alpha - t^2 + 1) x(1-x).
inline TestProblem problem_ex1(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("problem_ex1: alpha must lie in (0,1)");
  return manufactured_problem("ex1", alpha, {{1.0, alpha}, {-1.0, 2.0}, {1.0, 0.0}});
}

/// u = (t^alpha - t^(2 alpha) + 1) x(1-x).
inline TestProblem problem_ex2(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("problem_ex2: alpha must lie in (0,1)");
  return manufactured_problem("ex2", alpha, {{1.0, alpha}, {-1.0, 2.0 * alpha}, {1.0, 0.0}});
}

/// f = 0, u0 = 0.
inline TestProblem problem_zero(double alpha) {
  TestProblem p = manufactured_problem("zero", alpha, {});
  p.name = "zero";
  return p;
}

inline TestProblem problem_by_name(const std::string& name, double alpha) {
  if (name == "ex1") return problem_ex1(alpha);
  if (name == "ex2") return problem_ex2(alpha);
  if (name == "zero") return problem_zero(alpha);
  throw std::invalid_argument("unknown problem '" + name + "' (expected ex1, ex2 or zero)");
}

/// Relative time points of interval k used for error measurement: the residual
/// samples, the collocation points and both end points.
inline std::vector<double> error_time_points(const CollocationScheme& scheme, int samples) {
  std::vector<double> s = residual_samples(samples);
  s.insert(s.end(), scheme.theta().begin(), scheme.theta().end());
  s.push_back(0.0);
  s.push_back(1.0);
  std::sort(s.begin(), s.end());
  s.erase(std::unique(s.begin(), s.end()), s.end());
  return s;
}

/// max over error_time_points of every interval and over the spatial samples of |u_tau - u|.
inline double measure_error(const SolverState& state, const TestProblem& problem, int samples = 16) {
  const auto& sys = state.system();
  const auto& xs = sys.sample_points();
  const auto sigmas = error_time_points(state.scheme(), samples);
  double err = 0.0;
  auto compare = [&](const Eigen::VectorXd& u, double t) {
    const Eigen::VectorXd vals = sys.sample_matrix() * u;
    for (std::size_t p = 0; p < xs.size(); ++p)
      err = std::max(err, std::abs(vals[static_cast<Eigen::Index>(p)] - problem.u_exact(xs[p], t)));
  };
  compare(state.u0_dofs(), 0.0);
  for (std::size_t k = 0; k < state.intervals(); ++k) {
    for (double sigma : sigmas) {
      if (sigma == 0.0) continue;  // equals the left neighbour's sigma = 1 value (u is continuous)
      compare(state.u_at(k, sigma), state.mesh().start(k) + sigma * state.mesh().tau(k));
    }
  }
  return err;
}

struct AdaptConfig {
  std::string problem = "ex1";
  double alpha = 0.4;
  int m = 4;
  PointFamily family = PointFamily::GaussLegendre;
  double tol = 1e-4;
  BarrierKind barrier = BarrierKind::R0;
  NormKind norm = NormKind::Linf;
  int cells = 10;
  int fe_degree = 2;
  double T = 1.0;
  StepControls controls;
  int quad_order = 0;
};

struct RunRecord {
  std::string scheme;
  std::string problem;
  double alpha = 0.0;
  int m = 0;
  std::string barrier;
  double tol = 0.0;
  std::size_t M = 0;
  int solves = 0;
  double error_linf_linf = 0.0;
  double wall_time = 0.0;
  std::vector<IntervalLog> intervals;

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["scheme"] = scheme;
    j["problem"] = problem;
    j["alpha"] = alpha;
    j["m"] = m;
    j["barrier"] = barrier;
    j["tol"] = tol;
    j["M"] = M;
    j["solves"] = solves;
    j["error_LinfLinf"] = error_linf_linf;
    j["wall_time"] = wall_time;
    auto& arr = j["intervals"] = nlohmann::ordered_json::array();
    for (const auto& iv : intervals)
      arr.push_back({{"t_end", iv.t_end}, {"tau", iv.tau}, {"rejections", iv.rejections}, {"max_ratio", iv.max_ratio}});
    return j;
  }
};

/// Per-interval trace: k,t_start,t_end,tau,rejections,max_residual_ratio.
inline void write_mesh_csv(std::ostream& os, const RunRecord& rec) {
  os << "k,t_start,t_end,tau,rejections,max_residual_ratio\n";
  double t0 = 0.0;
  for (std::size_t k = 0; k < rec.intervals.size(); ++k) {
    const auto& iv = rec.intervals[k];
    os << k << ',' << format_double(t0) << ',' << format_double(iv.t_end) << ',' << format_double(iv.tau) << ','
       << iv.rejections << ',' << format_double(iv.max_ratio) << '\n';
    t0 = iv.t_end;
  }
}

inline BarrierSpec make_barrier(const AdaptConfig& cfg, const SpatialSystem& sys) {
  BarrierSpec spec;
  spec.kind = cfg.barrier;
  spec.tol = cfg.tol;
  spec.norm = cfg.norm;
  if (cfg.norm == NormKind::L2) {
    spec.lambda = smallest_generalized_eigenvalue(sys);
    spec.omega = 0.0;
  } else {
    const auto pair = barrier_pair(sys);
    spec.lambda = pair.lambda;
    spec.omega = pair.omega;
  }
  return spec;
}

struct AdaptResult {
  RunRecord record;
  SolverState state;
};

inline AdaptResult run_adaptive(const AdaptConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  TestProblem tp = problem_by_name(cfg.problem, cfg.alpha);
  tp.T = cfg.T;
  auto sys = assemble(0.0, 1.0, cfg.cells, cfg.fe_degree);
  const BarrierSpec spec = make_barrier(cfg, sys);
  SolverState state(CollocationScheme::make(cfg.family, cfg.m), cfg.alpha, std::move(sys), tp.problem(), cfg.quad_order);
  const RunLog log = adapt_run(state, spec, cfg.controls);
  RunRecord rec;
  rec.scheme = state.scheme().describe();
  rec.problem = tp.name;
  rec.alpha = cfg.alpha;
  rec.m = cfg.m;
  rec.barrier = cfg.barrier == BarrierKind::R0 ? "r0" : "r1";
  rec.tol = cfg.tol;
  rec.M = state.intervals();
  rec.solves = log.solves;
  rec.intervals = log.intervals;
  rec.error_linf_linf = measure_error(state, tp, cfg.controls.samples);
  rec.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {std::move(rec), std::move(state)};
}

struct ConvergenceRow {
  double tol = 0.0;
  std::size_t M = 0;
  double error = 0.0;
  double rate = 0.0;  // local slope log(err) vs log(M) to the previous row; NaN for the first
};

struct ConvergenceTable {
  std::vector<ConvergenceRow> rows;
  double fitted_rate = 0.0;
  std::vector<std::string> warnings;
};

/// Least-squares slope of y against x.
inline double ls_slope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("ls_slope: need at least two paired points");
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  const double den = n * sxx - sx * sx;
  if (!(std::abs(den) > 0.0)) throw std::domain_error("ls_slope: degenerate abscissae");
  return (n * sxy - sx * sy) / den;
}

/// Table and fitted slope from runs[i] made at tols[i]; errors of zero are skipped in the fit.
inline ConvergenceTable convergence_table(std::span<const double> tols, std::span<const RunRecord> runs) {
  if (tols.size() < 3) throw std::invalid_argument("convergence_study: need at least 3 tolerances");
  const auto [lo, hi] = std::minmax_element(tols.begin(), tols.end());
  if (!(*hi / *lo >= 100.0 * (1.0 - 1e-12))) throw std::invalid_argument("convergence_study: tolerances must span at least 2 decades");
  ConvergenceTable tab;
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    ConvergenceRow row{tols[i], runs[i].M, runs[i].error_linf_linf, std::numeric_limits<double>::quiet_NaN()};
    if (row.error > 0.0) {
      if (!lx.empty() && runs[i].M != runs[i - 1].M)
        row.rate = (std::log(row.error) - ly.back()) / (std::log(static_cast<double>(row.M)) - lx.back());
      lx.push_back(std::log(static_cast<double>(row.M)));
      ly.push_back(std::log(row.error));
    }
    if (i > 0) {
      const bool tighter = tols[i] < tols[i - 1];
      if ((tighter && runs[i].M < runs[i - 1].M) || (!tighter && runs[i].M > runs[i - 1].M))
        tab.warnings.push_back("non-monotone M vs TOL at TOL = " + format_double(tols[i]));
    }
    tab.rows.push_back(row);
  }
  if (lx.size() < 2) throw std::domain_error("convergence_study: degenerate problem (zero errors), no rate");
  tab.fitted_rate = ls_slope(lx, ly);
  return tab;
}

inline void write_convergence_csv(std::ostream& os, const ConvergenceTable& tab) {
  os << "tol,M,error,rate\n";
  for (const auto& r : tab.rows)
    os << format_double(r.tol) << ',' << r.M << ',' << format_double(r.error) << ',' << format_double(r.rate) << '\n';
}

/// Runs one adaptive solve per TOL on up to `threads` workers; rows stay ordered by TOL.
inline ConvergenceTable convergence_study(const AdaptConfig& base, std::span<const double> tols, unsigned threads = 1,
                                          std::vector<RunRecord>* records = nullptr) {
  std::vector<RunRecord> runs(tols.size());
  std::vector<std::exception_ptr> errors(tols.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < tols.size(); i = next++) {
      try {
        AdaptConfig cfg = base;
        cfg.tol = tols[i];
        runs[i] = run_adaptive(cfg).record;
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const unsigned n = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(tols.size())));
  std::vector<std::thread> pool;
  for (unsigned w = 1; w < n; ++w) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  auto tab = convergence_table(tols, runs);
  if (records) *records = std::move(runs);
  return tab;
}

/// Non-adaptive run on `steps` uniform intervals of (0,T]; no barrier, no rejections.
inline AdaptResult run_uniform(const AdaptConfig& cfg, int steps) {
  if (steps < 1) throw std::invalid_argument("run_uniform: steps must be >= 1");
  const auto start = std::chrono::steady_clock::now();
  TestProblem tp = problem_by_name(cfg.problem, cfg.alpha);
  tp.T = cfg.T;
  SolverState state(CollocationScheme::make(cfg.family, cfg.m), cfg.alpha, assemble(0.0, 1.0, cfg.cells, cfg.fe_degree),
                    tp.problem(), cfg.quad_order);
  RunRecord rec;
  for (int k = 0; k < steps; ++k) {
    state.step(cfg.T / steps);
    rec.intervals.push_back({state.mesh().final_time(), state.mesh().tau(state.intervals() - 1), 0,
                             std::numeric_limits<double>::quiet_NaN()});
  }
  rec.scheme = state.scheme().describe();
  rec.problem = tp.name;
  rec.alpha = cfg.alpha;
  rec.m = cfg.m;
  rec.barrier = "none";
  rec.tol = 0.0;
  rec.M = state.intervals();
  rec.solves = steps;
  rec.error_linf_linf = measure_error(state, tp, cfg.controls.samples);
  rec.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {std::move(rec), std::move(state)};
}

}  // namespace fraccolloc
