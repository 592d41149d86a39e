// fraccolloc command-line front end: solve, adapt, spectrum, convergence, selftest.

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "fraccolloc/bench.hpp"
#include "fraccolloc/spectral.hpp"

namespace fs = std::filesystem;
using namespace fraccolloc;

namespace {

constexpr int kExitNumerical = 1;
constexpr int kExitUsage = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Options {
  std::string config;
  std::string out_dir = "out";
  std::string problem = "ex1";
  double alpha = 0.4;
  int m = 4;
  std::string points = "gauss-legendre";
  double tol = 1e-4;
  std::string barrier = "r0";
  std::string norm = "linf";
  int cells = 10;
  int fe_degree = 2;
  double T = 1.0;
  double tau_init = 0.0;
  double growth = 2.0;
  double shrink = 0.5;
  int max_rejections = 60;
  int samples = 16;
  int quad_order = 0;
  bool l0_first = false;
  int steps = 10;
  int alpha_grid = 199;
  bool coeffs = false;
  std::vector<double> tols{1e-2, 1e-3, 1e-4, 1e-5, 1e-6};
};

void add_run_flags(CLI::App* sub, Options& o) {
  sub->add_option("--problem", o.problem, "test problem: ex1, ex2, zero")->capture_default_str();
  sub->add_option("--alpha", o.alpha, "fractional order in (0,1)")->capture_default_str();
  sub->add_option("--m", o.m, "collocation degree")->capture_default_str();
  sub->add_option("--points", o.points, "point family")->capture_default_str();
  sub->add_option("--cells", o.cells, "spatial cells on (0,1)")->capture_default_str();
  sub->add_option("--fe-degree", o.fe_degree, "finite element degree (1 or 2)")->capture_default_str();
  sub->add_option("--T", o.T, "final time")->capture_default_str();
  sub->add_option("--samples", o.samples, "residual/error samples per interval")->capture_default_str();
  sub->add_option("--quad-order", o.quad_order, "history quadrature order (0: automatic)")->capture_default_str();
}

void add_adapt_flags(CLI::App* sub, Options& o) {
  sub->add_option("--tol", o.tol, "error tolerance")->capture_default_str();
  sub->add_option("--barrier", o.barrier, "residual barrier: r0 or r1")->capture_default_str();
  sub->add_option("--norm", o.norm, "spatial norm: linf or l2")->capture_default_str();
  sub->add_option("--tau-init", o.tau_init, "first candidate step (<= 0: T)")->capture_default_str();
  sub->add_option("--growth", o.growth, "step growth factor after acceptance")->capture_default_str();
  sub->add_option("--shrink", o.shrink, "step shrink factor after rejection")->capture_default_str();
  sub->add_option("--max-rejections", o.max_rejections, "rejections allowed per interval")->capture_default_str();
  sub->add_flag("--l0-first", o.l0_first, "use the singular first-interval solution");
}

void add_common_flags(CLI::App* sub, Options& o) {
  sub->add_option("--config", o.config, "JSON file mirroring the flags; flags take precedence");
  sub->add_option("--out-dir", o.out_dir, "output directory")->capture_default_str();
}

/// Fills options not given on the command line from a flat JSON object.
void apply_config(CLI::App* sub, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw UsageError("config file '" + path + "': " + e.what());
  }
  if (!j.is_object()) throw UsageError("config file must hold a JSON object");
  auto as_text = [](const nlohmann::json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); };
  for (const auto& [key, value] : j.items()) {
    if (key == "config") throw UsageError("config file may not name another config file");
    CLI::Option* opt = sub->get_option_no_throw("--" + key);
    if (opt == nullptr) throw UsageError("unknown config key '" + key + "' for subcommand " + sub->get_name());
    if (opt->count() > 0) continue;
    try {
      if (value.is_array()) {
        for (const auto& v : value) opt->add_result(as_text(v));
      } else if (value.is_boolean()) {
        if (!value.get<bool>()) continue;
        opt->add_result("true");
      } else {
        opt->add_result(as_text(value));
      }
      opt->run_callback();
    } catch (const CLI::Error& e) {
      throw UsageError("config key '" + key + "': " + e.what());
    }
  }
}

unsigned thread_cap() {
  unsigned n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("FRACCOLLOC_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || v < 1) throw UsageError("FRACCOLLOC_THREADS must be a positive integer");
    n = std::min<unsigned>(n, static_cast<unsigned>(v));
  }
  return n;
}

AdaptConfig to_config(const Options& o) {
  AdaptConfig c;
  c.problem = o.problem;
  c.alpha = o.alpha;
  c.m = o.m;
  c.family = parse_family(o.points);
  c.tol = o.tol;
  if (o.barrier == "r0") c.barrier = BarrierKind::R0;
  else if (o.barrier == "r1") c.barrier = BarrierKind::R1;
  else throw UsageError("--barrier must be r0 or r1");
  if (o.norm == "linf") c.norm = NormKind::Linf;
  else if (o.norm == "l2") c.norm = NormKind::L2;
  else throw UsageError("--norm must be linf or l2");
  c.cells = o.cells;
  c.fe_degree = o.fe_degree;
  c.T = o.T;
  c.controls.tau_init = o.tau_init;
  c.controls.growth = o.growth;
  c.controls.shrink = o.shrink;
  c.controls.max_rejections = o.max_rejections;
  c.controls.samples = o.samples;
  c.controls.l0_first = o.l0_first;
  c.quad_order = o.quad_order;
  return c;
}

std::ofstream open_output(const fs::path& dir, const std::string& name) {
  fs::create_directories(dir);
  std::ofstream os(dir / name);
  if (!os) throw std::runtime_error("cannot write " + (dir / name).string());
  return os;
}

void write_run(const Options& o, const std::string& stem, const RunRecord& rec) {
  open_output(o.out_dir, stem + "_run.json") << rec.to_json().dump(2) << '\n';
  auto csv = open_output(o.out_dir, stem + "_mesh.csv");
  write_mesh_csv(csv, rec);
  std::cout << rec.scheme << " " << rec.problem << " alpha=" << format_double(rec.alpha) << " M=" << rec.M
            << " error_LinfLinf=" << format_double(rec.error_linf_linf) << '\n';
}

int cmd_solve(const Options& o) {
  write_run(o, "solve", run_uniform(to_config(o), o.steps).record);
  return 0;
}

int cmd_adapt(const Options& o) {
  const auto res = run_adaptive(to_config(o));
  write_run(o, "adapt", res.record);
  if (o.barrier == "r0" && !(res.record.error_linf_linf <= o.tol)) {
    std::cerr << "error: measured error " << format_double(res.record.error_linf_linf) << " exceeds TOL "
              << format_double(o.tol) << '\n';
    return kExitNumerical;
  }
  return 0;
}

int cmd_spectrum(const Options& o) {
  const auto scheme = CollocationScheme::make(parse_family(o.points), o.m);
  const auto grid = default_alpha_grid(o.alpha_grid);
  const auto rep = sweep(scheme, grid, o.coeffs);
  auto csv = open_output(o.out_dir, "spectrum.csv");
  write_spectrum_csv(csv, rep);
  for (const auto& w : rep.warnings) std::cerr << "warning: " << w << '\n';
  for (const auto& f : rep.failures) std::cerr << "error: alpha=" << format_double(f.alpha) << ": " << f.message << '\n';
  if (!rep.failures.empty()) return kExitNumerical;
  std::cout << rep.scheme << (rep.well_posed() ? " well-posed" : " NOT well-posed") << " on " << grid.size()
            << " alpha values\n";
  return 0;
}

int cmd_convergence(const Options& o) {
  std::vector<RunRecord> runs;
  const auto tab = convergence_study(to_config(o), o.tols, thread_cap(), &runs);
  auto csv = open_output(o.out_dir, "convergence.csv");
  write_convergence_csv(csv, tab);
  nlohmann::ordered_json j;
  j["fitted_rate"] = tab.fitted_rate;
  j["warnings"] = tab.warnings;
  j["runs"] = nlohmann::ordered_json::array();
  for (const auto& r : runs) j["runs"].push_back(r.to_json());
  open_output(o.out_dir, "convergence.json") << j.dump(2) << '\n';
  for (const auto& w : tab.warnings) std::cerr << "warning: " << w << '\n';
  std::cout << "fitted rate " << format_double(tab.fitted_rate) << '\n';
  return 0;
}

/// Fast in-process invariant checks; prints one line per check.
int cmd_selftest() {
  int failed = 0;
  auto check = [&](const std::string& name, bool ok, const std::string& detail) {
    std::cout << (ok ? "ok   " : "FAIL ") << name << " (" << detail << ")\n";
    if (!ok) ++failed;
  };
  {
    std::mt19937_64 gen(1);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double worst = 0.0;
    for (double alpha : {0.2, 0.4, 0.8}) {
      const auto ex1 = problem_ex1(alpha);
      for (int i = 0; i < 100; ++i) {
        const double x = u(gen), t = u(gen);
        const double shape = std::tgamma(alpha + 1.0) - 2.0 / std::tgamma(3.0 - alpha) * std::pow(t, 2.0 - alpha);
        const double f = shape * x * (1.0 - x) + 2.0 * (std::pow(t, alpha) - t * t + 1.0);
        worst = std::max(worst, std::abs(ex1.f(x, t) - f));
      }
    }
    check("manufactured forcing", worst <= 1e-11, "max deviation " + format_double(worst));
  }
  {
    const double alpha = 0.3;
    std::vector<PowerTerm> modes{{1.0, 0.0}};
    for (int j = 0; j <= 2; ++j) modes.push_back({frac_coeff(j, alpha), j + alpha});
    const auto tp = manufactured_problem("poly", alpha, modes);
    double worst = 0.0;
    for (auto fam : {PointFamily::GaussLegendre, PointFamily::GaussLobatto}) {
      SolverState st(CollocationScheme::make(fam, 2), alpha, assemble(0.0, 1.0, 10, 2), tp.problem());
      for (double tau : {0.2, 0.5, 0.3}) st.step(tau);
      worst = std::max(worst, measure_error(st, tp));
    }
    check("polynomial exactness", worst <= 1e-9, "max error " + format_double(worst));
  }
  {
    const auto rep = sweep(CollocationScheme::make(PointFamily::GaussLobatto, 5), default_alpha_grid(199));
    check("spectrum well-posed (gauss-lobatto, m=5)", rep.well_posed(), std::to_string(rep.alpha_grid.size()) + " alphas");
  }
  {
    AdaptConfig cfg;
    cfg.m = 2;
    cfg.tol = 1e-3;
    const auto rec = run_adaptive(cfg).record;
    check("adaptive guarantee (ex1, m=2, TOL=1e-3)", rec.error_linf_linf <= cfg.tol,
          "M=" + std::to_string(rec.M) + " error " + format_double(rec.error_linf_linf));
  }
  return failed == 0 ? 0 : kExitNumerical;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Collocation time-stepping for Caputo subdiffusion"};
  app.require_subcommand(1);
  Options o;

  auto* solve = app.add_subcommand("solve", "fixed uniform mesh run");
  add_common_flags(solve, o);
  add_run_flags(solve, o);
  solve->add_option("--steps", o.steps, "number of uniform intervals")->capture_default_str();

  auto* adapt = app.add_subcommand("adapt", "adaptive run with a residual barrier");
  add_common_flags(adapt, o);
  add_run_flags(adapt, o);
  add_adapt_flags(adapt, o);

  auto* spectrum = app.add_subcommand("spectrum", "eigenvalue sweep over alpha");
  add_common_flags(spectrum, o);
  spectrum->add_option("--m", o.m, "collocation degree")->capture_default_str();
  spectrum->add_option("--points", o.points, "point family")->capture_default_str();
  spectrum->add_option("--alpha-grid", o.alpha_grid, "number of alpha values on [0.005, 1]")->capture_default_str();
  spectrum->add_flag("--coeffs", o.coeffs, "append characteristic coefficients a_j");

  auto* convergence = app.add_subcommand("convergence", "adaptive runs over a TOL list with fitted rate");
  add_common_flags(convergence, o);
  add_run_flags(convergence, o);
  add_adapt_flags(convergence, o);
  convergence->add_option("--tols", o.tols, "tolerances")->capture_default_str();

  auto* selftest = app.add_subcommand("selftest", "run the built-in invariant checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << app.help();
    return kExitUsage;
  }

  CLI::App* active = app.get_subcommands().front();
  try {
    if (!o.config.empty()) apply_config(active, o.config);
    if (active == solve) return cmd_solve(o);
    if (active == adapt) return cmd_adapt(o);
    if (active == spectrum) return cmd_spectrum(o);
    if (active == convergence) return cmd_convergence(o);
    if (active == selftest) return cmd_selftest();
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n' << active->help();
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: invalid input: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  }
  return kExitUsage;
}
