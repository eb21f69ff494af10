// Batch front end: solve, check, sweep.
//
// Exit codes: 0 success, 2 a solver did not converge (or a check failed),
// 1 configuration or input error.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "steiner/barrier.hpp"
#include "steiner/calibration.hpp"
#include "steiner/checks.hpp"
#include "steiner/convex.hpp"
#include "steiner/io.hpp"
#include "steiner/phasefield.hpp"

namespace fs = std::filesystem;
using namespace steiner;

namespace {

struct RunConfig {
  std::string problem;
  std::string solver = "both";
  std::string convex_method = "pdhg";
  std::optional<double> alpha;
  std::optional<int> grid;
  std::optional<double> tol;
  std::optional<int> max_iter;
  std::string out = "out";
  std::uint64_t seed = 1;
  double epsilon_scale = 2.0;
  std::vector<double> schedule{4.0, 2.0, 1.0};
  double sandwich_slack = 0.0;
};

TerminalProblem load_configured(const RunConfig& cfg) {
  TerminalProblem p = load_problem(cfg.problem);
  if (cfg.alpha) p.alpha = *cfg.alpha;
  if (cfg.grid) p.grid_size = *cfg.grid;
  p.validate();
  return p;
}

void validate(const RunConfig& cfg) {
  if (cfg.solver != "gamma" && cfg.solver != "convex" && cfg.solver != "both")
    throw ConfigError("--solver must be gamma, convex or both");
  if (cfg.convex_method != "pdhg" && cfg.convex_method != "barrier")
    throw ConfigError("--convex-method must be pdhg or barrier");
  if (cfg.tol && !(*cfg.tol > 0.0)) throw ConfigError("--tol must be positive");
  if (cfg.max_iter && *cfg.max_iter < 1) throw ConfigError("--max-iter must be positive");
  if (!(cfg.epsilon_scale > 0.0)) throw ConfigError("--epsilon-scale must be positive");
  for (double s : cfg.schedule)
    if (!(s > 0.0)) throw ConfigError("schedule entries must be positive");
}

LocalSolveOptions gamma_options(const RunConfig& cfg) {
  LocalSolveOptions o;
  o.schedule = cfg.schedule;
  o.epsilon_scale = cfg.epsilon_scale;
  if (cfg.tol) o.gtol = *cfg.tol;
  if (cfg.max_iter) o.max_iter = *cfg.max_iter;
  return o;
}

ConvexOptions convex_options(const RunConfig& cfg) {
  ConvexOptions o;
  if (cfg.tol) o.tol = *cfg.tol;
  if (cfg.max_iter) o.max_iter = *cfg.max_iter;
  return o;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void write_density(const fs::path& dir, const std::string& stem, const Discretization& disc, const DensityField& d) {
  const int S = disc.mesh.grid_size();
  write_pgm(dir / (stem + "_density.pgm"), d.grayscale(S), S, S);
  write_text(dir / (stem + "_density.csv"), density_csv(disc.mesh, d));
}

struct GammaRun {
  SolverSummary summary;
  DensityField density;
};

GammaRun run_gamma(const Discretization& disc, double alpha, const RunConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto opt = gamma_options(cfg);
  auto [state, rep] = solve_local(disc, alpha, rectilinear_start(disc), opt);
  GammaRun r;
  r.density = energy_density(PhaseFieldEnergy(disc, opt.epsilon_scale), state, alpha);
  r.summary = {"gamma", alpha, rep.total, rep.length_estimate, rep.iterations, rep.converged, rep.residual, 0.0};
  std::printf("gamma  alpha=%.3g energy=%.6f length=%.6f iterations=%d converged=%s  (%.1f s)\n", alpha, rep.total,
              rep.length_estimate, rep.iterations, rep.converged ? "yes" : "no", seconds_since(t0));
  return r;
}

struct ConvexRun {
  SolverSummary summary;
  DensityField density;
};

ConvexRun run_convex(const Discretization& disc, double alpha, const RunConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  ConvexSolution sol;
  double residual = 0.0;
  if (cfg.convex_method == "barrier") {
    BarrierOptions o;
    if (cfg.tol) o.tol = *cfg.tol;
    if (cfg.max_iter) o.max_newton = *cfg.max_iter;
    sol = solve_convex_barrier(disc, alpha, o);
    // the barrier has no fixed-point residual; report the relative gap
    residual = sol.report.gap / std::max(sol.report.cost, 1e-300);
  } else {
    sol = solve_convex(disc, alpha, convex_options(cfg));
    residual = std::max(sol.report.primal_residual, sol.report.dual_residual);
  }
  const auto& rep = sol.report;
  ConvexRun r;
  r.summary = {"convex", alpha, rep.cost, rep.cost, rep.iterations, rep.converged, residual, rep.gap};
  r.density = std::move(sol.density);
  std::printf("convex alpha=%.3g cost=%.6f gap=%.3g iterations=%d converged=%s  (%.1f s)\n", alpha, rep.cost, rep.gap,
              rep.iterations, rep.converged ? "yes" : "no", seconds_since(t0));
  return r;
}

nlohmann::json config_json(const RunConfig& cfg, const TerminalProblem& p) {
  nlohmann::json j{{"problem", problem_to_json(p)}, {"epsilon_scale", cfg.epsilon_scale},
                   {"schedule", cfg.schedule},      {"seed", cfg.seed},
                   {"convex_method", cfg.convex_method}};
  if (cfg.tol) j["tol"] = *cfg.tol;
  if (cfg.max_iter) j["max_iter"] = *cfg.max_iter;
  return j;
}

nlohmann::json sandwich_json(const SandwichCheck& s) {
  return {{"lower", s.lower}, {"value", s.value}, {"upper", s.upper}, {"slack", s.slack}, {"passed", s.passed()}};
}

int cmd_solve(const RunConfig& cfg) {
  validate(cfg);
  const TerminalProblem p = load_configured(cfg);
  const Discretization disc = discretize(p);
  const fs::path dir(cfg.out);
  fs::create_directories(dir);

  nlohmann::json summary{{"config", config_json(cfg, p)}};
  bool all_converged = true;
  std::optional<GammaRun> g;
  std::optional<ConvexRun> c;
  if (cfg.solver != "convex") {
    g = run_gamma(disc, p.alpha, cfg);
    write_density(dir, "gamma", disc, g->density);
    summary["gamma"] = to_json(g->summary);
    all_converged &= g->summary.converged;
  }
  if (cfg.solver != "gamma") {
    c = run_convex(disc, p.alpha, cfg);
    write_density(dir, "convex", disc, c->density);
    summary["convex"] = to_json(c->summary);
    all_converged &= c->summary.converged;
  }
  if (g && c && g->summary.converged && c->summary.converged) {
    const auto s = sandwich_check(c->summary.cost, g->summary.length_estimate, p.component_count(), p.alpha,
                                  cfg.sandwich_slack);
    summary["sandwich"] = sandwich_json(s);
    std::printf("sandwich %s: %.6f <= %.6f <= %.6f\n", s.passed() ? "PASS" : "FAIL", s.lower, s.value, s.upper);
  }
  write_text(dir / "summary.json", summary_text(summary));
  return all_converged ? 0 : 2;
}

int cmd_sweep(const RunConfig& cfg, std::vector<double> alphas) {
  validate(cfg);
  if (cfg.solver == "both") throw ConfigError("sweep takes a single solver");
  if (alphas.empty()) throw ConfigError("empty alpha list");
  for (double a : alphas) require_alpha(a);
  std::sort(alphas.begin(), alphas.end());
  alphas.erase(std::unique(alphas.begin(), alphas.end()), alphas.end());

  const TerminalProblem p = load_configured(cfg);
  const Discretization disc = discretize(p);
  const fs::path dir(cfg.out);
  fs::create_directories(dir);

  nlohmann::json table = nlohmann::json::array();
  std::vector<SolverSummary> rows;
  bool all_converged = true;
  for (double a : alphas) {
    std::ostringstream stem;
    stem << cfg.solver << "_alpha_" << a;
    if (cfg.solver == "gamma") {
      auto r = run_gamma(disc, a, cfg);
      write_density(dir, stem.str(), disc, r.density);
      rows.push_back(r.summary);
    } else {
      auto r = run_convex(disc, a, cfg);
      write_density(dir, stem.str(), disc, r.density);
      rows.push_back(r.summary);
    }
    all_converged &= rows.back().converged;
    table.push_back(to_json(rows.back()));
  }

  // cost must not increase as alpha decreases; the slack is the sum of the
  // two duality gaps (zero for the phase field, whose values are exact)
  bool monotone = true, strict = false;
  for (std::size_t k = 1; k < rows.size(); ++k) {
    const double slack = rows[k].gap + rows[k - 1].gap + 1e-9 * rows[k].cost;
    if (rows[k - 1].cost > rows[k].cost + slack) monotone = false;
    if (rows[k - 1].cost < rows[k].cost - slack) strict = true;
  }
  if (rows.size() < 2) strict = true;
  std::printf("monotonicity %s (strict decrease %s)\n", monotone ? "PASS" : "FAIL", strict ? "yes" : "no");

  nlohmann::json summary{{"config", config_json(cfg, p)},
                         {"solver", cfg.solver},
                         {"sweep", table},
                         {"monotone", monotone},
                         {"strict_decrease", strict}};
  write_text(dir / "summary.json", summary_text(summary));
  if (!monotone || !strict) return 2;
  return all_converged ? 0 : 2;
}

struct CheckConfig {
  std::string problem;
  int grid = 32;
  std::vector<double> triangle{-0.5, 0.5, 0.8660254037844386};
  double calibration_tol = 1e-10;
  int columns = 4;
  int samples = 1000;
  std::uint64_t seed = 1;
  bool inject_fault = false;
  bool sandwich = true;
  double sandwich_slack = 0.0;
  std::string out;
};

// Four terminals used when no problem file is given.
TerminalProblem default_check_problem(int grid) {
  TerminalProblem p;
  p.points = {{0.2, 0.25}, {0.75, 0.2}, {0.7, 0.8}, {0.3, 0.7}};
  p.grid_size = grid;
  return p;
}

int cmd_check(const CheckConfig& cc) {
  if (cc.triangle.size() != 3) throw ConfigError("--triangle takes x1,x2,x3");
  if (cc.columns < 1 || cc.columns > kMaxSubsetColumns) throw ConfigError("--columns out of range");
  if (cc.samples < 1) throw ConfigError("--samples must be positive");
  TerminalProblem p = cc.problem.empty() ? default_check_problem(cc.grid) : load_problem(cc.problem);
  if (!cc.problem.empty() && cc.grid != 32) p.grid_size = cc.grid;
  p.validate();

  bool ok = true;
  nlohmann::json report;
  auto line = [&](bool pass, const std::string& text) {
    std::printf("%s %s\n", pass ? "PASS" : "FAIL", text.c_str());
    ok &= pass;
  };

  // divergence of the drift
  const Discretization disc = discretize(p);
  DriftField drift = disc.drift;
  if (cc.inject_fault) {
    const std::size_t steps = drift.steps(0).size();
    if (steps < 3) throw ConfigError("--inject-fault needs a drift path with at least three steps");
    drift = drift.without_step(0, steps / 2);
  }
  const DivergenceReport div = check_divergence(drift);
  for (std::size_t i = 0; i < div.components.size(); ++i) {
    std::ostringstream t;
    t << "divergence component " << (i + 1);
    if (!div.components[i].ok) t << " (" << div.components[i].offending.size() << " offending nodes)";
    line(div.components[i].ok, t.str());
  }
  report["divergence"] = div.ok();

  // triangle calibration
  const TriangleCoords tri{cc.triangle[0], cc.triangle[1], cc.triangle[2]};
  const CalibrationReport cal = check_triangle_calibration(tri, cc.calibration_tol);
  for (const auto* c : {&cal.closedness, &cal.dual_norm, &cal.pairing}) {
    std::ostringstream t;
    t << "calibration " << c->name << " (value " << c->value << ", margin " << c->margin << ")";
    line(c->passed(), t.str());
  }
  report["calibration"] = {{"closedness", cal.closedness.value},
                           {"dual_norm", cal.dual_norm.value},
                           {"pairing", cal.pairing.value},
                           {"passed", cal.passed()}};

  // norm property suite
  std::vector<SuiteResult> suites = weight_norm_suite(cc.columns, cc.samples, cc.seed);
  for (auto& s : projection_suite(cc.columns, std::max(1, cc.samples / 10), 10, cc.seed + 1)) suites.push_back(s);
  if (cc.columns <= 6)
    for (auto& s : envelope_suite(cc.columns, cc.samples, cc.seed + 2)) suites.push_back(s);
  nlohmann::json norms = nlohmann::json::object();
  for (const auto& s : suites) {
    std::printf("%s\n", describe(s).c_str());
    ok &= s.passed;
    norms[s.name] = {{"passed", s.passed}, {"cases", s.cases}, {"worst", s.worst}};
  }
  report["norms"] = norms;

  // relaxation sandwich between the two solvers
  if (cc.sandwich && div.ok()) {
    RunConfig rc;
    const auto g = run_gamma(disc, p.alpha, rc);
    const auto c = run_convex(disc, p.alpha, rc);
    if (g.summary.converged && c.summary.converged) {
      const auto s = sandwich_check(c.summary.cost, g.summary.length_estimate, p.component_count(), p.alpha,
                                    cc.sandwich_slack);
      std::ostringstream t;
      t << "sandwich " << s.lower << " <= " << s.value << " <= " << s.upper;
      line(s.passed(), t.str());
      report["sandwich"] = sandwich_json(s);
    } else {
      std::printf("SKIP sandwich (a solver did not converge)\n");
      report["sandwich"] = "skipped";
    }
  }

  report["passed"] = ok;
  if (!cc.out.empty()) {
    fs::create_directories(cc.out);
    write_text(fs::path(cc.out) / "check.json", summary_text(report));
  }
  return ok ? 0 : 2;
}

void add_run_options(CLI::App* app, RunConfig& cfg) {
  app->add_option("problem", cfg.problem, "Problem file (JSON)")->required()->check(CLI::ExistingFile);
  app->add_option("--alpha", cfg.alpha, "Override the problem's alpha, in [0,1]");
  app->add_option("--grid", cfg.grid, "Override the problem's grid size S (>= 8)");
  app->add_option("--tol", cfg.tol,
                  "Stopping tolerance: |grad|_inf/h for gamma (default 1e-5), relative residual for convex (default "
                  "1e-4)");
  app->add_option("--max-iter", cfg.max_iter,
                  "Iteration budget: per continuation stage for gamma (default 4000), total for convex (default 20000)");
  app->add_option("--convex-method", cfg.convex_method,
                  "pdhg (primal-dual iteration) or barrier (interior point; --tol is the relative gap, default 1e-4, "
                  "--max-iter the Newton budget, default 3000)")
      ->capture_default_str();
  app->add_option("--out", cfg.out, "Output directory")->capture_default_str();
  app->add_option("--seed", cfg.seed, "Seed recorded with the run (the solvers are deterministic)")
      ->capture_default_str();
  app->add_option("--epsilon-scale", cfg.epsilon_scale, "Phase-field width eps in units of h")->capture_default_str();
  app->add_option("--schedule", cfg.schedule, "Smoothed-sup softness per stage, in units of h")
      ->delimiter(',')
      ->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Steiner trees and irrigation networks by phase fields and convex relaxation"};
  app.require_subcommand(1);

  RunConfig solve_cfg;
  auto* solve = app.add_subcommand("solve", "Run one or both solvers on a problem file");
  add_run_options(solve, solve_cfg);
  solve->add_option("--solver", solve_cfg.solver, "gamma, convex or both")->capture_default_str();
  solve->add_option("--sandwich-slack", solve_cfg.sandwich_slack, "Relative slack of the solver sandwich check")
      ->capture_default_str();

  RunConfig sweep_cfg;
  sweep_cfg.solver = "convex";
  std::vector<double> alphas{0.2, 0.4, 0.6, 0.8, 1.0};
  auto* sweep = app.add_subcommand("sweep", "Solve for a list of alpha values and check monotonicity");
  add_run_options(sweep, sweep_cfg);
  sweep->add_option("--solver", sweep_cfg.solver, "gamma or convex")->capture_default_str();
  sweep->add_option("--alphas", alphas, "Comma separated alpha values")->delimiter(',')->capture_default_str();

  CheckConfig check_cfg;
  auto* check = app.add_subcommand("check", "Divergence, calibration, norm suites and the solver sandwich");
  check->add_option("problem", check_cfg.problem, "Problem file (default: a built-in four-terminal problem)")
      ->check(CLI::ExistingFile);
  check->add_option("--grid", check_cfg.grid, "Grid size for the divergence and sandwich checks")->capture_default_str();
  check->add_option("--triangle", check_cfg.triangle, "Calibration triangle x1,x2,x3")
      ->delimiter(',')
      ->capture_default_str();
  check->add_option("--calibration-tol", check_cfg.calibration_tol, "Calibration tolerance")->capture_default_str();
  check->add_option("--columns", check_cfg.columns, "Columns N-1 in the norm suites")->capture_default_str();
  check->add_option("--samples", check_cfg.samples, "Random samples per norm suite")->capture_default_str();
  check->add_option("--seed", check_cfg.seed, "Seed of the random suites")->capture_default_str();
  check->add_flag("--inject-fault", check_cfg.inject_fault, "Delete one drift edge before the divergence check");
  check->add_flag("!--no-sandwich", check_cfg.sandwich, "Skip the solver sandwich check");
  check->add_option("--sandwich-slack", check_cfg.sandwich_slack, "Relative slack of the solver sandwich check")
      ->capture_default_str();
  check->add_option("--out", check_cfg.out, "Write check.json into this directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (*solve) return cmd_solve(solve_cfg);
    if (*sweep) return cmd_sweep(sweep_cfg, alphas);
    if (*check) return cmd_check(check_cfg);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
  } catch (const DomainError& e) {
    std::cerr << "config error: " << e.what() << "\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
  }
  return 1;
}
