// Command-line front end: run a scenario, sweep lattice sizes, or run the
// acceptance suite.

#include <CLI11.hpp>
#include <omp.h>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "cond/error.hpp"
#include "cond/simulation.hpp"
#include "cond/verify.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kValidation = 2;
constexpr int kDivergence = 3;
constexpr int kIo = 4;

struct Args {
  std::string scenario;
  std::string solver = "cond";
  std::string op = "strict";
  std::string step_matrix = "frobenius";
  double residual_tol = 1e-4;
  int max_iter = 500;
  std::string chebyshev = "on";
  double kv = 0.0;
  long seed = -1;
  long steps = 0;
  std::string out;
  std::string sizes;
};

void add_common(CLI::App* app, Args& a) {
  app->add_option("--scenario", a.scenario, "Scenario JSON file")->required();
  app->add_option("--solver", a.solver, "cond | pgs | apgd")
      ->check(CLI::IsMember({"cond", "pgs", "apgd"}));
  app->add_option("--operator", a.op, "strict | proximal | anisotropic")
      ->check(CLI::IsMember({"strict", "proximal", "anisotropic"}));
  app->add_option("--step-matrix", a.step_matrix, "frobenius | bb1 | bb2 | bb-alt")
      ->check(CLI::IsMember({"frobenius", "bb1", "bb2", "bb-alt"}));
  app->add_option("--residual-tol", a.residual_tol, "Residual threshold")->check(CLI::PositiveNumber);
  app->add_option("--max-iter", a.max_iter, "Iteration cap")->check(CLI::PositiveNumber);
  app->add_option("--chebyshev", a.chebyshev, "on | off")->check(CLI::IsMember({"on", "off"}));
  app->add_option("--kv", a.kv, "Virtual-node gain (N s/m)")->check(CLI::PositiveNumber);
  app->add_option("--seed", a.seed, "Randomization seed")->check(CLI::NonNegativeNumber);
  app->add_option("--steps", a.steps, "Override the step count")->check(CLI::PositiveNumber);
  app->add_option("--out", a.out, "CSV output path");
}

cond::Scenario load(const Args& a) {
  cond::Scenario s = cond::load_scenario(a.scenario);
  if (a.seed >= 0) {
    nlohmann::json doc = s.source;
    doc["seed"] = a.seed;
    s = cond::scenario_from_json(doc);
  }
  return s;
}

cond::RunConfig config(const Args& a) {
  cond::RunConfig cfg;
  cfg.solver = a.solver == "pgs" ? cond::SolverKind::kPgs
               : a.solver == "apgd" ? cond::SolverKind::kApgd
                                    : cond::SolverKind::kCond;
  static const std::map<std::string, cond::ContactOperator> ops{
      {"strict", cond::ContactOperator::kStrict},
      {"proximal", cond::ContactOperator::kProximal},
      {"anisotropic", cond::ContactOperator::kStrictAnisotropic}};
  static const std::map<std::string, cond::StepStrategy> steps{
      {"frobenius", cond::StepStrategy::kFrobenius},
      {"bb1", cond::StepStrategy::kBB1},
      {"bb2", cond::StepStrategy::kBB2},
      {"bb-alt", cond::StepStrategy::kBBAlternating}};
  cfg.cond.op = ops.at(a.op);
  cfg.cond.strategy = steps.at(a.step_matrix);
  cfg.cond.residual_tol = a.residual_tol;
  cfg.cond.max_iterations = a.max_iter;
  cfg.cond.chebyshev = a.chebyshev == "on";
  cfg.baseline.residual_tol = a.residual_tol;
  cfg.baseline.max_iterations = a.max_iter;
  if (a.kv > 0.0) cfg.kv = a.kv;
  if (a.steps > 0) cfg.steps = a.steps;
  return cfg;
}

std::vector<cond::Index> parse_sizes(const std::string& text) {
  std::vector<cond::Index> out;
  std::stringstream ss(text);
  for (std::string cell; std::getline(ss, cell, ',');) {
    std::size_t used = 0;
    long value = 0;
    try {
      value = std::stol(cell, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != cell.size() || value <= 0) {
      throw cond::Error(cond::ErrorCode::kValidation, "--sizes: bad entry '" + cell + "'");
    }
    out.push_back(value);
  }
  if (out.empty()) throw cond::Error(cond::ErrorCode::kValidation, "--sizes: empty list");
  return out;
}

int cmd_run(const Args& a) {
  const cond::Scenario s = load(a);
  const cond::RunResult r = cond::run(s, config(a));
  const std::string csv = cond::format_csv(r.rows);
  if (a.out.empty()) {
    std::cout << csv;
  } else {
    cond::report_csv(r.rows, a.out);
  }
  std::cerr << s.name << ": " << r.rows.size() << " steps, max penetration " << r.max_penetration
            << " m, diverged steps " << r.diverged_steps << "\n";
  return r.diverged_steps > 0 ? kDivergence : kOk;
}

int cmd_bench(const Args& a) {
  const cond::Scenario s = load(a);
  const cond::ScalingFit fit = cond::bench_scaling(s, parse_sizes(a.sizes), config(a));
  std::ostringstream csv;
  csv << "dof,mean_solve_ms,mean_iters\n";
  csv.precision(17);
  for (std::size_t i = 0; i < fit.dofs.size(); ++i) {
    csv << fit.dofs[i] << ',' << fit.mean_solve_ms[i] << ',' << fit.mean_iters[i] << '\n';
  }
  if (a.out.empty()) {
    std::cout << csv.str();
  } else {
    std::ofstream out(a.out, std::ios::binary);
    if (!(out << csv.str())) throw cond::Error(cond::ErrorCode::kIo, "cannot write " + a.out);
  }
  if (fit.exponent) {
    std::cerr << "exponent " << *fit.exponent << ", R^2 " << *fit.r_squared << "\n";
  } else {
    std::cerr << "exponent: n/a (fewer than two sizes)\n";
  }
  return kOk;
}

int cmd_verify(const std::string& dir, const std::vector<int>& only) {
  cond::verify::Options opt;
  opt.scenario_dir = dir;
  opt.only = only;
  opt.on_result = [](const cond::verify::CriterionResult& r) {
    std::cout << cond::verify::format_line(r) << std::endl;
  };
  bool ok = true;
  for (const auto& r : cond::verify::run_acceptance(opt)) ok = ok && r.pass;
  return ok ? kOk : 1;
}

}  // namespace

int main(int argc, char** argv) {
  if (const char* env = std::getenv("COND_THREADS")) {
    const int threads = std::atoi(env);
    if (threads > 0) omp_set_num_threads(threads);
  }

  CLI::App app{"Contact dynamics with nodalized velocity fixed-point iteration"};
  app.require_subcommand(1);
  Args run_args;
  Args bench_args;
  auto* run = app.add_subcommand("run", "Simulate a scenario and emit per-step metrics as CSV");
  add_common(run, run_args);
  auto* bench = app.add_subcommand("bench", "Sweep lattice sizes and fit solver-time scaling");
  add_common(bench, bench_args);
  bench->add_option("--sizes", bench_args.sizes, "Comma-separated DOF counts")->required();
  std::string scenario_dir = COND_SCENARIO_DIR;
  std::vector<int> only;
  auto* verify = app.add_subcommand("verify", "Run the acceptance suite and print pass/fail");
  verify->add_option("--scenarios", scenario_dir, "Directory of bundled scenarios");
  verify->add_option("--only", only, "Criterion ids to run");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kValidation;
  }

  try {
    if (*run) return cmd_run(run_args);
    if (*bench) return cmd_bench(bench_args);
    return cmd_verify(scenario_dir, only);
  } catch (const cond::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    switch (e.code()) {
      case cond::ErrorCode::kIo:
        return kIo;
      case cond::ErrorCode::kDivergence:
        return kDivergence;
      default:
        return kValidation;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIo;
  }
}
