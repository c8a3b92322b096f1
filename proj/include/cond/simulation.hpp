#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "cond/baselines.hpp"
#include "cond/cond_solver.hpp"
#include "cond/scenario.hpp"

namespace cond {

enum class SolverKind { kCond, kPgs, kApgd };

struct RunConfig {
  SolverKind solver = SolverKind::kCond;
  SolverConfig cond;
  BaselineConfig baseline;
  std::optional<double> kv;  // overrides the scenario value
  std::optional<long> steps;  // overrides duration / step_size
  bool record_trajectory = false;
};

struct MetricsRow {
  long step = 0;
  double dyn_ms = 0.0;
  double solve_ms = 0.0;
  int iters = 0;
  double residual = 0.0;
  double max_pen_m = 0.0;
  long contacts = 0;
  double ke_J = 0.0;
  // Not part of the CSV contract.
  double delassus_ms = 0.0;
  bool converged = true;
  bool diverged = false;
  double consistency = 0.0;
};

/// Everything a step produced, handed to an observer after the solve.
struct StepTrace {
  long step;
  const SystemState& state;
  const AugmentedDynamics& dyn;
  const NodalContactSet& contacts;
  const Vector& v_hat;  // augmented
  const Vector& lambda;
  const MetricsRow& row;
};

struct RunResult {
  std::vector<MetricsRow> rows;
  SystemState final_state;
  std::vector<Vector> trajectory;  // q after every step, when recorded
  long diverged_steps = 0;
  double max_consistency = 0.0;  // over converged COND steps
  double max_penetration = 0.0;
};

using StepObserver = std::function<void(const StepTrace&)>;

RunResult run(const Scenario& s, const RunConfig& cfg, const StepObserver& observer = {});

struct BoxSlideParams {
  double mass = 0.5;
  double mu = 0.2;
  double force = 2.0;  // N along +y
  double gravity = 9.81;
  double duration = 3.0;
  double step_size = 0.01;
  double y0 = 0.0;
};

/// Displacement samples y_k, k = 0..steps, under the midpoint recurrence.
std::vector<double> analytic_box_slide(const BoxSlideParams& p);

void report_csv(const std::vector<MetricsRow>& rows, const std::string& path);
std::string format_csv(const std::vector<MetricsRow>& rows);
std::vector<MetricsRow> parse_csv(const std::string& text);

struct ScalingFit {
  std::vector<Index> dofs;
  std::vector<double> mean_solve_ms;
  std::vector<double> mean_iters;
  std::optional<double> exponent;
  std::optional<double> r_squared;
};

/// Least-squares fit of log(time) against log(n); empty below two points.
void fit_scaling(ScalingFit& fit);

/// Runs the scenario with its first lattice resized to each DOF count.
ScalingFit bench_scaling(const Scenario& s, const std::vector<Index>& dofs, const RunConfig& cfg);

}  // namespace cond
