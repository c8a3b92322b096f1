#include "cond/simulation.hpp"

#include <Eigen/IterativeLinearSolvers>

#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "cond/error.hpp"

namespace cond {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

/// Unconstrained solve used when a contact solve fails.
Vector fallback_solve(const AugmentedDynamics& dyn, const Vector& guess) {
  Eigen::ConjugateGradient<SparseSymmetric::Storage, Eigen::Lower | Eigen::Upper> cg;
  cg.setTolerance(1e-12);
  cg.compute(dyn.a.matrix());
  return cg.solveWithGuess(dyn.b, guess);
}

Vector warm_impulses(const std::vector<Contact>& contacts, const std::map<ContactKey, Vector3>& previous) {
  Vector out = Vector::Zero(3 * static_cast<Index>(contacts.size()));
  for (std::size_t m = 0; m < contacts.size(); ++m) {
    const auto it = previous.find(contacts[m].key);
    if (it != previous.end()) out.segment<3>(3 * static_cast<Index>(m)) = it->second;
  }
  return out;
}

}  // namespace

RunResult run(const Scenario& s, const RunConfig& cfg, const StepObserver& observer) {
  if (cfg.solver == SolverKind::kCond) validate(cfg.cond);
  RunResult out;
  SystemState state = s.initial;
  const long steps = cfg.steps.value_or(s.steps());
  ContactParams params = s.contact;
  if (cfg.kv) params.kv = *cfg.kv;
  const Index n = velocity_dim(s.bodies);

  Vector v_hat_prev = state.v;
  std::map<ContactKey, Vector3> previous_impulse;
  StepMatrix cached_w;
  long w_age = 0;
  ExternalLoads loads;
  loads.gravity = s.gravity;

  out.rows.reserve(static_cast<std::size_t>(steps));
  if (cfg.record_trajectory) out.trajectory.reserve(static_cast<std::size_t>(steps));

  for (long k = 0; k < steps; ++k) {
    MetricsRow row;
    row.step = k;
    const auto dyn_start = Clock::now();
    loads.force = s.external_force(k);
    const AssembledDynamics base = assemble_step(state, s.bodies, s.constraints, s.damping, loads);
    const std::vector<RawContact> raw = detect_contacts(state, s.bodies, s.geometry);
    NodalContactSet set = nodalize(raw, state, s.bodies, s.geometry, params);
    const AugmentedDynamics dyn = augment_dynamics(base.a, base.b, set.jv, set.kv);
    row.dyn_ms = ms_since(dyn_start);
    row.contacts = static_cast<long>(set.contacts.size());

    Vector v_hat;
    Vector lambda = warm_impulses(set.contacts, previous_impulse);
    try {
      if (cfg.solver == SolverKind::kCond) {
        const bool reuse = w_age > 0 && w_age < cfg.cond.recycle_period && cached_w.w.size() == dyn.dim();
        if (!reuse) {
          cached_w = step_matrix_frobenius(dyn.a, set.contacts, cfg.cond.op);
          w_age = 0;
        }
        ++w_age;
        VfpiResult r = solve_vfpi(dyn, set.contacts, cfg.cond, extend_with_virtual(set, v_hat_prev), &cached_w);
        v_hat = std::move(r.v);
        lambda = std::move(r.lambda);
        row.solve_ms = r.report.solve_ms;
        row.iters = r.report.iterations;
        row.residual = r.report.residuals.empty() ? 0.0 : r.report.residuals.back();
        row.converged = r.report.converged;
        row.consistency = r.report.consistency;
        if (row.converged) out.max_consistency = std::max(out.max_consistency, row.consistency);
      } else {
        DelassusProblem p = assemble_delassus(dyn.a, set.contacts, dyn.b);
        row.delassus_ms = p.assembly_ms;
        BaselineResult r = cfg.solver == SolverKind::kPgs ? solve_pgs(p, cfg.baseline, lambda)
                                                          : solve_apgd(p, cfg.baseline, lambda);
        lambda = std::move(r.lambda);
        v_hat = recover_velocity(p, lambda);
        row.solve_ms = r.report.solve_ms;
        row.iters = r.report.iterations;
        row.residual = r.report.residuals.empty() ? 0.0 : r.report.residuals.back();
        row.converged = r.report.converged;
      }
    } catch (const DivergenceError& e) {
      row.diverged = true;
      row.converged = false;
      row.iters = static_cast<int>(e.trace().size());
      row.residual = e.trace().empty() ? 0.0 : e.trace().back();
      lambda.setZero();
      v_hat = fallback_solve(dyn, extend_with_virtual(set, v_hat_prev));
      ++out.diverged_steps;
    }

    previous_impulse.clear();
    for (std::size_t m = 0; m < set.contacts.size(); ++m) {
      previous_impulse[set.contacts[m].key] = lambda.segment<3>(3 * static_cast<Index>(m));
    }

    if (observer) {
      const StepTrace trace{k, state, dyn, set, v_hat, lambda, row};
      observer(trace);
    }

    v_hat_prev = v_hat.head(n);
    state = integrate(state, s.bodies, v_hat_prev);
    row.max_pen_m = max_penetration(state, s.bodies, s.geometry);
    row.ke_J = kinetic_energy(state, s.bodies);
    out.max_penetration = std::max(out.max_penetration, row.max_pen_m);
    if (cfg.record_trajectory) out.trajectory.push_back(state.q);
    out.rows.push_back(row);
  }
  out.final_state = std::move(state);
  return out;
}

std::vector<double> analytic_box_slide(const BoxSlideParams& p) {
  if (!(p.mass > 0.0) || !(p.gravity > 0.0) || !(p.step_size > 0.0) || !(p.mu >= 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "analytic_box_slide: mass, gravity and step must be > 0");
  }
  if (std::abs(p.force) >= p.mass * p.gravity) {
    throw Error(ErrorCode::kInvalidArgument, "analytic_box_slide: force would tip or lift the box");
  }
  const long steps = std::lround(p.duration / p.step_size);
  std::vector<double> y(static_cast<std::size_t>(steps) + 1, p.y0);
  const double friction = p.mu * p.mass * p.gravity;
  if (std::abs(p.force) <= friction) return y;
  const double a = (p.force - std::copysign(friction, p.force)) / p.mass;
  double v = 0.0;
  for (long k = 0; k < steps; ++k) {
    const double v_hat = v + 0.5 * a * p.step_size;
    y[static_cast<std::size_t>(k) + 1] = y[static_cast<std::size_t>(k)] + p.step_size * v_hat;
    v = 2.0 * v_hat - v;
  }
  return y;
}

namespace {

void put(std::string& out, double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::general, 17);
  out.append(buf, res.ptr);
}

double take(const std::string& field) {
  double x = 0.0;
  const auto res = std::from_chars(field.data(), field.data() + field.size(), x);
  if (res.ec != std::errc() || res.ptr != field.data() + field.size()) {
    throw Error(ErrorCode::kValidation, "csv: bad number '" + field + "'");
  }
  return x;
}

constexpr const char* kHeader = "step,dyn_ms,solve_ms,iters,residual,max_pen_m,contacts,ke_J";

}  // namespace

std::string format_csv(const std::vector<MetricsRow>& rows) {
  std::string out = kHeader;
  out += '\n';
  for (const auto& r : rows) {
    out += std::to_string(r.step);
    out += ',';
    put(out, r.dyn_ms);
    out += ',';
    put(out, r.solve_ms);
    out += ',';
    out += std::to_string(r.iters);
    out += ',';
    put(out, r.residual);
    out += ',';
    put(out, r.max_pen_m);
    out += ',';
    out += std::to_string(r.contacts);
    out += ',';
    put(out, r.ke_J);
    out += '\n';
  }
  return out;
}

std::vector<MetricsRow> parse_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kHeader) throw Error(ErrorCode::kValidation, "csv: missing header");
  std::vector<MetricsRow> rows;
  while (std::getline(in, line)) {
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    if (f.size() != 8) throw Error(ErrorCode::kValidation, "csv: expected 8 fields");
    MetricsRow r;
    r.step = std::stol(f[0]);
    r.dyn_ms = take(f[1]);
    r.solve_ms = take(f[2]);
    r.iters = std::stoi(f[3]);
    r.residual = take(f[4]);
    r.max_pen_m = take(f[5]);
    r.contacts = std::stol(f[6]);
    r.ke_J = take(f[7]);
    rows.push_back(r);
  }
  return rows;
}

void report_csv(const std::vector<MetricsRow>& rows, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot open " + path + " for writing");
  const std::string text = format_csv(rows);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw Error(ErrorCode::kIo, "write failed for " + path);
}

void fit_scaling(ScalingFit& fit) {
  fit.exponent.reset();
  fit.r_squared.reset();
  const std::size_t m = fit.dofs.size();
  if (m < 2) return;
  Vector x(static_cast<Index>(m));
  Vector y(static_cast<Index>(m));
  for (std::size_t i = 0; i < m; ++i) {
    x[static_cast<Index>(i)] = std::log(static_cast<double>(fit.dofs[i]));
    y[static_cast<Index>(i)] = std::log(fit.mean_solve_ms[i]);
  }
  const double mx = x.mean();
  const double my = y.mean();
  const double sxx = (x.array() - mx).square().sum();
  const double sxy = ((x.array() - mx) * (y.array() - my)).sum();
  const double slope = sxy / sxx;
  const double intercept = my - slope * mx;
  const double ss_res = (y.array() - (intercept + slope * x.array())).square().sum();
  const double ss_tot = (y.array() - my).square().sum();
  fit.exponent = slope;
  fit.r_squared = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
}

ScalingFit bench_scaling(const Scenario& s, const std::vector<Index>& dofs, const RunConfig& cfg) {
  ScalingFit fit;
  for (std::size_t i = 1; i < dofs.size(); ++i) {
    if (dofs[i] <= dofs[i - 1]) throw Error(ErrorCode::kInvalidArgument, "bench: sizes must be ascending");
  }
  for (Index dof : dofs) {
    const auto side = static_cast<Index>(std::lround(std::sqrt(static_cast<double>(dof) / 3.0)));
    const Scenario sized = resize_lattice(s, std::max<Index>(side, 1));
    const RunResult r = run(sized, cfg);
    double t = 0.0;
    double it = 0.0;
    for (const auto& row : r.rows) {
      t += row.solve_ms;
      it += row.iters;
    }
    const double count = std::max<double>(1.0, static_cast<double>(r.rows.size()));
    fit.dofs.push_back(velocity_dim(sized.bodies));
    fit.mean_solve_ms.push_back(t / count);
    fit.mean_iters.push_back(it / count);
  }
  fit_scaling(fit);
  return fit;
}

}  // namespace cond
