#include "cond/verify.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numeric>
#include <random>
#include <sstream>

#include "cond/baselines.hpp"
#include "cond/cond_solver.hpp"
#include "cond/error.hpp"
#include "cond/friction_cone.hpp"
#include "cond/simulation.hpp"

namespace cond::verify {

namespace {

using Rng = std::mt19937_64;

double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

Vector3 random_unit(Rng& rng) {
  std::normal_distribution<double> g;
  Vector3 v;
  do {
    v = Vector3(g(rng), g(rng), g(rng));
  } while (v.norm() < 1e-3);
  return v.normalized();
}

std::string fmt(const char* f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

std::string sci(double x) { return fmt("%.3g", x); }

/// Diagonally dominant sparse SPD matrix over `nodes` 3-DOF nodes.
SparseSymmetric random_spd(Rng& rng, Index nodes, double coupling) {
  const Index n = 3 * nodes;
  std::vector<Triplet> trip;
  Vector rowsum = Vector::Zero(n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j) {
      if (uniform(rng, 0.0, 1.0) < 0.15) {
        const double x = uniform(rng, -1.0, 1.0);
        trip.emplace_back(i, j, x);
        trip.emplace_back(j, i, x);
        rowsum[i] += std::abs(x);
        rowsum[j] += std::abs(x);
      }
    }
  }
  for (Index i = 0; i < n; ++i) trip.emplace_back(i, i, rowsum[i] / coupling + uniform(rng, 0.5, 2.0));
  return SparseSymmetric::from_triplets(n, trip);
}

/// Contacts on distinct nodes (each node in at most one contact).
std::vector<Contact> random_contacts(Rng& rng, Index nodes, Index count, bool dynamic) {
  std::vector<Index> order(static_cast<std::size_t>(nodes));
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<Contact> out;
  std::size_t next = 0;
  for (Index m = 0; m < count && next < order.size(); ++m) {
    Contact c;
    c.node_i = 3 * order[next++];
    if (dynamic && next < order.size() && uniform(rng, 0.0, 1.0) < 0.5) {
      c.kind = ContactKind::kDynamic;
      c.node_j = 3 * order[next++];
    }
    c.frame = contact_frame(random_unit(rng));
    c.mu = c.mu2 = uniform(rng, 0.1, 1.0);
    c.phi = uniform(rng, -0.5, 0.0);
    out.push_back(c);
  }
  return out;
}

Matrix dense_jacobian(std::span<const Contact> contacts, Index dim) {
  return Matrix(assemble_contact_jacobian(contacts, dim));
}

struct Timer {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
};

std::string scenario_path(const Options& o, const std::string& name) {
  return (std::filesystem::path(o.scenario_dir) / (name + ".json")).string();
}

std::vector<std::string> bundled(const Options& o) {
  std::vector<std::string> names;
  for (const auto& e : std::filesystem::directory_iterator(o.scenario_dir)) {
    if (e.path().extension() == ".json") names.push_back(e.path().stem().string());
  }
  std::sort(names.begin(), names.end());
  return names;
}

// 1. Brute-force J_c W J_cᵀ against the extracted γ blocks.
CriterionResult diagonalization(const Options&) {
  CriterionResult r{1, "diagonalization equivalence", false, "", 0.0, 5.0};
  Rng rng(101);
  double off = 0.0;
  double diag = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto count = static_cast<Index>(1 + trial % 64);
    const Index nodes = 2 * count + 4;
    const auto contacts = random_contacts(rng, nodes, count, true);
    StepMatrix w;
    w.w.resize(3 * nodes);
    for (Index i = 0; i < nodes; ++i) w.w.segment<3>(3 * i).setConstant(uniform(rng, 0.01, 10.0));
    const Vector gamma = surrogate_gamma(w, contacts);
    const Matrix j = dense_jacobian(contacts, 3 * nodes);
    const Matrix g = j * w.w.asDiagonal() * j.transpose();
    const auto nc = static_cast<Index>(contacts.size());
    for (Index a = 0; a < nc; ++a) {
      for (Index b = 0; b < nc; ++b) {
        const Matrix3 blk = g.block<3, 3>(3 * a, 3 * b);
        if (a == b) {
          diag = std::max(diag, (blk - gamma[a] * Matrix3::Identity()).cwiseAbs().maxCoeff());
        } else {
          off = std::max(off, blk.cwiseAbs().maxCoeff());
        }
      }
    }
  }
  r.pass = off <= 1e-12 && diag <= 1e-12;
  r.detail = "100 sets, max off-diagonal " + sci(off) + ", max diagonal mismatch " + sci(diag) + " (tol 1e-12)";
  return r;
}

// 2. Consistency on every converged step of every bundled scenario.
CriterionResult consistency(const Options& o) {
  CriterionResult r{2, "dynamics consistency", false, "", 0.0, 120.0};
  RunConfig cfg;
  double worst = 0.0;
  long converged = 0;
  std::string worst_name;
  for (const auto& name : bundled(o)) {
    const Scenario s = load_scenario(scenario_path(o, name));
    const RunResult res = run(s, cfg);
    for (const auto& row : res.rows) converged += row.converged ? 1 : 0;
    if (res.max_consistency >= worst) {
      worst = res.max_consistency;
      worst_name = name;
    }
  }
  const double bound = 10.0 * cfg.cond.residual_tol;
  r.pass = worst <= bound && converged > 0;
  r.detail = std::to_string(converged) + " converged steps, max ||diag(A)^-1 (A v - b - Jc^T lambda)|| " + sci(worst) +
             " m/s (" + worst_name + ") <= " + sci(bound);
  return r;
}

// 3. Strict one-shot solves satisfy the surrogate SCC.
CriterionResult strict_exactness(const Options&) {
  CriterionResult r{3, "strict-operator SCC exactness", false, "", 0.0, 1.0};
  Rng rng(303);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    Contact c;
    c.mu = c.mu2 = trial % 10 == 0 ? 0.0 : uniform(rng, 0.0, 1.5);
    c.phi = uniform(rng, -1.0, 1.0);
    const double gamma = std::exp(uniform(rng, std::log(1e-3), std::log(1e2)));
    const Vector3 eta(uniform(rng, -10.0, 10.0), uniform(rng, -10.0, 10.0), uniform(rng, -10.0, 10.0));
    const Vector3 lambda = solve_contact(gamma, eta, c, ContactOperator::kStrict, 0.0);
    const Vector3 u = gamma * lambda + eta;
    worst = std::max(worst, scc_residual(u, lambda, c));
  }
  r.pass = worst <= 1e-10;
  r.detail = "1000 solves, max SCC residual " + sci(worst) + " (tol 1e-10)";
  return r;
}

double ccp_kkt(const SparseSymmetric& a, const Vector& b, std::span<const Contact> contacts, const Vector& v,
               const Vector& lambda) {
  Vector r = spmv(a, v) - b;
  add_contact_impulse(contacts, -lambda, Vector(), r);
  double worst = r.cwiseQuotient(a.diagonal()).cwiseAbs().maxCoeff();
  const Vector u = contact_velocity(contacts, v);
  for (std::size_t m = 0; m < contacts.size(); ++m) {
    const Index k = 3 * static_cast<Index>(m);
    const Vector3 l = lambda.segment<3>(k);
    Vector3 um = u.segment<3>(k);
    um[0] += contacts[m].phi;
    const double mu = contacts[m].mu;
    worst = std::max({worst, -l[0], l.tail<2>().norm() - mu * l[0], mu * um.tail<2>().norm() - um[0],
                      std::abs(l.dot(um))});
  }
  return worst;
}

// 4. Proximal COND solves the CCP; PGS and APGD agree.
CriterionResult proximal_ccp(const Options&) {
  CriterionResult r{4, "proximal equals CCP", false, "", 0.0, 30.0};
  Rng rng(404);
  double kkt = 0.0;
  double agree = 0.0;
  int unconverged = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const Index nodes = 12;
    const auto contacts = random_contacts(rng, nodes, 1 + trial % 8, true);
    const SparseSymmetric a = random_spd(rng, nodes, 0.5);
    Vector b(3 * nodes);
    for (Index i = 0; i < b.size(); ++i) b[i] = uniform(rng, -5.0, 5.0);
    const AugmentedDynamics dyn{a, b, 3 * nodes};

    SolverConfig cfg;
    cfg.op = ContactOperator::kProximal;
    cfg.residual_tol = 1e-13;
    cfg.max_iterations = 100000;
    cfg.chebyshev = false;
    const VfpiResult res = solve_vfpi(dyn, contacts, cfg, Vector::Zero(b.size()));
    if (!res.report.converged) ++unconverged;
    kkt = std::max(kkt, ccp_kkt(a, b, contacts, res.v, res.lambda));

    const DelassusProblem p = assemble_delassus(a, contacts, b);
    BaselineConfig bcfg;
    bcfg.residual_tol = 1e-13;
    bcfg.max_iterations = 200000;
    const Vector pgs = solve_pgs(p, bcfg).lambda;
    const Vector apgd = solve_apgd(p, bcfg).lambda;
    const double scale = std::max(res.lambda.norm(), 1e-12);
    agree = std::max({agree, (pgs - res.lambda).norm() / scale, (apgd - res.lambda).norm() / scale});
  }
  r.pass = kkt <= 1e-5 && agree <= 1e-3 && unconverged == 0;
  r.detail = "20 scenes, max CCP KKT residual " + sci(kkt) + " (tol 1e-5), max PGS/APGD relative gap " + sci(agree) +
             " (tol 1e-3), unconverged " + std::to_string(unconverged);
  return r;
}

/// Mean position error of the sliding box against the midpoint recurrence.
double box_slide_error(const Scenario& s, double kv) {
  RunConfig cfg;
  cfg.kv = kv;
  cfg.record_trajectory = true;
  cfg.cond.residual_tol = 1e-13;
  cfg.cond.max_iterations = 200000;
  const RunResult res = run(s, cfg);
  BoxSlideParams p;
  p.mass = s.bodies[0].mass;
  p.mu = s.contact.mu;
  p.force = s.forces[0].segments[0].force.y();
  p.gravity = -s.gravity.z();
  p.duration = s.duration;
  p.step_size = s.step_size;
  p.y0 = s.initial.q[1];
  const std::vector<double> y = analytic_box_slide(p);
  double sum = 0.0;
  for (std::size_t k = 0; k < res.trajectory.size(); ++k) {
    const Vector3 x = res.trajectory[k].head<3>();
    const Vector3 ref(s.initial.q[0], y[k + 1], s.initial.q[2]);
    sum += (x - ref).norm();
  }
  return sum / static_cast<double>(res.trajectory.size());
}

// 5. Virtual-node error shrinks with k_v.
CriterionResult virtual_node_convergence(const Options& o) {
  CriterionResult r{5, "virtual-node convergence", false, "", 0.0, 20.0};
  const Scenario s = load_scenario(scenario_path(o, "box_slide"));
  const double e3 = box_slide_error(s, 1e3);
  const double e4 = box_slide_error(s, 1e4);
  const double e5 = box_slide_error(s, 1e5);
  const double ratio = e3 / e5;
  r.pass = e3 > e4 && e4 > e5 && ratio >= 50.0;
  r.detail = "mean position error " + fmt("%.4f", e3 * 1e3) + " / " + fmt("%.4f", e4 * 1e3) + " / " +
             fmt("%.5f", e5 * 1e3) + " mm at kv 1e3/1e4/1e5, ratio " + fmt("%.1f", ratio) + " (>= 50)";
  return r;
}

// 6. Contact update is non-expansive for W = αI, α = 1/σ_max(A).
CriterionResult non_expansive(const Options&) {
  CriterionResult r{6, "non-expansiveness", false, "", 0.0, 5.0};
  Rng rng(606);
  double worst = -1e300;
  for (int trial = 0; trial < 100; ++trial) {
    const Index nodes = 10;
    const auto contacts = random_contacts(rng, nodes, 1 + trial % 8, true);
    const SparseSymmetric a = random_spd(rng, nodes, 0.5);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(a.to_dense(), Eigen::EigenvaluesOnly);
    const double alpha = 1.0 / eig.eigenvalues().maxCoeff();
    Vector b(3 * nodes);
    for (Index i = 0; i < b.size(); ++i) b[i] = uniform(rng, -5.0, 5.0);
    StepMatrix w{Vector::Constant(3 * nodes, alpha)};
    const Vector gamma = surrogate_gamma(w, contacts);

    auto update = [&](const Vector& v, Vector& vstar) {
      vstar = v - alpha * (spmv(a, v) - b);
      const Vector lambda = contact_solve_oneshot(gamma, contact_velocity(contacts, vstar), contacts,
                                                  ContactOperator::kProximal, 0.0);
      Vector out = vstar;
      add_contact_impulse(contacts, lambda, w.w, out);
      return out;
    };
    Vector v1(3 * nodes), v2(3 * nodes);
    for (Index i = 0; i < v1.size(); ++i) {
      v1[i] = uniform(rng, -3.0, 3.0);
      v2[i] = uniform(rng, -3.0, 3.0);
    }
    Vector s1, s2;
    const Vector p1 = update(v1, s1);
    const Vector p2 = update(v2, s2);
    worst = std::max(worst, (p1 - p2).norm() - (s1 - s2).norm());
  }
  r.pass = worst <= 1e-12;
  r.detail = "100 pairs, max expansion " + sci(worst) + " (tol +1e-12)";
  return r;
}

// 7. Normal-cone monotonicity of the proximal operator.
CriterionResult monotonicity(const Options&) {
  CriterionResult r{7, "normal-cone monotonicity", false, "", 0.0, 1.0};
  Rng rng(707);
  double worst = 1e300;
  for (int trial = 0; trial < 1000; ++trial) {
    Contact c;
    c.mu = c.mu2 = uniform(rng, 0.0, 1.5);
    c.phi = uniform(rng, -1.0, 1.0);
    const double gamma = uniform(rng, 0.05, 5.0);
    auto pair = [&](const Vector3& eta) {
      const Vector3 lambda = solve_contact(gamma, eta, c, ContactOperator::kProximal, 0.0);
      Vector3 trial_point = -eta / gamma;
      trial_point[0] -= c.phi / gamma;
      return std::make_pair(lambda, Vector3(trial_point - lambda));
    };
    Vector3 e1, e2;
    for (int k = 0; k < 3; ++k) {
      e1[k] = uniform(rng, -5.0, 5.0);
      e2[k] = uniform(rng, -5.0, 5.0);
    }
    const auto [l1, x1] = pair(e1);
    const auto [l2, x2] = pair(e2);
    worst = std::min(worst, (x1 - x2).dot(l1 - l2));
  }
  r.pass = worst >= -1e-12;
  r.detail = "1000 pairs, min (xi1-xi2).(l1-l2) " + sci(worst) + " (>= -1e-12)";
  return r;
}

// 8. Chebyshev acceleration on the lattice drag.
CriterionResult chebyshev(const Options& o) {
  CriterionResult r{8, "Chebyshev ablation", false, "", 0.0, 60.0};
  const Scenario s = load_scenario(scenario_path(o, "lattice_drag"));
  auto mean_iters = [&](bool on, long& contacts) {
    RunConfig cfg;
    cfg.cond.chebyshev = on;
    const RunResult res = run(s, cfg);
    double sum = 0.0;
    contacts = 0;
    for (const auto& row : res.rows) {
      sum += row.iters;
      contacts = std::max(contacts, row.contacts);
    }
    return sum / static_cast<double>(res.rows.size());
  };
  long contacts = 0;
  const double with = mean_iters(true, contacts);
  const double without = mean_iters(false, contacts);
  const auto dof = velocity_dim(s.bodies);
  r.pass = dof >= 900 && contacts >= 30 && with <= without / 1.5;
  r.detail = std::to_string(dof) + " DOF, " + std::to_string(contacts) + " contacts, mean iterations " +
             fmt("%.2f", without) + " -> " + fmt("%.2f", with) + " (ratio " + fmt("%.2f", without / with) +
             ", >= 1.5)";
  return r;
}

// 9. Solver-time scaling over lattice sizes.
CriterionResult scalability(const Options& o) {
  CriterionResult r{9, "scalability", false, "", 0.0, 300.0};
  const Scenario s = load_scenario(scenario_path(o, "lattice_drag"));
  const std::vector<Index> all{300, 600, 1200, 2400, 4800};
  const std::vector<Index> within(all.begin(), all.end() - 1);  // dense baselines cap at 4096

  RunConfig cfg;
  cfg.steps = 30;
  // Best of three sweeps per size keeps scheduler noise out of the fit.
  ScalingFit cond_fit = bench_scaling(s, all, cfg);
  for (int rep = 0; rep < 2; ++rep) {
    const ScalingFit again = bench_scaling(s, all, cfg);
    for (std::size_t i = 0; i < all.size(); ++i) {
      cond_fit.mean_solve_ms[i] = std::min(cond_fit.mean_solve_ms[i], again.mean_solve_ms[i]);
    }
  }
  fit_scaling(cond_fit);
  ScalingFit cond_sub = cond_fit;
  cond_sub.dofs.pop_back();
  cond_sub.mean_solve_ms.pop_back();
  cond_sub.mean_iters.pop_back();
  fit_scaling(cond_sub);

  RunConfig base = cfg;
  base.steps = 3;
  base.solver = SolverKind::kPgs;
  const ScalingFit pgs = bench_scaling(s, within, base);
  base.solver = SolverKind::kApgd;
  const ScalingFit apgd = bench_scaling(s, within, base);

  const double e = *cond_fit.exponent;
  r.pass = e <= 1.3 && *cond_fit.r_squared >= 0.95 && *pgs.exponent > *cond_sub.exponent &&
           *apgd.exponent > *cond_sub.exponent;
  r.detail = "COND exponent " + fmt("%.3f", e) + " (R^2 " + fmt("%.3f", *cond_fit.r_squared) + "), on " +
             std::to_string(within.front()) + ".." + std::to_string(within.back()) + ": COND " +
             fmt("%.3f", *cond_sub.exponent) + ", PGS " + fmt("%.3f", *pgs.exponent) + ", APGD " +
             fmt("%.3f", *apgd.exponent);
  return r;
}

/// Closest point of the ellipse boundary found by scanning `samples` angles.
Eigen::Vector2d sampled_ellipse_projection(const Eigen::Vector2d& p, double a, double b, int samples) {
  if ((p[0] / a) * (p[0] / a) + (p[1] / b) * (p[1] / b) <= 1.0) return p;
  Eigen::Vector2d best = Eigen::Vector2d::Zero();
  double best_d = 1e300;
  for (int i = 0; i < samples; ++i) {
    const double t = 2.0 * M_PI * static_cast<double>(i) / static_cast<double>(samples);
    const Eigen::Vector2d x(a * std::cos(t), b * std::sin(t));
    const double d = (x - p).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = x;
    }
  }
  return best;
}

// 10. Anisotropic sliding against the sampled MDP oracle.
CriterionResult anisotropic(const Options& o) {
  CriterionResult r{10, "anisotropic MDP", false, "", 0.0, 30.0};
  const Scenario s = load_scenario(scenario_path(o, "anisotropic_slide"));
  RunConfig cfg;
  cfg.cond.op = ContactOperator::kStrictAnisotropic;
  cfg.cond.residual_tol = 1e-10;
  cfg.cond.max_iterations = 200000;
  cfg.record_trajectory = true;
  const RunResult res = run(s, cfg);

  // Point-mass oracle: λ_t = Π_ellipse(−(2m/t) v), normal load m g.
  const double m = s.bodies[0].mass;
  const double t = s.step_size;
  const double load = m * -s.gravity.z();
  Eigen::Vector2d x = s.initial.q.head<2>();
  Eigen::Vector2d v = s.initial.v.head<2>();
  double worst = 0.0;
  for (std::size_t k = 0; k < res.trajectory.size(); ++k) {
    const double a = 2.0 * m / t;
    const Eigen::Vector2d lambda =
        sampled_ellipse_projection(-a * v, s.contact.mu1 * load, s.contact.mu2 * load, 1000000);
    const Eigen::Vector2d v_hat = v + lambda / a;
    x += t * v_hat;
    v = 2.0 * v_hat - v;
    worst = std::max(worst, (res.trajectory[k].head<2>() - x).norm());
  }
  const Eigen::Vector2d disp = res.final_state.q.head<2>() - s.initial.q.head<2>();

  Rng rng(1010);
  double iso = 0.0;
  for (int i = 0; i < 100; ++i) {
    const Vector3 l(uniform(rng, -1.0, 2.0), uniform(rng, -2.0, 2.0), uniform(rng, -2.0, 2.0));
    const double mu = uniform(rng, 0.05, 1.0);
    iso = std::max(iso, (project_strict_anisotropic<double>(l, mu, mu) - project_strict<double>(l, mu)).norm());
  }
  r.pass = worst <= 1e-3 && iso <= 1e-10;
  r.detail = "max trajectory deviation " + sci(worst) + " m over " + fmt("%.2f", s.duration) +
             " s (tol 1e-3), displacement (" + fmt("%.3f", disp[0]) + ", " + fmt("%.3f", disp[1]) +
             ") m, isotropic reduction " + sci(iso) + " (tol 1e-10)";
  return r;
}

// 11. Forward/inverse impulse round trip with Ω_c = 1e-3 I.
CriterionResult invertible(const Options& o) {
  CriterionResult r{11, "invertible contact", false, "", 0.0, 30.0};
  Scenario s = resize_lattice(load_scenario(scenario_path(o, "lattice_drag")), 10);
  RunConfig cfg;
  cfg.steps = 20;
  cfg.cond.op = ContactOperator::kProximal;
  cfg.cond.regularization = 1e-3;
  cfg.cond.residual_tol = 1e-13;
  cfg.cond.max_iterations = 200000;
  double worst = 0.0;
  double norm_gap = 0.0;
  long checked = 0;
  run(s, cfg, [&](const StepTrace& tr) {
    const Vector back = inverse_contact(tr.v_hat, cfg.cond.regularization, tr.contacts.contacts, cfg.cond.op);
    const double scale = tr.lambda.norm();
    if (scale > 0.0) {
      worst = std::max(worst, (back - tr.lambda).norm() / scale);
      norm_gap = std::max(norm_gap, std::abs(back.norm() - scale) / scale);
      ++checked;
    }
  });
  r.pass = checked > 0 && norm_gap <= 1e-6;
  r.detail = std::to_string(checked) + " steps, max relative impulse-norm gap " + sci(norm_gap) +
             " (tol 1e-6), max relative vector gap " + sci(worst);
  return r;
}

// 12. Penetration bound across the bundled scenarios.
CriterionResult penetration(const Options& o) {
  CriterionResult r{12, "penetration bound", false, "", 0.0, 120.0};
  RunConfig cfg;
  cfg.kv = 1e5;
  double worst = 0.0;
  std::string worst_name;
  for (const auto& name : bundled(o)) {
    const RunResult res = run(load_scenario(scenario_path(o, name)), cfg);
    if (res.max_penetration >= worst) {
      worst = res.max_penetration;
      worst_name = name;
    }
  }
  r.pass = worst <= 5e-5;
  r.detail = "max penetration " + fmt("%.5f", worst * 1e3) + " mm (" + worst_name + ") <= 0.05 mm";
  return r;
}

// 13. Monotone residual decrease on a completely nodal lattice at t = 1e-3 s.
CriterionResult small_step(const Options& o) {
  CriterionResult r{13, "small-step contraction", false, "", 0.0, 30.0};
  nlohmann::json doc = load_scenario(scenario_path(o, "lattice_drag")).source;
  doc["step_size"] = 1e-3;
  doc["duration"] = 1e-3;
  doc["lattices"][0]["stiffness"] = 2e5;  // keeps the residual above round-off for 200 iterations
  const Scenario s = scenario_from_json(doc);
  const SystemState& st = s.initial;
  ExternalLoads loads;
  loads.gravity = s.gravity;
  loads.force = s.external_force(0);
  const AssembledDynamics base = assemble_step(st, s.bodies, s.constraints, s.damping, loads);
  const auto raw = detect_contacts(st, s.bodies, s.geometry);
  const NodalContactSet set = nodalize(raw, st, s.bodies, s.geometry, s.contact);
  const AugmentedDynamics dyn = augment_dynamics(base.a, base.b, set.jv, set.kv);

  SolverConfig cfg;
  cfg.chebyshev = false;
  cfg.residual_tol = 1e-300;
  cfg.max_iterations = 201;
  Rng rng(1313);
  int monotone_runs = 0;
  double worst_ratio = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    Vector warm(dyn.dim());
    for (Index i = 0; i < warm.size(); ++i) warm[i] = uniform(rng, -0.5, 0.5);
    const VfpiResult res = solve_vfpi(dyn, set.contacts, cfg, warm);
    bool ok = true;
    for (std::size_t l = 1; l < res.report.residuals.size(); ++l) {
      const double ratio = res.report.residuals[l] / res.report.residuals[l - 1];
      worst_ratio = std::max(worst_ratio, ratio);
      ok = ok && ratio < 1.0;
    }
    monotone_runs += ok ? 1 : 0;
  }
  r.pass = set.n_virtual == 0 && monotone_runs == 10;
  r.detail = std::to_string(monotone_runs) + "/10 runs monotone over 200 iterations, " +
             std::to_string(set.contacts.size()) + " contacts, stiffness 2e5 N/m, worst ratio " + fmt("%.4f", worst_ratio);
  return r;
}

}  // namespace

std::vector<CriterionResult> run_acceptance(const Options& options) {
  using Fn = CriterionResult (*)(const Options&);
  const std::vector<Fn> all{diagonalization, consistency,  strict_exactness, proximal_ccp, virtual_node_convergence,
                            non_expansive,   monotonicity, chebyshev,        scalability,  anisotropic,
                            invertible,      penetration,  small_step};
  std::vector<CriterionResult> out;
  for (std::size_t i = 0; i < all.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!options.only.empty() && std::find(options.only.begin(), options.only.end(), id) == options.only.end()) {
      continue;
    }
    const Timer timer;
    CriterionResult r;
    try {
      r = all[i](options);
    } catch (const std::exception& e) {
      r.id = id;
      r.name = "criterion " + std::to_string(id);
      r.pass = false;
      r.detail = std::string("error: ") + e.what();
    }
    r.seconds = timer.seconds();
    if (r.limit_seconds > 0.0 && r.seconds > r.limit_seconds) {
      r.pass = false;
      r.detail += "; runtime over limit";
    }
    if (options.on_result) options.on_result(r);
    out.push_back(std::move(r));
  }
  return out;
}

std::string format_line(const CriterionResult& r) {
  std::ostringstream s;
  s << (r.pass ? "[PASS] " : "[FAIL] ") << r.id << ". " << r.name << ": " << r.detail << " ("
    << fmt("%.2f", r.seconds) << " s, limit " << fmt("%.0f", r.limit_seconds) << " s)";
  return s.str();
}

}  // namespace cond::verify
