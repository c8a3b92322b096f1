#include "cond/cond_solver.hpp"

#include <chrono>
#include <cmath>
#include <string>

#include "cond/error.hpp"

namespace cond {

void validate(const SolverConfig& cfg) {
  auto fail = [](const std::string& field, const std::string& why) {
    throw Error(ErrorCode::kInvalidArgument, "solver config: " + field + " " + why);
  };
  if (!(cfg.residual_tol > 0.0)) fail("residual_tol", "must be > 0");
  if (cfg.max_iterations < 1) fail("max_iterations", "must be >= 1");
  if (!(cfg.under_relaxation > 0.0 && cfg.under_relaxation < 1.0)) fail("under_relaxation", "must lie in (0, 1)");
  if (cfg.chebyshev_start < 1) fail("chebyshev_start", "must be >= 1");
  if (!(cfg.regularization >= 0.0)) fail("regularization", "must be >= 0");
  if (cfg.recycle_period < 1) fail("recycle_period", "must be >= 1");
  if (cfg.strategy == StepStrategy::kFixed && !(cfg.fixed_alpha > 0.0)) fail("fixed_alpha", "must be > 0");
}

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

void tie(const Vector& diag, const Vector& rn, std::initializer_list<Index> nodes, Vector& w) {
  double num = 0.0;
  double den = 0.0;
  for (Index node : nodes) {
    for (Index k = 0; k < 3; ++k) {
      num += diag[node + k];
      den += rn[node + k];
    }
  }
  const double value = num / den;
  for (Index node : nodes) w.segment<3>(node).setConstant(value);
}

void apply_ties(const Vector& diag, const Vector& rn, std::span<const Contact> contacts, ContactOperator op,
                Vector& w) {
  for (const Contact& c : contacts) {
    if (c.node_j >= 0 && op == ContactOperator::kProximal) {
      tie(diag, rn, {c.node_i, c.node_j}, w);
    } else {
      tie(diag, rn, {c.node_i}, w);
      if (c.node_j >= 0) tie(diag, rn, {c.node_j}, w);
    }
  }
}

}  // namespace

StepMatrix step_matrix_frobenius(const SparseSymmetric& a, std::span<const Contact> contacts,
                                 ContactOperator op) {
  const Vector diag = a.diagonal();
  const Vector rn = row_norms_sq(a);
  StepMatrix out;
  out.w.resize(a.dim());
  for (Index i = 0; i < a.dim(); ++i) {
    if (!(rn[i] > 0.0)) {
      throw Error(ErrorCode::kInvalidMatrix, "step_matrix_frobenius: zero row " + std::to_string(i));
    }
    out.w[i] = diag[i] / rn[i];
  }
  apply_ties(diag, rn, contacts, op, out.w);
  return out;
}

double step_matrix_bb(const Eigen::Ref<const Vector>& s, const Eigen::Ref<const Vector>& z,
                      BBVariant variant, double previous) {
  const double sz = s.dot(z);
  if (!(sz > 0.0)) return previous;
  return variant == BBVariant::kBB1 ? s.squaredNorm() / sz : sz / z.squaredNorm();
}

Vector surrogate_gamma(const StepMatrix& w, std::span<const Contact> contacts) {
  auto node_value = [&](Index node) {
    const double x = w.w[node];
    if (w.w[node + 1] != x || w.w[node + 2] != x) {
      throw Error(ErrorCode::kInvariantViolation,
                  "surrogate_gamma: step matrix not tied at node " + std::to_string(node));
    }
    return x;
  };
  Vector gamma(static_cast<Index>(contacts.size()));
  for (std::size_t m = 0; m < contacts.size(); ++m) {
    const Contact& c = contacts[m];
    double g = node_value(c.node_i);
    if (c.node_j >= 0) g += node_value(c.node_j);
    gamma[static_cast<Index>(m)] = g;
  }
  return gamma;
}

Vector3 solve_contact(double gamma, const Vector3& eta, const Contact& contact, ContactOperator op,
                      double omega) {
  Vector3 rhs = eta;
  rhs[0] += contact.phi;
  const Vector3 trial = -rhs / (gamma + omega);
  return project_cone<double>(op, trial, contact.mu, contact.mu2);
}

Vector contact_solve_oneshot(const Eigen::Ref<const Vector>& gamma, const Eigen::Ref<const Vector>& eta,
                             std::span<const Contact> contacts, ContactOperator op, double omega) {
  const auto nc = static_cast<Index>(contacts.size());
  Vector lambda(3 * nc);
#pragma omp parallel for schedule(static) if (nc > 256)
  for (Index m = 0; m < nc; ++m) {
    lambda.segment<3>(3 * m) =
        solve_contact(gamma[m], eta.segment<3>(3 * m), contacts[static_cast<std::size_t>(m)], op, omega);
  }
  return lambda;
}

double chebyshev_nu(int l, int l_s, double rho, double nu_prev) {
  if (l < l_s) return 1.0;
  if (l == l_s) return 2.0 / (2.0 - rho * rho);
  return 4.0 / (4.0 - rho * rho * nu_prev);
}

Vector chebyshev_update(const Eigen::Ref<const Vector>& vss, const Eigen::Ref<const Vector>& v_prev,
                        double nu) {
  return nu * (vss - v_prev) + v_prev;
}

double estimate_rho(double now, double before, double previous) {
  if (!(before > 0.0)) return previous;
  return std::min(now / before, 1.0);
}

double scc_residual(const Vector3& u, const Vector3& lambda, const Contact& contact) {
  const double ln = lambda[0];
  const double un = u[0] + contact.phi;
  double r = std::max({0.0, -ln, -un});
  r = std::max(r, std::abs(ln * un) / std::max(1.0, std::abs(ln)));

  const Eigen::Vector2d lt = lambda.tail<2>();
  const Eigen::Vector2d ut = u.tail<2>();
  const double mu1 = contact.mu;
  const double mu2 = contact.anisotropic ? contact.mu2 : contact.mu;
  const double bound = mu1 * std::max(ln, 0.0);

  double radius = lt.norm();  // ‖λ_t‖ measured in units of the μ1 disk
  Eigen::Vector2d grad = lt;
  if (contact.anisotropic && mu2 > 0.0 && mu1 > 0.0) {
    radius = mu1 * std::hypot(lt[0] / mu1, lt[1] / mu2);
    grad = Eigen::Vector2d(lt[0] / (mu1 * mu1), lt[1] / (mu2 * mu2));
  }
  r = std::max(r, radius - bound);

  const double slip = ut.norm();
  if (slip > 0.0 && bound > 0.0) {
    const double gn = grad.norm();
    const double align = gn > 0.0 ? (ut + slip * grad / gn).norm() : slip;
    const double boundary = std::abs(bound - radius) * slip / std::max(1.0, bound);
    r = std::max({r, align, boundary});
  }
  return r;
}

Vector scc_residual(const Eigen::Ref<const Vector>& v, const Eigen::Ref<const Vector>& lambda,
                    std::span<const Contact> contacts) {
  const Vector u = contact_velocity(contacts, v);
  Vector out(static_cast<Index>(contacts.size()));
  for (std::size_t m = 0; m < contacts.size(); ++m) {
    const Index k = 3 * static_cast<Index>(m);
    out[static_cast<Index>(m)] = scc_residual(u.segment<3>(k), lambda.segment<3>(k), contacts[m]);
  }
  return out;
}

Vector inverse_contact(const Eigen::Ref<const Vector>& v, double omega, std::span<const Contact> contacts,
                       ContactOperator op) {
  if (!(omega > 0.0)) throw Error(ErrorCode::kInvalidArgument, "inverse_contact: omega must be > 0");
  const Vector u = contact_velocity(contacts, v);
  Vector lambda(u.size());
  for (std::size_t m = 0; m < contacts.size(); ++m) {
    const Index k = 3 * static_cast<Index>(m);
    lambda.segment<3>(k) = solve_contact(0.0, u.segment<3>(k), contacts[m], op, omega);
  }
  return lambda;
}

VfpiResult solve_vfpi(const AugmentedDynamics& dyn, std::span<const Contact> contacts,
                      const SolverConfig& cfg, const Eigen::Ref<const Vector>& warm,
                      const StepMatrix* cached_w) {
  validate(cfg);
  const Index n = dyn.dim();
  if (warm.size() != n) throw Error(ErrorCode::kInvalidArgument, "solve_vfpi: warm start dimension mismatch");
  const auto start = Clock::now();

  StepMatrix w;
  if (cfg.strategy == StepStrategy::kFixed) {
    w.w = Vector::Constant(n, cfg.fixed_alpha);
  } else if (cached_w != nullptr && cached_w->w.size() == n) {
    w = *cached_w;
    apply_ties(dyn.a.diagonal(), row_norms_sq(dyn.a), contacts, cfg.op, w.w);
  } else {
    w = step_matrix_frobenius(dyn.a, contacts, cfg.op);
  }
  Vector gamma = surrogate_gamma(w, contacts);

  const bool bb = cfg.strategy == StepStrategy::kBB1 || cfg.strategy == StepStrategy::kBB2 ||
                  cfg.strategy == StepStrategy::kBBAlternating;
  double alpha = w.w.mean();

  VfpiResult out;
  SolverReport& rep = out.report;
  Vector v = warm;
  Vector v_prev = warm;
  Vector av(n), av_prev(n), vss(n);
  Vector lambda = Vector::Zero(3 * static_cast<Index>(contacts.size()));
  double rho = 0.0;
  double nu = 1.0;

  for (int l = 1; l <= cfg.max_iterations; ++l) {
    spmv(dyn.a, v, av);
    if (bb && l >= 2) {
      BBVariant variant = cfg.strategy == StepStrategy::kBB2 ? BBVariant::kBB2 : BBVariant::kBB1;
      if (cfg.strategy == StepStrategy::kBBAlternating) variant = l % 2 == 0 ? BBVariant::kBB1 : BBVariant::kBB2;
      alpha = step_matrix_bb(v - v_prev, av - av_prev, variant, alpha);
      w.w.setConstant(alpha);
      gamma.setConstant(alpha);
      for (std::size_t m = 0; m < contacts.size(); ++m) {
        if (contacts[m].node_j >= 0) gamma[static_cast<Index>(m)] = 2.0 * alpha;
      }
    }

    vss = v - w.w.cwiseProduct(av - dyn.b);
    const Vector eta = contact_velocity(contacts, vss);
    lambda = contact_solve_oneshot(gamma, eta, contacts, cfg.op, cfg.regularization);
    add_contact_impulse(contacts, lambda, w.w, vss);

    Vector next;
    if (cfg.chebyshev && l >= cfg.chebyshev_start) {
      nu = chebyshev_nu(l, cfg.chebyshev_start, rho, nu);
      vss = cfg.under_relaxation * vss + (1.0 - cfg.under_relaxation) * v;
      next = chebyshev_update(vss, v_prev, nu);
    } else {
      next = vss;
    }

    const double theta = (next - v).norm();
    rep.residuals.push_back(theta);
    rep.iterations = l;
    if (!std::isfinite(theta) || !next.allFinite()) {
      throw DivergenceError("solve_vfpi: non-finite iterate at iteration " + std::to_string(l),
                            rep.residuals);
    }
    v_prev.swap(v);
    v.swap(next);
    av_prev.swap(av);
    if (theta < cfg.residual_tol) {
      rep.converged = true;
      break;
    }
    const std::size_t k = rep.residuals.size();
    if (k >= 2) rho = estimate_rho(rep.residuals[k - 1], rep.residuals[k - 2], rho);
  }

  rep.solve_ms = ms_since(start);
  Vector r = spmv(dyn.a, v) - dyn.b;
  add_contact_impulse(contacts, -lambda, Vector(), r);
  rep.consistency_raw = r.norm();
  rep.consistency = r.cwiseQuotient(dyn.a.diagonal()).norm();
  rep.scc = scc_residual(v, lambda, contacts);
  rep.lambda = lambda;
  out.v = std::move(v);
  out.lambda = std::move(lambda);
  return out;
}

}  // namespace cond
