#include "cond/baselines.hpp"

#include <Eigen/Eigenvalues>

#include <chrono>
#include <cmath>

#include "cond/error.hpp"
#include "cond/friction_cone.hpp"

namespace cond {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

Vector initial(const DelassusProblem& p, const Eigen::Ref<const Vector>& warm) {
  const Index m = 3 * p.contact_count();
  if (warm.size() == 0) return Vector::Zero(m);
  if (warm.size() != m) throw Error(ErrorCode::kInvalidArgument, "baseline: warm start dimension mismatch");
  return warm;
}

Vector3 project(const DelassusProblem& p, Index m, const Vector3& x) {
  return project_proximal<double>(x, p.contacts[static_cast<std::size_t>(m)].mu);
}

double largest_eigenvalue(const Matrix& a) {
  Vector x = Vector::Ones(a.rows()).normalized();
  double value = 0.0;
  for (int it = 0; it < 200; ++it) {
    Vector y = a * x;
    const double norm = y.norm();
    if (!(norm > 0.0)) return 0.0;
    const double next = x.dot(y);
    x = y / norm;
    if (std::abs(next - value) <= 1e-10 * std::abs(next)) {
      value = next;
      break;
    }
    value = next;
  }
  return value;
}

}  // namespace

DelassusProblem assemble_delassus(const SparseSymmetric& a, std::span<const Contact> contacts,
                                  const Eigen::Ref<const Vector>& b) {
  const auto start = Clock::now();
  if (b.size() != a.dim()) throw Error(ErrorCode::kInvalidArgument, "assemble_delassus: dimension mismatch");
  const SpdFactor f = factor_spd(a);
  const Eigen::SparseMatrix<double> jc = assemble_contact_jacobian(contacts, a.dim());
  const Matrix jt = Matrix(jc.transpose());

  DelassusProblem p;
  p.contacts.assign(contacts.begin(), contacts.end());
  p.ainv_jt = solve_with(f, jt);
  p.ainv_b = solve_with(f, Vector(b));
  const Matrix ac = jc * p.ainv_jt;
  p.ac = DenseSymmetric(0.5 * (ac + ac.transpose()));
  p.bc = jc * p.ainv_b;
  p.phi = Vector::Zero(p.bc.size());
  for (std::size_t m = 0; m < contacts.size(); ++m) p.phi[3 * static_cast<Index>(m)] = contacts[m].phi;
  p.assembly_ms = ms_since(start);
  return p;
}

double ccp_objective(const DelassusProblem& p, const Eigen::Ref<const Vector>& lambda) {
  return 0.5 * lambda.dot(p.ac.matrix() * lambda) + lambda.dot(p.bc + p.phi);
}

BaselineResult solve_pgs(const DelassusProblem& p, const BaselineConfig& cfg,
                         const Eigen::Ref<const Vector>& warm) {
  const auto start = Clock::now();
  BaselineResult out;
  Vector lambda = initial(p, warm);
  const Matrix& ac = p.ac.matrix();
  const Vector q = p.bc + p.phi;
  const Index nc = p.contact_count();

  Vector step(nc);
  for (Index m = 0; m < nc; ++m) {
    Matrix3 d = ac.block<3, 3>(3 * m, 3 * m);
    const double trace = d.trace();
    Eigen::SelfAdjointEigenSolver<Matrix3> eig(d, Eigen::EigenvaluesOnly);
    double top = eig.eigenvalues().maxCoeff();
    if (!(eig.eigenvalues().minCoeff() > 0.0)) top += 1e-12 * std::max(trace, 1e-300);
    step[m] = 1.0 / top;
  }

  for (int it = 1; it <= cfg.max_iterations; ++it) {
    const Vector before = lambda;
    for (Index m = 0; m < nc; ++m) {
      const Vector3 g = ac.middleRows<3>(3 * m) * lambda + q.segment<3>(3 * m);
      lambda.segment<3>(3 * m) = project(p, m, lambda.segment<3>(3 * m) - step[m] * g);
    }
    const double r = (p.ainv_jt * (lambda - before)).norm();
    out.report.residuals.push_back(r);
    out.report.iterations = it;
    if (r < cfg.residual_tol) {
      out.report.converged = true;
      break;
    }
  }
  out.report.solve_ms = ms_since(start);
  out.lambda = std::move(lambda);
  return out;
}

BaselineResult solve_apgd(const DelassusProblem& p, const BaselineConfig& cfg,
                          const Eigen::Ref<const Vector>& warm) {
  const auto start = Clock::now();
  BaselineResult out;
  const Matrix& ac = p.ac.matrix();
  const Vector q = p.bc + p.phi;
  const Index nc = p.contact_count();

  const double lip = 1.05 * largest_eigenvalue(ac);
  const double t = lip > 0.0 ? 1.0 / lip : 1.0;

  Vector lambda = initial(p, warm);
  Vector y = lambda;
  Vector next(lambda.size());
  double theta = 1.0;

  for (int it = 1; it <= cfg.max_iterations; ++it) {
    const Vector g = ac * y + q;
    const Vector trial = y - t * g;
    for (Index m = 0; m < nc; ++m) next.segment<3>(3 * m) = project(p, m, trial.segment<3>(3 * m));

    const double r = (p.ainv_jt * (next - lambda)).norm();
    out.report.residuals.push_back(r);
    out.report.iterations = it;

    const double theta_next = 0.5 * (-theta * theta + theta * std::sqrt(theta * theta + 4.0));
    const double beta = theta * (1.0 - theta) / (theta * theta + theta_next);
    if (g.dot(next - lambda) > 0.0) {
      // Momentum points uphill: restart from the projected point.
      y = next;
      theta = 1.0;
      out.report.restart_objectives.push_back(ccp_objective(p, next));
    } else {
      y = next + beta * (next - lambda);
      theta = theta_next;
    }
    lambda.swap(next);
    if (r < cfg.residual_tol) {
      out.report.converged = true;
      break;
    }
  }
  out.report.solve_ms = ms_since(start);
  out.lambda = std::move(lambda);
  return out;
}

Vector recover_velocity(const DelassusProblem& p, const Eigen::Ref<const Vector>& lambda) {
  if (lambda.size() != 3 * p.contact_count()) {
    throw Error(ErrorCode::kInvalidArgument, "recover_velocity: impulse dimension mismatch");
  }
  return p.ainv_b + p.ainv_jt * lambda;
}

}  // namespace cond
