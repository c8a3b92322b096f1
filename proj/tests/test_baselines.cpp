#include <doctest.h>

#include "cond/baselines.hpp"
#include "cond/cond_solver.hpp"
#include "cond/error.hpp"
#include "test_util.hpp"

using namespace cond;
using namespace testutil;

namespace {

Contact contact_at(Index node, const Vector3& normal, double mu) {
  Contact c;
  c.node_i = node;
  c.frame = contact_frame(normal);
  c.mu = c.mu2 = mu;
  return c;
}

SparseSymmetric scaled_identity(Index n, double s) {
  std::vector<Triplet> t;
  for (Index i = 0; i < n; ++i) t.emplace_back(i, i, s);
  return SparseSymmetric::from_triplets(n, t);
}

/// Random instance with four frictional contacts pressed into their normals.
struct Instance {
  SparseSymmetric a;
  Vector b;
  std::vector<Contact> contacts;
};

Instance pressed_instance(Rng& rng, Index nodes = 8) {
  Instance in;
  in.a = random_spd(rng, 3 * nodes);
  in.contacts = random_contacts(rng, nodes, 4, false);
  in.b = random_vector(rng, 3 * nodes, -1, 1);
  for (const auto& c : in.contacts) in.b.segment<3>(c.node_i) -= 4.0 * c.frame.row(0).transpose();
  return in;
}

/// Long projected-gradient run on the contact-space program.
Vector pg_oracle(const DelassusProblem& p, int iterations) {
  const Matrix& ac = p.ac.matrix();
  const double step = 1.0 / Eigen::SelfAdjointEigenSolver<Matrix>(ac).eigenvalues().maxCoeff();
  Vector l = Vector::Zero(ac.rows());
  for (int it = 0; it < iterations; ++it) {
    const Vector trial = l - step * (ac * l + p.bc + p.phi);
    for (Index m = 0; m < p.contact_count(); ++m) {
      l.segment<3>(3 * m) = project_proximal<double>(trial.segment<3>(3 * m), p.contacts[static_cast<std::size_t>(m)].mu);
    }
  }
  return l;
}

}  // namespace

TEST_CASE("Delassus assembly") {
  const std::vector<Contact> one{contact_at(3, Vector3(0.3, -0.4, 0.8).normalized(), 0.2)};
  const DelassusProblem p1 = assemble_delassus(SparseSymmetric::identity(6), one, Vector::Zero(6));
  CHECK((p1.ac.matrix() - Matrix::Identity(3, 3)).norm() < 1e-12);
  const DelassusProblem p2 = assemble_delassus(scaled_identity(6, 2.0), one, Vector::Zero(6));
  CHECK((p2.ac.matrix() - 0.5 * Matrix::Identity(3, 3)).norm() < 1e-12);
  CHECK(p2.assembly_ms >= 0.0);

  Rng rng(71);
  const Index nodes = 10;
  const SparseSymmetric a = random_spd(rng, 3 * nodes);
  const auto contacts = random_contacts(rng, nodes, 4, true);
  const Vector b = random_vector(rng, 3 * nodes);
  const DelassusProblem p = assemble_delassus(a, contacts, b);
  const Matrix j = assemble_contact_jacobian(contacts, 3 * nodes);
  const Matrix ainv = a.to_dense().inverse();
  const Matrix oracle = j * ainv * j.transpose();
  CHECK((p.ac.matrix() - oracle).cwiseAbs().maxCoeff() < 1e-8);
  CHECK((p.bc - j * ainv * b).cwiseAbs().maxCoeff() < 1e-8);

  CHECK_THROWS_AS(assemble_delassus(a, contacts, Vector::Zero(4)), Error);
}

TEST_CASE("single frictionless contact") {
  // A = 0.5 I, normal z: A_c = 2 I, b_c = 2 b
  const std::vector<Contact> cs{contact_at(0, Vector3::UnitZ(), 0.0)};
  const DelassusProblem p = assemble_delassus(scaled_identity(3, 0.5), cs, Vector3(0, 0, -2));
  CHECK(p.bc[0] == doctest::Approx(-4.0));
  BaselineConfig cfg;
  cfg.residual_tol = 1e-12;
  for (const BaselineResult& r : {solve_pgs(p, cfg), solve_apgd(p, cfg)}) {
    CHECK(r.report.converged);
    CHECK(r.lambda[0] == doctest::Approx(2.0).epsilon(1e-10));
    const Vector v = recover_velocity(p, r.lambda);
    CHECK(std::abs(v[2]) < 1e-10);
  }

  const DelassusProblem open = assemble_delassus(scaled_identity(3, 0.5), cs, Vector3(0, 0, 0.5));
  CHECK(open.bc[0] == doctest::Approx(1.0));
  CHECK(solve_pgs(open, cfg).lambda.norm() == 0.0);
  CHECK(solve_apgd(open, cfg).lambda.norm() == 0.0);
}

TEST_CASE("PGS, APGD and proximal COND agree on convex instances") {
  Rng rng(72);
  for (int trial = 0; trial < 5; ++trial) {
    const Instance in = pressed_instance(rng);
    const DelassusProblem p = assemble_delassus(in.a, in.contacts, in.b);
    BaselineConfig bcfg;
    bcfg.residual_tol = 1e-12;
    bcfg.max_iterations = 200000;
    const BaselineResult pgs = solve_pgs(p, bcfg);
    const BaselineResult apgd = solve_apgd(p, bcfg);
    REQUIRE(pgs.report.converged);
    REQUIRE(apgd.report.converged);

    SolverConfig cfg;
    cfg.op = ContactOperator::kProximal;
    cfg.residual_tol = 1e-12;
    cfg.max_iterations = 200000;
    const VfpiResult cond = solve_vfpi(AugmentedDynamics{in.a, in.b, in.a.dim()}, in.contacts, cfg,
                                       Vector::Zero(in.a.dim()));
    REQUIRE(cond.report.converged);
    CHECK(pgs.lambda.norm() > 1.0);
    CHECK((pgs.lambda - cond.lambda).norm() < 1e-4);
    CHECK((apgd.lambda - cond.lambda).norm() < 1e-4);
    CHECK((pgs.lambda - apgd.lambda).norm() <= 1e-3 * pgs.lambda.norm());
    CHECK((recover_velocity(p, pgs.lambda) - cond.v).norm() < 1e-6);
  }
}

TEST_CASE("APGD reaches the projected-gradient optimum") {
  Rng rng(73);
  for (int trial = 0; trial < 5; ++trial) {
    const Instance in = pressed_instance(rng);
    const DelassusProblem p = assemble_delassus(in.a, in.contacts, in.b);
    BaselineConfig cfg;
    cfg.residual_tol = 1e-13;
    cfg.max_iterations = 100000;
    const BaselineResult r = solve_apgd(p, cfg);
    const double oracle = ccp_objective(p, pg_oracle(p, 200000));
    CHECK(std::abs(ccp_objective(p, r.lambda) - oracle) < 1e-8);

    // restarted at the optimum it stops at once
    const BaselineResult again = solve_apgd(p, cfg, r.lambda);
    CHECK(again.report.iterations <= 2);
  }
}

TEST_CASE("APGD objective never increases across restarts") {
  Rng rng(74);
  int restarts = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const Instance in = pressed_instance(rng, 12);
    const DelassusProblem p = assemble_delassus(in.a, in.contacts, in.b);
    BaselineConfig cfg;
    cfg.residual_tol = 1e-12;
    cfg.max_iterations = 5000;
    const auto obj = solve_apgd(p, cfg).report.restart_objectives;
    restarts += static_cast<int>(obj.size());
    for (std::size_t k = 1; k < obj.size(); ++k) CHECK(obj[k] <= obj[k - 1] + 1e-12 * std::abs(obj[k - 1]));
  }
  CHECK(restarts > 0);
}

TEST_CASE("velocity recovery") {
  Rng rng(75);
  const Instance in = pressed_instance(rng);
  const DelassusProblem p = assemble_delassus(in.a, in.contacts, in.b);
  const Vector oracle = in.a.to_dense().ldlt().solve(in.b);
  CHECK((recover_velocity(p, Vector::Zero(12)) - oracle).norm() < 1e-10);

  const Matrix j = assemble_contact_jacobian(in.contacts, in.a.dim());
  for (int trial = 0; trial < 10; ++trial) {
    const Vector lambda = random_vector(rng, 12, -2, 2);
    const Vector v = recover_velocity(p, lambda);
    CHECK((j * v - (p.ac.matrix() * lambda + p.bc)).norm() < 1e-8);
  }
  CHECK_THROWS_AS(recover_velocity(p, Vector::Zero(5)), Error);

  // resting particle: m = 1, t = 0.01, gravity as force
  const std::vector<Contact> rest{contact_at(0, Vector3::UnitZ(), 0.5)};
  const DelassusProblem pr = assemble_delassus(scaled_identity(3, 200.0), rest, Vector3(0, 0, -9.81));
  BaselineConfig cfg;
  cfg.residual_tol = 1e-12;
  const BaselineResult r = solve_pgs(pr, cfg);
  CHECK(std::abs(recover_velocity(pr, r.lambda)[2]) < 1e-12);
  CHECK(r.lambda[0] == doctest::Approx(9.81));
}

TEST_CASE("warm start dimension is checked") {
  const std::vector<Contact> cs{contact_at(0, Vector3::UnitZ(), 0.5)};
  const DelassusProblem p = assemble_delassus(SparseSymmetric::identity(3), cs, Vector3(0, 0, -1));
  CHECK_THROWS_AS(solve_pgs(p, BaselineConfig{}, Vector::Zero(6)), Error);
  CHECK_THROWS_AS(solve_apgd(p, BaselineConfig{}, Vector::Zero(2)), Error);
}
