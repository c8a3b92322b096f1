#include <doctest.h>

#include "cond/contact.hpp"
#include "cond/error.hpp"
#include "test_util.hpp"

using namespace cond;
using namespace testutil;

namespace {

struct Scene {
  std::vector<Body> bodies;
  SystemState state;
  Geometry geometry;
};

Scene particle_scene(const std::vector<Vector3>& centers) {
  Scene s;
  s.bodies.resize(centers.size());
  assign_offsets(s.bodies);
  s.state.q = Vector::Zero(3 * static_cast<Index>(centers.size()));
  s.state.v = s.state.q;
  for (std::size_t i = 0; i < centers.size(); ++i) s.state.q.segment<3>(3 * static_cast<Index>(i)) = centers[i];
  return s;
}

Scene box_scene(const Vector3& com, const Eigen::Quaterniond& rot) {
  Scene s;
  Body b;
  b.kind = BodyKind::kRigid;
  b.mass = 0.5;
  s.bodies.push_back(b);
  assign_offsets(s.bodies);
  s.state.q = Vector::Zero(7);
  s.state.q.head<3>() = com;
  s.state.q.segment<4>(3) << rot.w(), rot.x(), rot.y(), rot.z();
  s.state.v = Vector::Zero(6);
  for (double x : {-0.1, 0.1}) {
    for (double y : {-0.1, 0.1}) s.geometry.points.push_back({0, Vector3(x, y, -0.1)});
  }
  return s;
}

Matrix3 skew(const Vector3& r) {
  Matrix3 m;
  m << 0, -r.z(), r.y(), r.z(), 0, -r.x(), -r.y(), r.x(), 0;
  return m;
}

}  // namespace

TEST_CASE("sphere against plane") {
  Scene s = particle_scene({Vector3(0, 0, 0.4)});
  s.geometry.statics.push_back(Plane{});
  s.geometry.spheres.push_back({0, 0.5, 0});
  const auto raw = detect_contacts(s.state, s.bodies, s.geometry);
  REQUIRE(raw.size() == 1);
  CHECK(raw[0].depth == doctest::Approx(0.1));
  CHECK((raw[0].point - Vector3(0, 0, -0.1)).norm() < 1e-15);
  CHECK(raw[0].normal == Vector3::UnitZ());
  CHECK(!raw[0].second);
}

TEST_CASE("point particle above the plane has no contact") {
  Scene s = particle_scene({Vector3(0, 0, 1)});
  s.geometry.statics.push_back(Plane{});
  s.geometry.spheres.push_back({0, 0.0, 0});
  CHECK(detect_contacts(s.state, s.bodies, s.geometry).empty());
}

TEST_CASE("contact persists inside the margin only") {
  Scene s = particle_scene({Vector3(0, 0, 0.5 * 1e-4)});
  s.geometry.statics.push_back(Plane{});
  s.geometry.spheres.push_back({0, 0.0, 0});
  const auto raw = detect_contacts(s.state, s.bodies, s.geometry);
  REQUIRE(raw.size() == 1);
  CHECK(raw[0].depth == 0.0);
  s.state.q[2] = 2e-4;
  CHECK(detect_contacts(s.state, s.bodies, s.geometry).empty());
}

TEST_CASE("two spheres overlapping") {
  Scene s = particle_scene({Vector3(0, 0, 0), Vector3(0.9 * std::sqrt(0.5), 0.9 * std::sqrt(0.5), 0)});
  s.geometry.spheres.push_back({0, 0.5, 0});
  s.geometry.spheres.push_back({1, 0.5, 1});
  const auto raw = detect_contacts(s.state, s.bodies, s.geometry);
  REQUIRE(raw.size() == 1);
  CHECK(raw[0].second.has_value());
  CHECK(raw[0].depth == doctest::Approx(0.1));
  CHECK((raw[0].normal - Vector3(-1, -1, 0).normalized()).norm() < 1e-12);

  s.geometry.spheres[1].group = 0;
  CHECK(detect_contacts(s.state, s.bodies, s.geometry).empty());
}

TEST_CASE("static sphere primitive") {
  Scene s = particle_scene({Vector3(0, 0, 1.95)});
  s.geometry.statics.push_back(StaticSphere{Vector3::Zero(), 2.0});
  s.geometry.spheres.push_back({0, 0.0, 0});
  const auto raw = detect_contacts(s.state, s.bodies, s.geometry);
  REQUIRE(raw.size() == 1);
  CHECK(raw[0].depth == doctest::Approx(0.05));
  CHECK(raw[0].normal == Vector3::UnitZ());
}

TEST_CASE("contact frame") {
  Matrix3 expected;
  expected << 0, 0, 1, 1, 0, 0, 0, 1, 0;
  CHECK((contact_frame(Vector3::UnitZ()) - expected).norm() == 0.0);

  Rng rng(31);
  for (int trial = 0; trial < 200; ++trial) {
    const Vector3 n = random_unit(rng);
    const Matrix3 r = contact_frame(n);
    CHECK((r * r.transpose() - Matrix3::Identity()).norm() < 1e-12);
    CHECK((r.row(0).transpose() - n).norm() < 1e-15);
    CHECK(r.determinant() == doctest::Approx(1.0));
  }
  CHECK(contact_frame(Vector3(1, 0, 0)) == contact_frame(Vector3(1 + 1e-12, 0, 0).normalized()));
  CHECK_THROWS_AS(contact_frame(Vector3::Zero()), Error);
}

TEST_CASE("stabilization term") {
  StabilizationParams p;
  p.beta_err = 0.2;
  p.step_size = 0.01;
  p.restitution = 0.0;
  CHECK(stabilization_term(0.01, 0.0, p) == doctest::Approx(-0.2));
  p.restitution = 0.5;
  CHECK(stabilization_term(0.0, -1.0, p) == doctest::Approx(-0.5));
  CHECK(stabilization_term(0.0, -0.001, p) == 0.0);
  CHECK(stabilization_term(0.0, 2.0, p) == 0.0);
}

TEST_CASE("particle contact stays on its node") {
  Scene s = particle_scene({Vector3(0, 0, 0)});
  s.geometry.statics.push_back(Plane{});
  s.geometry.spheres.push_back({0, 0.0, 0});
  const auto raw = detect_contacts(s.state, s.bodies, s.geometry);
  const NodalContactSet set = nodalize(raw, s.state, s.bodies, s.geometry, ContactParams{});
  REQUIRE(set.contacts.size() == 1);
  CHECK(set.n_virtual == 0);
  CHECK(set.contacts[0].kind == ContactKind::kStatic);
  CHECK(set.contacts[0].node_i == 0);
  CHECK(set.jv.rows() == 0);
}

TEST_CASE("second contact on a particle gets a virtual node") {
  Scene s = particle_scene({Vector3(0, 0, 0)});
  s.geometry.statics.push_back(Plane{});
  s.geometry.statics.push_back(Plane{Vector3::Zero(), Vector3::UnitX()});
  s.geometry.spheres.push_back({0, 0.01, 0});
  s.state.q = Vector3(0.005, 0, 0.008);
  const auto raw = detect_contacts(s.state, s.bodies, s.geometry);
  REQUIRE(raw.size() == 2);
  const NodalContactSet set = nodalize(raw, s.state, s.bodies, s.geometry, ContactParams{});
  CHECK(set.n_virtual == 1);
  // detection order: the first plane keeps the original node
  CHECK(set.contacts[0].frame.row(0).transpose() == Vector3::UnitZ());
  CHECK(set.contacts[0].node_i == 0);
  CHECK(set.contacts[1].node_i == 3);
  CHECK((Matrix(set.jv) - Matrix::Identity(3, 3)).norm() == 0.0);
}

TEST_CASE("rigid vertex on plane") {
  Scene s = box_scene(Vector3(0, 0, 0.1), Eigen::Quaterniond::Identity());
  s.geometry.statics.push_back(Plane{});
  const auto raw = detect_contacts(s.state, s.bodies, s.geometry);
  REQUIRE(raw.size() == 4);
  const NodalContactSet set = nodalize(raw, s.state, s.bodies, s.geometry, ContactParams{});
  CHECK(set.n_virtual == 4);
  const Matrix jv = set.jv;
  for (std::size_t m = 0; m < 4; ++m) {
    const Contact& c = set.contacts[m];
    CHECK(c.kind == ContactKind::kStatic);
    const Index row = c.node_i - set.n_original;
    const Vector3 r = c.point - s.state.q.head<3>();
    Eigen::Matrix<double, 3, 6> expected;
    expected << Matrix3::Identity(), -skew(r);
    CHECK((jv.block(row, 0, 3, 6) - expected).norm() < 1e-15);
  }
  // J_v maps velocities to the true vertex velocities
  Rng rng(32);
  s.state.v = random_vector(rng, 6);
  const Vector ext = extend_with_virtual(set, s.state.v);
  for (std::size_t m = 0; m < 4; ++m) {
    const Contact& c = set.contacts[m];
    const Vector3 oracle = s.state.v.head<3>() + s.state.v.tail<3>().cross(c.point - s.state.q.head<3>());
    CHECK((ext.segment<3>(c.node_i) - oracle).norm() < 1e-15);
  }
}

TEST_CASE("rigid vertex on a lattice node is a dynamic contact") {
  Scene s;
  Body box;
  box.kind = BodyKind::kRigid;
  s.bodies = {box, Body{}};
  assign_offsets(s.bodies);
  s.state.q = Vector::Zero(10);
  s.state.q.head<3>() = Vector3(0, 0, 0.1);
  s.state.q[3] = 1.0;
  s.state.q.segment<3>(7) = Vector3(0.1, 0.1, -0.009);
  s.state.v = Vector::Zero(9);
  s.geometry.points.push_back({0, Vector3(0.1, 0.1, -0.1)});
  s.geometry.spheres.push_back({1, 0.01, 1});
  const auto raw = detect_contacts(s.state, s.bodies, s.geometry);
  REQUIRE(raw.size() == 1);
  const NodalContactSet set = nodalize(raw, s.state, s.bodies, s.geometry, ContactParams{});
  REQUIRE(set.contacts.size() == 1);
  const Contact& c = set.contacts[0];
  CHECK(c.kind == ContactKind::kDynamic);
  CHECK(c.node_i == 9);
  CHECK(c.node_j == 6);
  CHECK(c.depth == doctest::Approx(0.001));
  CHECK(c.frame.row(0).transpose().isApprox(Vector3::UnitZ()));
}

TEST_CASE("augmentation") {
  SUBCASE("scalar toy") {
    const auto a_o = SparseSymmetric::from_triplets(1, {{0, 0, 1.0}});
    Eigen::SparseMatrix<double, Eigen::RowMajor> jv(1, 1);
    jv.insert(0, 0) = 1.0;
    const AugmentedDynamics d = augment_dynamics(a_o, Vector::Ones(1), jv, 10.0);
    Matrix expected(2, 2);
    expected << 11, -10, -10, 10;
    CHECK((d.a.to_dense() - expected).norm() == 0.0);
    CHECK(d.b == Eigen::Vector2d(1, 0));
    // λ² − 21λ + 10 = 0
    const Eigen::Vector2d eig = Eigen::SelfAdjointEigenSolver<Matrix>(d.a.to_dense()).eigenvalues();
    CHECK(eig[0] == doctest::Approx((21.0 - std::sqrt(401.0)) / 2.0));
    CHECK(eig[1] == doctest::Approx((21.0 + std::sqrt(401.0)) / 2.0));
  }
  SUBCASE("no virtual nodes") {
    Rng rng(33);
    const SparseSymmetric a_o = random_spd(rng, 6);
    const Vector b = random_vector(rng, 6);
    const AugmentedDynamics d = augment_dynamics(a_o, b, Eigen::SparseMatrix<double, Eigen::RowMajor>(0, 6), 1e5);
    CHECK(d.a.to_dense() == a_o.to_dense());
    CHECK(d.b == b);
  }
  SUBCASE("random instances stay positive definite") {
    Rng rng(34);
    for (int trial = 0; trial < 20; ++trial) {
      const SparseSymmetric a_o = random_spd(rng, 12);
      Eigen::SparseMatrix<double, Eigen::RowMajor> jv =
          Matrix::NullaryExpr(9, 12, [&] { return uniform(rng, -1, 1); }).sparseView();
      const AugmentedDynamics d = augment_dynamics(a_o, random_vector(rng, 12), jv, 1e5);
      CHECK(d.dim() == 21);
      CHECK(d.b.tail(9).norm() == 0.0);
      CHECK(min_eigenvalue(d.a.to_dense()) > 0.0);
    }
  }
  SUBCASE("dimension mismatch") {
    CHECK_THROWS_AS(augment_dynamics(SparseSymmetric::identity(3), Vector::Ones(2),
                                     Eigen::SparseMatrix<double, Eigen::RowMajor>(0, 3), 1.0),
                    Error);
  }
}

TEST_CASE("eliminating virtual nodes injects no spurious force") {
  Rng rng(35);
  for (int trial = 0; trial < 10; ++trial) {
    const Index n = 12;
    const Index nv = 3;
    const SparseSymmetric a_o = random_spd(rng, n);
    const Vector b_o = random_vector(rng, n);
    Eigen::SparseMatrix<double, Eigen::RowMajor> jv =
        Matrix::NullaryExpr(3 * nv, n, [&] { return uniform(rng, -1, 1); }).sparseView();
    const AugmentedDynamics d = augment_dynamics(a_o, b_o, jv, 1e5);

    // contacts on two original nodes and all virtual nodes
    std::vector<Contact> contacts;
    for (Index node : {Index(0), Index(3), n, n + 3, n + 6}) {
      Contact c;
      c.node_i = node;
      c.frame = contact_frame(random_unit(rng));
      contacts.push_back(c);
    }
    const Vector lambda = random_vector(rng, 15, -2, 2);
    Vector rhs = d.b;
    add_contact_impulse(contacts, lambda, Vector(), rhs);
    const Vector v = d.a.to_dense().ldlt().solve(rhs);

    const Vector f_o = (rhs - d.b).head(n);
    const Vector f_v = (rhs - d.b).tail(3 * nv);
    const Vector lhs = a_o.to_dense() * v.head(n);
    const Vector expected = b_o + Matrix(jv).transpose() * f_v + f_o;
    CHECK((lhs - expected).norm() <= 1e-8 * expected.norm());
  }
}

TEST_CASE("block contact Jacobian matches the assembled matrix") {
  Rng rng(36);
  for (int trial = 0; trial < 20; ++trial) {
    const Index nodes = 15;
    const auto contacts = random_contacts(rng, nodes, 6, true);
    const Eigen::SparseMatrix<double> j = assemble_contact_jacobian(contacts, 3 * nodes);
    const Vector v = random_vector(rng, 3 * nodes);
    CHECK((contact_velocity(contacts, v) - j * v).cwiseAbs().maxCoeff() < 1e-12);

    const Vector lambda = random_vector(rng, j.rows());
    Vector out = Vector::Zero(3 * nodes);
    add_contact_impulse(contacts, lambda, Vector(), out);
    CHECK((out - j.transpose() * lambda).cwiseAbs().maxCoeff() < 1e-12);

    const Vector scale = random_vector(rng, 3 * nodes, 0.1, 1.0);
    Vector scaled = Vector::Zero(3 * nodes);
    add_contact_impulse(contacts, lambda, scale, scaled);
    CHECK((scaled - scale.cwiseProduct(j.transpose() * lambda)).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("max penetration") {
  Scene s = particle_scene({Vector3(0, 0, 0.04), Vector3(1, 0, 0.5)});
  s.geometry.statics.push_back(Plane{});
  s.geometry.spheres.push_back({0, 0.05, 0});
  s.geometry.spheres.push_back({1, 0.05, 0});
  CHECK(max_penetration(s.state, s.bodies, s.geometry) == doctest::Approx(0.01));
}
