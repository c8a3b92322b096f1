#pragma once

#include <Eigen/SparseCore>

#include <array>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "cond/dynamics.hpp"
#include "cond/sparse.hpp"

namespace cond {

struct Plane {
  Vector3 point = Vector3::Zero();
  Vector3 normal = Vector3::UnitZ();
};

struct StaticSphere {
  Vector3 center = Vector3::Zero();
  double radius = 1.0;
};

using StaticPrimitive = std::variant<Plane, StaticSphere>;

/// Bounding sphere around a particle node. Spheres sharing a group never
/// collide with each other (no lattice self-collision).
struct SphereProxy {
  Index body = 0;
  double radius = 0.0;
  int group = 0;
};

/// Point on a rigid body surface, body frame.
struct PointProxy {
  Index body = 0;
  Vector3 local_point = Vector3::Zero();
};

struct Geometry {
  std::vector<StaticPrimitive> statics;
  std::vector<SphereProxy> spheres;
  std::vector<PointProxy> points;
  double margin = 1e-4;
};

struct ProxyRef {
  enum class Kind { kSphere, kPoint };
  Kind kind = Kind::kSphere;
  Index index = 0;

  bool operator==(const ProxyRef&) const = default;
};

/// Output of the narrow phase. The normal points from the second participant
/// (static primitive or `second`) toward `first`.
struct RawContact {
  Vector3 point = Vector3::Zero();
  Vector3 normal = Vector3::UnitZ();
  double depth = 0.0;
  double separation = 0.0;
  ProxyRef first;
  std::optional<ProxyRef> second;
  Index primitive = -1;
};

std::vector<RawContact> detect_contacts(const SystemState& state, std::span<const Body> bodies,
                                        const Geometry& geometry);

/// Rows (n, t1, t2). t1 is the component of the global axis least aligned
/// with n orthogonal to n; ties pick the lowest axis index.
Matrix3 contact_frame(const Vector3& normal);

struct StabilizationParams {
  double beta_err = 0.2;
  double restitution = 0.0;
  double step_size = 0.01;
  double rest_threshold = 0.01;
};

/// φ_n = −(β/t)·depth + e·min(0, v_n_prev), the restitution part only when
/// |v_n_prev| exceeds the rest threshold.
double stabilization_term(double depth, double vn_prev, const StabilizationParams& params);

struct ContactParams {
  double mu = 0.2;
  bool anisotropic = false;
  double mu1 = 0.2;  // along t1
  double mu2 = 0.2;  // along t2
  double beta_err = 0.2;
  double restitution = 0.0;
  double rest_threshold = 0.01;
  double kv = 1e5;
};

enum class ContactKind { kStatic, kDynamic };

using ContactKey = std::array<long, 5>;

/// One nodal contact. Node indices are offsets of 3-DOF blocks in the
/// augmented velocity vector (original coordinates first, then virtual nodes).
struct Contact {
  ContactKind kind = ContactKind::kStatic;
  Index node_i = 0;
  Index node_j = -1;
  Matrix3 frame = Matrix3::Identity();
  double mu = 0.0;
  double mu2 = 0.0;  // second tangential coefficient, anisotropic cones
  bool anisotropic = false;
  double depth = 0.0;
  double phi = 0.0;
  Vector3 point = Vector3::Zero();
  ContactKey key{};
  Vector3 warm_impulse = Vector3::Zero();
};

struct NodalContactSet {
  std::vector<Contact> contacts;
  Index n_original = 0;
  Index n_virtual = 0;
  /// Maps original velocities to collision-point velocities, 3 n_v × n.
  Eigen::SparseMatrix<double, Eigen::RowMajor> jv;
  double kv = 0.0;

  Index augmented_dim() const { return n_original + 3 * n_virtual; }
};

/// Contacts on particle nodes stay on the node; every rigid surface point and
/// every further contact on an already-contacted particle gets a one-step
/// virtual node, so each node carries at most one contact.
NodalContactSet nodalize(std::span<const RawContact> raw, const SystemState& state,
                         std::span<const Body> bodies, const Geometry& geometry,
                         const ContactParams& params);

struct AugmentedDynamics {
  SparseSymmetric a;
  Vector b;
  Index n_original = 0;

  Index dim() const { return b.size(); }
};

///   A = [A_o + k_v J_vᵀJ_v, −k_v J_vᵀ; −k_v J_v, k_v I],  b = (b_o; 0).
AugmentedDynamics augment_dynamics(const SparseSymmetric& a_o, const Vector& b_o,
                                   const Eigen::SparseMatrix<double, Eigen::RowMajor>& jv,
                                   double kv);

/// Per-contact velocity J_c v̂ in contact frames (3 n_c).
Vector contact_velocity(std::span<const Contact> contacts, const Eigen::Ref<const Vector>& v);

/// out += scale ⊙ J_cᵀ λ, where `scale` is a per-coordinate diagonal (empty: 1).
void add_contact_impulse(std::span<const Contact> contacts, const Eigen::Ref<const Vector>& lambda,
                         const Eigen::Ref<const Vector>& scale, Eigen::Ref<Vector> out);

Eigen::SparseMatrix<double> assemble_contact_jacobian(std::span<const Contact> contacts, Index dim);

/// Original velocity extended with virtual-node velocities J_v v.
Vector extend_with_virtual(const NodalContactSet& set, const Eigen::Ref<const Vector>& v_original);

/// Largest penetration depth of any proxy against any primitive or proxy.
double max_penetration(const SystemState& state, std::span<const Body> bodies,
                       const Geometry& geometry);

}  // namespace cond
