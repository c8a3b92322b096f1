#pragma once

#include <Eigen/Geometry>

#include <span>
#include <vector>

#include "cond/sparse.hpp"

namespace cond {

enum class BodyKind { kParticle, kRigid };

/// A particle carries 3 position / 3 velocity coordinates. A rigid body
/// carries position + unit quaternion (w, x, y, z) in q and linear + angular
/// velocity (world frame) in v.
struct Body {
  BodyKind kind = BodyKind::kParticle;
  double mass = 1.0;
  Matrix3 inertia = Matrix3::Identity();  // body frame, rigid only
  Index q_offset = 0;
  Index v_offset = 0;

  Index q_dim() const { return kind == BodyKind::kParticle ? 3 : 7; }
  Index v_dim() const { return kind == BodyKind::kParticle ? 3 : 6; }
};

struct SystemState {
  Vector q;
  Vector v;
  long step = 0;
  double step_size = 0.01;
};

enum class ConstraintKind {
  kDistanceSpring,
  /// Zero-rest-length 3-D tie between two particles, or between a particle
  /// and a fixed anchor when `body_b` is negative.
  kTie,
};

/// Potential ψ = ½ eᵀ K e acting on particle bodies.
struct ConstraintPotential {
  ConstraintKind kind = ConstraintKind::kDistanceSpring;
  Index body_a = 0;
  Index body_b = 1;
  double stiffness = 1.0;    // N/m, K = stiffness·I
  double rest_length = 0.0;  // m, distance springs only
  Vector3 anchor = Vector3::Zero();

  Index dim() const { return kind == ConstraintKind::kDistanceSpring ? 1 : 3; }
};

/// Constraint error, its Jacobian as a dense block, and the global velocity
/// indices that the block columns refer to.
struct ConstraintEval {
  Vector error;
  Matrix jacobian;
  std::vector<Index> columns;
};

struct DampingPolicy {
  enum class Variant { kConstant, kGeometric };
  Variant variant = Variant::kConstant;
  double constant_value = 0.0;
  double floor = 1e-6;  // N·s/m, geometric variant
};

struct AssembledDynamics {
  SparseSymmetric a;
  Vector b;

  Index dim() const { return b.size(); }
};

struct ExternalLoads {
  Vector3 gravity = Vector3(0.0, 0.0, -9.81);
  /// Generalized external force (length == v.size()); empty means none.
  Vector force;
};

Index velocity_dim(std::span<const Body> bodies);
Index position_dim(std::span<const Body> bodies);

/// Lays out offsets in body order and returns the body list.
void assign_offsets(std::span<Body> bodies);

Matrix3 world_inertia(const Body& body, const SystemState& state);
Eigen::Quaterniond orientation(const Body& body, const SystemState& state);
Vector3 position(const Body& body, const SystemState& state);

ConstraintEval constraint_eval(const ConstraintPotential& c, const SystemState& state,
                               std::span<const Body> bodies);

/// Diagonal damping contribution E, indexed like `ConstraintEval::columns`.
Vector damping_matrix(const DampingPolicy& policy, const ConstraintPotential& c,
                      const SystemState& state, std::span<const Body> bodies);

/// Linearized implicit step A v̂ = b with
///   A = (2/t) M + ½ (J_eᵀ K J_e + E) t
///   b = (2/t) M v − C v − J_eᵀ K e + f_ext.
/// All right-hand terms are forces; gravity enters f_ext without a Hessian.
AssembledDynamics assemble_step(const SystemState& state, std::span<const Body> bodies,
                                std::span<const ConstraintPotential> constraints,
                                const DampingPolicy& damping, const ExternalLoads& loads);

/// q ← update(q, v̂, t); v_{k+1} = 2 v̂ − v_k.
SystemState integrate(const SystemState& state, std::span<const Body> bodies,
                      const Eigen::Ref<const Vector>& vhat);

double kinetic_energy(const SystemState& state, std::span<const Body> bodies);

}  // namespace cond
