#include "cond/dynamics.hpp"

#include <cmath>
#include <string>

#include "cond/error.hpp"

namespace cond {

Index velocity_dim(std::span<const Body> bodies) {
  Index n = 0;
  for (const auto& b : bodies) n += b.v_dim();
  return n;
}

Index position_dim(std::span<const Body> bodies) {
  Index n = 0;
  for (const auto& b : bodies) n += b.q_dim();
  return n;
}

void assign_offsets(std::span<Body> bodies) {
  Index q = 0;
  Index v = 0;
  for (auto& b : bodies) {
    b.q_offset = q;
    b.v_offset = v;
    q += b.q_dim();
    v += b.v_dim();
  }
}

Eigen::Quaterniond orientation(const Body& body, const SystemState& state) {
  if (body.kind != BodyKind::kRigid) return Eigen::Quaterniond::Identity();
  const auto q = state.q.segment<4>(body.q_offset + 3);
  return Eigen::Quaterniond(q[0], q[1], q[2], q[3]);
}

Vector3 position(const Body& body, const SystemState& state) {
  return state.q.segment<3>(body.q_offset);
}

Matrix3 world_inertia(const Body& body, const SystemState& state) {
  const Matrix3 r = orientation(body, state).toRotationMatrix();
  return r * body.inertia * r.transpose();
}

namespace {

const Body& particle(std::span<const Body> bodies, Index i) {
  if (i < 0 || i >= static_cast<Index>(bodies.size())) {
    throw Error(ErrorCode::kInvalidArgument,
                "constraint references body " + std::to_string(i) + " out of range");
  }
  const Body& b = bodies[static_cast<std::size_t>(i)];
  if (b.kind != BodyKind::kParticle) {
    throw Error(ErrorCode::kInvalidArgument, "constraints act on particle bodies only");
  }
  return b;
}

void push_columns(std::vector<Index>& cols, const Body& b) {
  for (Index k = 0; k < 3; ++k) cols.push_back(b.v_offset + k);
}

}  // namespace

ConstraintEval constraint_eval(const ConstraintPotential& c, const SystemState& state,
                               std::span<const Body> bodies) {
  ConstraintEval out;
  const Body& a = particle(bodies, c.body_a);
  const Vector3 pa = position(a, state);
  switch (c.kind) {
    case ConstraintKind::kDistanceSpring: {
      const Body& b = particle(bodies, c.body_b);
      const Vector3 d = position(b, state) - pa;
      const double len = d.norm();
      if (len < 1e-12) {
        throw Error(ErrorCode::kDegenerateConstraint,
                    "distance spring endpoints coincide");
      }
      const Vector3 dir = d / len;
      out.error = Vector::Constant(1, len - c.rest_length);
      out.jacobian.resize(1, 6);
      out.jacobian.block<1, 3>(0, 0) = -dir.transpose();
      out.jacobian.block<1, 3>(0, 3) = dir.transpose();
      push_columns(out.columns, a);
      push_columns(out.columns, b);
      break;
    }
    case ConstraintKind::kTie: {
      if (c.body_b < 0) {
        out.error = pa - c.anchor;
        out.jacobian = Matrix::Identity(3, 3);
        push_columns(out.columns, a);
      } else {
        const Body& b = particle(bodies, c.body_b);
        out.error = pa - position(b, state);
        out.jacobian.resize(3, 6);
        out.jacobian << Matrix3::Identity(), -Matrix3::Identity();
        push_columns(out.columns, a);
        push_columns(out.columns, b);
      }
      break;
    }
  }
  return out;
}

Vector damping_matrix(const DampingPolicy& policy, const ConstraintPotential& c,
                      const SystemState& state, std::span<const Body> bodies) {
  const Index dim = c.kind == ConstraintKind::kTie && c.body_b < 0 ? 3 : 6;
  if (policy.variant == DampingPolicy::Variant::kConstant) {
    return Vector::Constant(dim, policy.constant_value);
  }
  // Geometric stiffness (∂J_eᵀ/∂q) K e, replaced by its absolute column sums.
  Vector diag = Vector::Constant(dim, policy.floor);
  if (c.kind == ConstraintKind::kDistanceSpring) {
    const ConstraintEval ev = constraint_eval(c, state, bodies);
    const Vector3 d = position(bodies[static_cast<std::size_t>(c.body_b)], state) -
                      position(bodies[static_cast<std::size_t>(c.body_a)], state);
    const double len = d.norm();
    const Vector3 dir = d / len;
    const Matrix3 p = (Matrix3::Identity() - dir * dir.transpose()) / len;
    Matrix g(6, 6);
    g << p, -p, -p, p;
    g *= c.stiffness * ev.error[0];
    diag += g.cwiseAbs().colwise().sum().transpose();
  }
  return diag;
}

AssembledDynamics assemble_step(const SystemState& state, std::span<const Body> bodies,
                                std::span<const ConstraintPotential> constraints,
                                const DampingPolicy& damping, const ExternalLoads& loads) {
  const Index n = velocity_dim(bodies);
  if (state.v.size() != n || state.q.size() != position_dim(bodies)) {
    throw Error(ErrorCode::kInvalidState, "assemble_step: state dimension mismatch");
  }
  if (!state.q.allFinite() || !state.v.allFinite()) {
    throw Error(ErrorCode::kInvalidState, "assemble_step: non-finite state");
  }
  const double t = state.step_size;
  if (!(t > 0.0)) throw Error(ErrorCode::kInvalidState, "assemble_step: step size must be > 0");

  std::vector<Triplet> trip;
  trip.reserve(static_cast<std::size_t>(n) * 3 + constraints.size() * 36);
  Vector b = Vector::Zero(n);
  const double mscale = 2.0 / t;

  for (const auto& body : bodies) {
    const Index o = body.v_offset;
    for (Index k = 0; k < 3; ++k) trip.emplace_back(o + k, o + k, mscale * body.mass);
    b.segment<3>(o) = mscale * body.mass * state.v.segment<3>(o) + body.mass * loads.gravity;
    if (body.kind == BodyKind::kRigid) {
      const Matrix3 iw = world_inertia(body, state);
      for (Index r = 0; r < 3; ++r) {
        for (Index c = 0; c < 3; ++c) trip.emplace_back(o + 3 + r, o + 3 + c, mscale * iw(r, c));
      }
      const Vector3 w = state.v.segment<3>(o + 3);
      b.segment<3>(o + 3) = mscale * (iw * w) - w.cross(iw * w);
    }
  }

  for (const auto& c : constraints) {
    const ConstraintEval ev = constraint_eval(c, state, bodies);
    const Matrix jtj = c.stiffness * ev.jacobian.transpose() * ev.jacobian;
    const Vector force = c.stiffness * ev.jacobian.transpose() * ev.error;
    const Vector e_diag = damping_matrix(damping, c, state, bodies);
    const auto m = static_cast<Index>(ev.columns.size());
    for (Index r = 0; r < m; ++r) {
      b[ev.columns[r]] -= force[r];
      for (Index col = 0; col < m; ++col) {
        double value = 0.5 * t * jtj(r, col);
        if (r == col) value += 0.5 * t * e_diag[r];
        if (value != 0.0) trip.emplace_back(ev.columns[r], ev.columns[col], value);
      }
    }
  }

  if (loads.force.size() != 0) {
    if (loads.force.size() != n) {
      throw Error(ErrorCode::kInvalidArgument, "assemble_step: external force dimension mismatch");
    }
    b += loads.force;
  }
  return AssembledDynamics{SparseSymmetric::from_triplets(n, trip), std::move(b)};
}

SystemState integrate(const SystemState& state, std::span<const Body> bodies,
                      const Eigen::Ref<const Vector>& vhat) {
  if (vhat.size() != state.v.size()) {
    throw Error(ErrorCode::kInvalidArgument, "integrate: velocity dimension mismatch");
  }
  SystemState next = state;
  const double t = state.step_size;
  for (const auto& body : bodies) {
    next.q.segment<3>(body.q_offset) += t * vhat.segment<3>(body.v_offset);
    if (body.kind == BodyKind::kRigid) {
      const Vector3 w = vhat.segment<3>(body.v_offset + 3);
      const double angle = w.norm() * t;
      Eigen::Quaterniond dq = Eigen::Quaterniond::Identity();
      if (angle > 0.0) dq = Eigen::Quaterniond(Eigen::AngleAxisd(angle, w.normalized()));
      Eigen::Quaterniond q = (dq * orientation(body, state)).normalized();
      next.q.segment<4>(body.q_offset + 3) << q.w(), q.x(), q.y(), q.z();
    }
  }
  next.v = 2.0 * vhat - state.v;
  next.step = state.step + 1;
  return next;
}

double kinetic_energy(const SystemState& state, std::span<const Body> bodies) {
  double ke = 0.0;
  for (const auto& body : bodies) {
    ke += 0.5 * body.mass * state.v.segment<3>(body.v_offset).squaredNorm();
    if (body.kind == BodyKind::kRigid) {
      const Vector3 w = state.v.segment<3>(body.v_offset + 3);
      ke += 0.5 * w.dot(world_inertia(body, state) * w);
    }
  }
  return ke;
}

}  // namespace cond
