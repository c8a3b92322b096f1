#include "cond/contact.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cond/error.hpp"

namespace cond {

namespace {

Matrix3 skew(const Vector3& r) {
  Matrix3 s;
  s << 0.0, -r.z(), r.y(), r.z(), 0.0, -r.x(), -r.y(), r.x(), 0.0;
  return s;
}

struct ProxyState {
  Vector3 center;
  double radius;
  Index body;
};

ProxyState proxy_state(const ProxyRef& ref, const SystemState& state,
                       std::span<const Body> bodies, const Geometry& g) {
  if (ref.kind == ProxyRef::Kind::kSphere) {
    const auto& s = g.spheres[static_cast<std::size_t>(ref.index)];
    return {position(bodies[static_cast<std::size_t>(s.body)], state), s.radius, s.body};
  }
  const auto& p = g.points[static_cast<std::size_t>(ref.index)];
  const Body& body = bodies[static_cast<std::size_t>(p.body)];
  return {position(body, state) + orientation(body, state) * p.local_point, 0.0, p.body};
}

Vector3 point_velocity(const Body& body, const SystemState& state, const Vector3& point) {
  Vector3 v = state.v.segment<3>(body.v_offset);
  if (body.kind == BodyKind::kRigid) {
    v += state.v.segment<3>(body.v_offset + 3).cross(point - position(body, state));
  }
  return v;
}

void against_static(const ProxyRef& ref, const ProxyState& ps, const Geometry& g,
                    std::vector<RawContact>& out) {
  for (std::size_t k = 0; k < g.statics.size(); ++k) {
    RawContact c;
    c.first = ref;
    c.primitive = static_cast<Index>(k);
    if (const auto* plane = std::get_if<Plane>(&g.statics[k])) {
      c.normal = plane->normal;
      c.separation = plane->normal.dot(ps.center - plane->point) - ps.radius;
    } else {
      const auto& sphere = std::get<StaticSphere>(g.statics[k]);
      const Vector3 d = ps.center - sphere.center;
      const double dist = d.norm();
      if (dist < 1e-12) continue;
      c.normal = d / dist;
      c.separation = dist - ps.radius - sphere.radius;
    }
    if (c.separation >= g.margin) continue;
    c.depth = std::max(0.0, -c.separation);
    c.point = ps.center - ps.radius * c.normal;
    out.push_back(c);
  }
}

}  // namespace

std::vector<RawContact> detect_contacts(const SystemState& state, std::span<const Body> bodies,
                                        const Geometry& geometry) {
  std::vector<RawContact> out;
  std::vector<ProxyState> spheres;
  spheres.reserve(geometry.spheres.size());
  for (std::size_t i = 0; i < geometry.spheres.size(); ++i) {
    const ProxyRef ref{ProxyRef::Kind::kSphere, static_cast<Index>(i)};
    spheres.push_back(proxy_state(ref, state, bodies, geometry));
    against_static(ref, spheres.back(), geometry, out);
  }
  std::vector<ProxyState> points;
  points.reserve(geometry.points.size());
  for (std::size_t i = 0; i < geometry.points.size(); ++i) {
    const ProxyRef ref{ProxyRef::Kind::kPoint, static_cast<Index>(i)};
    points.push_back(proxy_state(ref, state, bodies, geometry));
    against_static(ref, points.back(), geometry, out);
  }

  auto pair = [&](ProxyRef first, const ProxyState& a, ProxyRef second, const ProxyState& b) {
    const Vector3 d = a.center - b.center;
    const double dist = d.norm();
    if (dist < 1e-12) return;
    const double sep = dist - a.radius - b.radius;
    if (sep >= geometry.margin) return;
    RawContact c;
    c.first = first;
    c.second = second;
    c.normal = d / dist;
    c.separation = sep;
    c.depth = std::max(0.0, -sep);
    c.point = a.center - a.radius * c.normal;
    out.push_back(c);
  };

  for (std::size_t i = 0; i < spheres.size(); ++i) {
    for (std::size_t j = i + 1; j < spheres.size(); ++j) {
      if (geometry.spheres[i].group == geometry.spheres[j].group) continue;
      pair({ProxyRef::Kind::kSphere, static_cast<Index>(i)}, spheres[i],
           {ProxyRef::Kind::kSphere, static_cast<Index>(j)}, spheres[j]);
    }
  }
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (std::size_t j = 0; j < spheres.size(); ++j) {
      if (points[i].body == spheres[j].body) continue;
      pair({ProxyRef::Kind::kPoint, static_cast<Index>(i)}, points[i],
           {ProxyRef::Kind::kSphere, static_cast<Index>(j)}, spheres[j]);
    }
  }
  return out;
}

Matrix3 contact_frame(const Vector3& normal) {
  const double len = normal.norm();
  if (!(len > 0.0) || !std::isfinite(len)) {
    throw Error(ErrorCode::kInvalidArgument, "contact_frame: zero normal");
  }
  const Vector3 n = normal / len;
  Index axis = 0;
  n.cwiseAbs().minCoeff(&axis);
  const Vector3 e = Vector3::Unit(axis);
  const Vector3 t2 = n.cross(e).normalized();
  const Vector3 t1 = t2.cross(n);
  Matrix3 r;
  r.row(0) = n.transpose();
  r.row(1) = t1.transpose();
  r.row(2) = t2.transpose();
  return r;
}

double stabilization_term(double depth, double vn_prev, const StabilizationParams& params) {
  double phi = -(params.beta_err / params.step_size) * depth;
  if (std::abs(vn_prev) > params.rest_threshold) {
    phi += params.restitution * std::min(0.0, vn_prev);
  }
  return phi;
}

NodalContactSet nodalize(std::span<const RawContact> raw, const SystemState& state,
                         std::span<const Body> bodies, const Geometry& geometry,
                         const ContactParams& params) {
  NodalContactSet set;
  set.n_original = velocity_dim(bodies);
  set.kv = params.kv;

  // Detection order (statics first, then proxy pairs by index) decides which
  // contact keeps the original node; it does not change from step to step.
  std::vector<std::size_t> order(raw.size());
  std::iota(order.begin(), order.end(), 0);

  std::vector<bool> node_used(bodies.size(), false);
  std::vector<Eigen::Triplet<double, int>> jv;

  auto node_for = [&](const ProxyRef& ref, const Vector3& point) -> Index {
    Index body_index = 0;
    if (ref.kind == ProxyRef::Kind::kSphere) {
      body_index = geometry.spheres[static_cast<std::size_t>(ref.index)].body;
      const auto b = static_cast<std::size_t>(body_index);
      if (!node_used[b]) {
        node_used[b] = true;
        return bodies[b].v_offset;
      }
    } else {
      body_index = geometry.points[static_cast<std::size_t>(ref.index)].body;
    }
    const Body& body = bodies[static_cast<std::size_t>(body_index)];
    const Index row = 3 * set.n_virtual;
    for (Index k = 0; k < 3; ++k) jv.emplace_back(static_cast<int>(row + k), static_cast<int>(body.v_offset + k), 1.0);
    if (body.kind == BodyKind::kRigid) {
      const Matrix3 s = -skew(point - position(body, state));
      for (Index r = 0; r < 3; ++r) {
        for (Index c = 0; c < 3; ++c) {
          if (s(r, c) != 0.0) jv.emplace_back(static_cast<int>(row + r), static_cast<int>(body.v_offset + 3 + c), s(r, c));
        }
      }
    }
    return set.n_original + 3 * set.n_virtual++;
  };

  const StabilizationParams stab{params.beta_err, params.restitution, state.step_size,
                                 params.rest_threshold};
  auto body_of = [&](const ProxyRef& ref) -> const Body& {
    const Index b = ref.kind == ProxyRef::Kind::kSphere
                        ? geometry.spheres[static_cast<std::size_t>(ref.index)].body
                        : geometry.points[static_cast<std::size_t>(ref.index)].body;
    return bodies[static_cast<std::size_t>(b)];
  };

  set.contacts.reserve(raw.size());
  for (std::size_t idx : order) {
    const RawContact& rc = raw[idx];
    Contact c;
    c.frame = contact_frame(rc.normal);
    c.depth = rc.depth;
    c.point = rc.point;
    c.mu = params.anisotropic ? params.mu1 : params.mu;
    c.mu2 = params.anisotropic ? params.mu2 : params.mu;
    c.anisotropic = params.anisotropic;
    c.node_i = node_for(rc.first, rc.point);
    Vector3 rel = point_velocity(body_of(rc.first), state, rc.point);
    c.key = {static_cast<long>(rc.first.kind), static_cast<long>(rc.first.index), -1, -1,
             static_cast<long>(rc.primitive)};
    if (rc.second) {
      c.kind = ContactKind::kDynamic;
      c.node_j = node_for(*rc.second, rc.point);
      rel -= point_velocity(body_of(*rc.second), state, rc.point);
      c.key[2] = static_cast<long>(rc.second->kind);
      c.key[3] = static_cast<long>(rc.second->index);
    }
    c.phi = stabilization_term(rc.depth, rc.normal.dot(rel), stab);
    set.contacts.push_back(c);
  }

  set.jv.resize(3 * set.n_virtual, set.n_original);
  set.jv.setFromTriplets(jv.begin(), jv.end());
  return set;
}

AugmentedDynamics augment_dynamics(const SparseSymmetric& a_o, const Vector& b_o,
                                   const Eigen::SparseMatrix<double, Eigen::RowMajor>& jv,
                                   double kv) {
  const Index n = a_o.dim();
  if (b_o.size() != n || (jv.rows() > 0 && jv.cols() != n)) {
    throw Error(ErrorCode::kInvalidArgument, "augment_dynamics: dimension mismatch");
  }
  const Index nv = jv.rows();
  if (nv == 0) return AugmentedDynamics{a_o, b_o, n};

  using Storage = SparseSymmetric::Storage;
  const Storage j = jv;  // column-major copy
  const Storage jtj = Storage(j.transpose()) * j;

  std::vector<Triplet> trip;
  trip.reserve(static_cast<std::size_t>(a_o.nonzeros() + jtj.nonZeros() + 2 * j.nonZeros() + nv));
  for (Index col = 0; col < n; ++col) {
    for (Storage::InnerIterator it(a_o.matrix(), col); it; ++it) trip.emplace_back(it.row(), col, it.value());
    for (Storage::InnerIterator it(jtj, col); it; ++it) trip.emplace_back(it.row(), col, kv * it.value());
    for (Storage::InnerIterator it(j, col); it; ++it) {
      trip.emplace_back(n + it.row(), col, -kv * it.value());
      trip.emplace_back(col, n + it.row(), -kv * it.value());
    }
  }
  for (Index k = 0; k < nv; ++k) trip.emplace_back(n + k, n + k, kv);

  Vector b = Vector::Zero(n + nv);
  b.head(n) = b_o;
  return AugmentedDynamics{SparseSymmetric::from_triplets(n + nv, trip), std::move(b), n};
}

Vector contact_velocity(std::span<const Contact> contacts, const Eigen::Ref<const Vector>& v) {
  Vector u(3 * static_cast<Index>(contacts.size()));
  for (std::size_t m = 0; m < contacts.size(); ++m) {
    const Contact& c = contacts[m];
    Vector3 rel = v.segment<3>(c.node_i);
    if (c.node_j >= 0) rel -= v.segment<3>(c.node_j);
    u.segment<3>(3 * static_cast<Index>(m)) = c.frame * rel;
  }
  return u;
}

void add_contact_impulse(std::span<const Contact> contacts, const Eigen::Ref<const Vector>& lambda,
                         const Eigen::Ref<const Vector>& scale, Eigen::Ref<Vector> out) {
  const bool scaled = scale.size() != 0;
  for (std::size_t m = 0; m < contacts.size(); ++m) {
    const Contact& c = contacts[m];
    const Vector3 f = c.frame.transpose() * lambda.segment<3>(3 * static_cast<Index>(m));
    if (scaled) {
      out.segment<3>(c.node_i) += scale.segment<3>(c.node_i).cwiseProduct(f);
      if (c.node_j >= 0) out.segment<3>(c.node_j) -= scale.segment<3>(c.node_j).cwiseProduct(f);
    } else {
      out.segment<3>(c.node_i) += f;
      if (c.node_j >= 0) out.segment<3>(c.node_j) -= f;
    }
  }
}

Eigen::SparseMatrix<double> assemble_contact_jacobian(std::span<const Contact> contacts, Index dim) {
  std::vector<Triplet> trip;
  for (std::size_t m = 0; m < contacts.size(); ++m) {
    const Contact& c = contacts[m];
    const Index row = 3 * static_cast<Index>(m);
    for (Index r = 0; r < 3; ++r) {
      for (Index k = 0; k < 3; ++k) {
        trip.emplace_back(row + r, c.node_i + k, c.frame(r, k));
        if (c.node_j >= 0) trip.emplace_back(row + r, c.node_j + k, -c.frame(r, k));
      }
    }
  }
  Eigen::SparseMatrix<double> j(3 * static_cast<Index>(contacts.size()), dim);
  j.setFromTriplets(trip.begin(), trip.end());
  return j;
}

Vector extend_with_virtual(const NodalContactSet& set, const Eigen::Ref<const Vector>& v_original) {
  Vector v(set.augmented_dim());
  v.head(set.n_original) = v_original;
  if (set.n_virtual > 0) v.tail(3 * set.n_virtual) = set.jv * v_original;
  return v;
}

double max_penetration(const SystemState& state, std::span<const Body> bodies,
                       const Geometry& geometry) {
  double depth = 0.0;
  for (const auto& c : detect_contacts(state, bodies, geometry)) depth = std::max(depth, c.depth);
  return depth;
}

}  // namespace cond
