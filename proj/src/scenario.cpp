#include "cond/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <random>
#include <set>
#include <sstream>

#include "cond/error.hpp"

namespace cond {

using nlohmann::json;

Vector3 ForceSchedule::at(double time) const {
  Vector3 f = Vector3::Zero();
  for (const auto& s : segments) {
    if (s.start <= time) f = s.force;
  }
  return f;
}

long Scenario::steps() const { return std::lround(duration / step_size); }

Vector Scenario::external_force(long step) const {
  Vector f = Vector::Zero(velocity_dim(bodies));
  const double time = static_cast<double>(step) * step_size;
  for (const auto& sched : forces) {
    const Vector3 value = sched.at(time);
    for (Index b : sched.bodies) f.segment<3>(bodies[static_cast<std::size_t>(b)].v_offset) += value;
  }
  return f;
}

namespace {

[[noreturn]] void invalid(const std::string& path, const std::string& why) {
  throw Error(ErrorCode::kValidation, "scenario " + path + ": " + why);
}

/// Object view that tracks its JSON path and rejects unknown keys.
class Obj {
 public:
  Obj(const json& j, std::string path, std::initializer_list<const char*> keys) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) invalid(path_.empty() ? "/" : path_, "expected an object");
    const std::set<std::string> allowed(keys.begin(), keys.end());
    for (const auto& [k, _] : j_.items()) {
      if (!allowed.count(k)) invalid(at(k), "unknown key");
    }
  }

  std::string at(const std::string& key) const { return path_ + "/" + key; }
  bool has(const char* key) const { return j_.contains(key); }
  const json& raw(const char* key) const {
    if (!has(key)) invalid(at(key), "required field missing");
    return j_.at(key);
  }

  double number(const char* key) const {
    const json& v = raw(key);
    if (!v.is_number()) invalid(at(key), "expected a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) invalid(at(key), "must be finite");
    return x;
  }
  double number(const char* key, double fallback) const { return has(key) ? number(key) : fallback; }

  double positive(const char* key) const {
    const double x = number(key);
    if (!(x > 0.0)) invalid(at(key), "must be > 0");
    return x;
  }
  double positive(const char* key, double fallback) const { return has(key) ? positive(key) : fallback; }
  double nonnegative(const char* key, double fallback) const {
    const double x = number(key, fallback);
    if (!(x >= 0.0)) invalid(at(key), "must be >= 0");
    return x;
  }

  long integer(const char* key, long fallback) const {
    if (!has(key)) return fallback;
    const json& v = j_.at(key);
    if (!v.is_number_integer()) invalid(at(key), "expected an integer");
    return v.get<long>();
  }

  bool boolean(const char* key, bool fallback) const {
    if (!has(key)) return fallback;
    const json& v = j_.at(key);
    if (!v.is_boolean()) invalid(at(key), "expected true or false");
    return v.get<bool>();
  }

  std::string string(const char* key, const std::string& fallback) const {
    if (!has(key)) return fallback;
    const json& v = j_.at(key);
    if (!v.is_string()) invalid(at(key), "expected a string");
    return v.get<std::string>();
  }

  template <int N>
  Eigen::Matrix<double, N, 1> vec(const char* key) const {
    const json& v = raw(key);
    if (!v.is_array() || v.size() != N) invalid(at(key), "expected an array of " + std::to_string(N) + " numbers");
    Eigen::Matrix<double, N, 1> out;
    for (int i = 0; i < N; ++i) {
      if (!v[static_cast<std::size_t>(i)].is_number()) invalid(at(key), "expected numbers");
      out[i] = v[static_cast<std::size_t>(i)].get<double>();
    }
    if (!out.allFinite()) invalid(at(key), "must be finite");
    return out;
  }
  template <int N>
  Eigen::Matrix<double, N, 1> vec(const char* key, const Eigen::Matrix<double, N, 1>& fallback) const {
    return has(key) ? vec<N>(key) : fallback;
  }

  template <typename F>
  void each(const char* key, F&& f) const {
    if (!has(key)) return;
    const json& v = j_.at(key);
    if (!v.is_array()) invalid(at(key), "expected an array");
    for (std::size_t i = 0; i < v.size(); ++i) f(v[i], at(key) + "/" + std::to_string(i));
  }

 private:
  const json& j_;
  std::string path_;
};

Index add_particle(Scenario& s, double mass, const Vector3& x, const Vector3& v, std::vector<double>& q,
                   std::vector<double>& vel) {
  Body b;
  b.kind = BodyKind::kParticle;
  b.mass = mass;
  s.bodies.push_back(b);
  q.insert(q.end(), x.data(), x.data() + 3);
  vel.insert(vel.end(), v.data(), v.data() + 3);
  return static_cast<Index>(s.bodies.size()) - 1;
}

std::vector<Index> edge_bodies(const LatticeInfo& l, const std::string& edge, const std::string& path) {
  std::vector<Index> out;
  for (Index r = 0; r < l.rows; ++r) {
    for (Index c = 0; c < l.cols; ++c) {
      const bool hit = (edge == "x_min" && c == 0) || (edge == "x_max" && c == l.cols - 1) ||
                       (edge == "y_min" && r == 0) || (edge == "y_max" && r == l.rows - 1) || edge == "all";
      if (hit) out.push_back(l.first_body + r * l.cols + c);
    }
  }
  if (out.empty()) invalid(path, "edge must be one of x_min, x_max, y_min, y_max, all");
  return out;
}

}  // namespace

Scenario scenario_from_json(const json& doc) {
  const Obj root(doc, "",
                 {"name", "step_size", "duration", "gravity", "seed", "contact", "damping", "static", "particles",
                  "lattices", "rigid_bodies", "springs", "ties", "forces", "randomize"});
  Scenario s;
  s.source = doc;
  s.name = root.string("name", "scenario");
  s.step_size = root.positive("step_size");
  s.duration = root.positive("duration");
  const double ratio = s.duration / s.step_size;
  if (std::abs(ratio - std::round(ratio)) > 1e-6 * std::max(1.0, ratio)) {
    invalid("/duration", "must be an integer multiple of step_size");
  }
  s.gravity = root.vec<3>("gravity", Vector3(0.0, 0.0, -9.81));
  const long seed = root.integer("seed", 0);
  if (seed < 0) invalid("/seed", "must be >= 0");
  s.seed = static_cast<std::uint64_t>(seed);

  if (root.has("contact")) {
    const Obj c(root.raw("contact"), "/contact",
                {"mu", "mu_aniso", "beta_err", "restitution", "rest_threshold", "kv", "margin"});
    s.contact.mu = c.nonnegative("mu", 0.2);
    s.contact.mu1 = s.contact.mu2 = s.contact.mu;
    if (c.has("mu_aniso")) {
      const Eigen::Vector2d m = c.vec<2>("mu_aniso");
      if (!(m.minCoeff() > 0.0)) invalid("/contact/mu_aniso", "coefficients must be > 0");
      s.contact.anisotropic = true;
      s.contact.mu1 = m[0];
      s.contact.mu2 = m[1];
    }
    s.contact.beta_err = c.nonnegative("beta_err", 0.2);
    s.contact.restitution = c.nonnegative("restitution", 0.0);
    s.contact.rest_threshold = c.nonnegative("rest_threshold", 0.01);
    s.contact.kv = c.positive("kv", 1e5);
    s.geometry.margin = c.nonnegative("margin", 1e-4);
  }

  if (root.has("damping")) {
    const Obj d(root.raw("damping"), "/damping", {"variant", "value", "floor"});
    const std::string variant = d.string("variant", "constant");
    if (variant == "constant") {
      s.damping.variant = DampingPolicy::Variant::kConstant;
    } else if (variant == "geometric") {
      s.damping.variant = DampingPolicy::Variant::kGeometric;
    } else {
      invalid("/damping/variant", "must be constant or geometric");
    }
    s.damping.constant_value = d.nonnegative("value", 0.0);
    s.damping.floor = d.positive("floor", 1e-6);
  }

  root.each("static", [&](const json& j, const std::string& path) {
    const Obj o(j, path, {"type", "point", "normal", "center", "radius"});
    const std::string type = o.string("type", "");
    if (type == "plane") {
      Plane p;
      p.point = o.vec<3>("point", Vector3::Zero());
      p.normal = o.vec<3>("normal", Vector3::UnitZ());
      if (std::abs(p.normal.norm() - 1.0) > 1e-9) invalid(o.at("normal"), "must be unit length");
      s.geometry.statics.emplace_back(p);
    } else if (type == "sphere") {
      StaticSphere sp;
      sp.center = o.vec<3>("center");
      sp.radius = o.positive("radius");
      s.geometry.statics.emplace_back(sp);
    } else {
      invalid(o.at("type"), "must be plane or sphere");
    }
  });

  std::vector<double> q;
  std::vector<double> v;

  root.each("particles", [&](const json& j, const std::string& path) {
    const Obj o(j, path, {"position", "velocity", "mass", "radius", "group"});
    const Index b = add_particle(s, o.positive("mass"), o.vec<3>("position"), o.vec<3>("velocity", Vector3::Zero()), q, v);
    const double r = o.nonnegative("radius", 0.0);
    s.geometry.spheres.push_back({b, r, static_cast<int>(o.integer("group", -1 - b))});
  });

  int lattice_index = 0;
  root.each("lattices", [&](const json& j, const std::string& path) {
    const Obj o(j, path, {"rows", "cols", "spacing", "origin", "node_mass", "stiffness", "shear", "radius", "group",
                          "velocity"});
    LatticeInfo info;
    info.rows = o.integer("rows", 0);
    info.cols = o.integer("cols", 0);
    if (info.rows < 1 || info.cols < 1) invalid(path, "rows and cols must be >= 1");
    info.first_body = static_cast<Index>(s.bodies.size());
    const double h = o.positive("spacing");
    const Vector3 origin = o.vec<3>("origin", Vector3::Zero());
    const double mass = o.positive("node_mass");
    const double k = o.positive("stiffness");
    const bool shear = o.boolean("shear", true);
    const double r = o.nonnegative("radius", 0.0);
    const int group = static_cast<int>(o.integer("group", 1000 + lattice_index));
    const Vector3 vel = o.vec<3>("velocity", Vector3::Zero());
    for (Index row = 0; row < info.rows; ++row) {
      for (Index col = 0; col < info.cols; ++col) {
        const Vector3 x = origin + Vector3(static_cast<double>(col) * h, static_cast<double>(row) * h, 0.0);
        const Index b = add_particle(s, mass, x, vel, q, v);
        s.geometry.spheres.push_back({b, r, group});
      }
    }
    auto node = [&](Index row, Index col) { return info.first_body + row * info.cols + col; };
    auto spring = [&](Index a, Index b, double len) {
      ConstraintPotential c;
      c.kind = ConstraintKind::kDistanceSpring;
      c.body_a = a;
      c.body_b = b;
      c.stiffness = k;
      c.rest_length = len;
      s.constraints.push_back(c);
    };
    for (Index row = 0; row < info.rows; ++row) {
      for (Index col = 0; col < info.cols; ++col) {
        if (col + 1 < info.cols) spring(node(row, col), node(row, col + 1), h);
        if (row + 1 < info.rows) spring(node(row, col), node(row + 1, col), h);
        if (shear && row + 1 < info.rows && col + 1 < info.cols) {
          spring(node(row, col), node(row + 1, col + 1), h * std::sqrt(2.0));
          spring(node(row, col + 1), node(row + 1, col), h * std::sqrt(2.0));
        }
      }
    }
    s.lattices.push_back(info);
    ++lattice_index;
  });

  root.each("rigid_bodies", [&](const json& j, const std::string& path) {
    const Obj o(j, path, {"shape", "size", "mass", "position", "orientation", "velocity", "angular_velocity",
                          "contact_points"});
    if (o.string("shape", "box") != "box") invalid(o.at("shape"), "only box is supported");
    const Vector3 size = o.vec<3>("size");
    if (!(size.minCoeff() > 0.0)) invalid(o.at("size"), "extents must be > 0");
    Body b;
    b.kind = BodyKind::kRigid;
    b.mass = o.positive("mass");
    b.inertia = (b.mass / 12.0) * Vector3(size.y() * size.y() + size.z() * size.z(),
                                          size.x() * size.x() + size.z() * size.z(),
                                          size.x() * size.x() + size.y() * size.y())
                                      .asDiagonal();
    s.bodies.push_back(b);
    const Index id = static_cast<Index>(s.bodies.size()) - 1;
    const Vector3 x = o.vec<3>("position");
    Eigen::Vector4d quat = o.vec<4>("orientation", Eigen::Vector4d(1.0, 0.0, 0.0, 0.0));
    if (!(quat.norm() > 0.0)) invalid(o.at("orientation"), "quaternion must be non-zero");
    quat.normalize();
    q.insert(q.end(), x.data(), x.data() + 3);
    q.insert(q.end(), quat.data(), quat.data() + 4);
    const Vector3 lin = o.vec<3>("velocity", Vector3::Zero());
    const Vector3 ang = o.vec<3>("angular_velocity", Vector3::Zero());
    v.insert(v.end(), lin.data(), lin.data() + 3);
    v.insert(v.end(), ang.data(), ang.data() + 3);

    const std::string points = o.string("contact_points", "bottom");
    if (points != "bottom" && points != "corners") invalid(o.at("contact_points"), "must be bottom or corners");
    const Vector3 half = 0.5 * size;
    for (int zs : {-1, 1}) {
      if (zs == 1 && points == "bottom") continue;
      for (int ys : {-1, 1}) {
        for (int xs : {-1, 1}) {
          s.geometry.points.push_back({id, Vector3(xs * half.x(), ys * half.y(), zs * half.z())});
        }
      }
    }
  });

  const auto nbodies = static_cast<long>(s.bodies.size());
  auto body_ref = [&](const json& j, const std::string& path) -> Index {
    if (!j.is_number_integer()) invalid(path, "expected a body index");
    const long b = j.get<long>();
    if (b < 0 || b >= nbodies) invalid(path, "body index out of range");
    if (s.bodies[static_cast<std::size_t>(b)].kind != BodyKind::kParticle) invalid(path, "must reference a particle");
    return b;
  };

  assign_offsets(s.bodies);
  s.initial.q = Eigen::Map<const Vector>(q.data(), static_cast<Index>(q.size()));
  s.initial.v = Eigen::Map<const Vector>(v.data(), static_cast<Index>(v.size()));
  s.initial.step_size = s.step_size;

  root.each("springs", [&](const json& j, const std::string& path) {
    const Obj o(j, path, {"a", "b", "stiffness", "rest_length"});
    ConstraintPotential c;
    c.kind = ConstraintKind::kDistanceSpring;
    c.body_a = body_ref(o.raw("a"), o.at("a"));
    c.body_b = body_ref(o.raw("b"), o.at("b"));
    if (c.body_a == c.body_b) invalid(path, "spring endpoints must differ");
    c.stiffness = o.positive("stiffness");
    const Vector3 d = position(s.bodies[static_cast<std::size_t>(c.body_b)], s.initial) -
                      position(s.bodies[static_cast<std::size_t>(c.body_a)], s.initial);
    c.rest_length = o.nonnegative("rest_length", d.norm());
    s.constraints.push_back(c);
  });

  root.each("ties", [&](const json& j, const std::string& path) {
    const Obj o(j, path, {"a", "b", "anchor", "stiffness"});
    ConstraintPotential c;
    c.kind = ConstraintKind::kTie;
    c.body_a = body_ref(o.raw("a"), o.at("a"));
    c.stiffness = o.positive("stiffness");
    if (o.has("b")) {
      c.body_b = body_ref(o.raw("b"), o.at("b"));
    } else {
      c.body_b = -1;
      c.anchor = o.vec<3>("anchor", position(s.bodies[static_cast<std::size_t>(c.body_a)], s.initial));
    }
    s.constraints.push_back(c);
  });

  root.each("forces", [&](const json& j, const std::string& path) {
    const Obj o(j, path, {"bodies", "lattice", "edge", "schedule"});
    ForceSchedule f;
    if (o.has("bodies")) {
      o.each("bodies", [&](const json& b, const std::string& p) {
        if (!b.is_number_integer() || b.get<long>() < 0 || b.get<long>() >= nbodies) invalid(p, "body index out of range");
        f.bodies.push_back(b.get<long>());
      });
    } else {
      const long l = o.integer("lattice", -1);
      if (l < 0 || l >= static_cast<long>(s.lattices.size())) invalid(o.at("lattice"), "lattice index out of range");
      f.bodies = edge_bodies(s.lattices[static_cast<std::size_t>(l)], o.string("edge", "all"), o.at("edge"));
    }
    double last = -1.0;
    o.each("schedule", [&](const json& seg, const std::string& p) {
      const Obj so(seg, p, {"start", "force"});
      ForceSchedule::Segment segment{so.nonnegative("start", 0.0), so.vec<3>("force")};
      if (segment.start < last) invalid(so.at("start"), "segments must be in ascending start order");
      last = segment.start;
      f.segments.push_back(segment);
    });
    if (f.segments.empty()) invalid(o.at("schedule"), "required non-empty schedule");
    s.forces.push_back(std::move(f));
  });

  if (root.has("randomize")) {
    const Obj r(root.raw("randomize"), "/randomize", {"position_jitter", "velocity_jitter"});
    const double pj = r.nonnegative("position_jitter", 0.0);
    const double vj = r.nonnegative("velocity_jitter", 0.0);
    std::mt19937_64 rng(s.seed);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    for (const Body& b : s.bodies) {
      for (Index k = 0; k < 3; ++k) {
        s.initial.q[b.q_offset + k] += pj * unit(rng);
        s.initial.v[b.v_offset + k] += vj * unit(rng);
      }
    }
  }

  if (s.bodies.empty()) invalid("/", "scenario has no bodies");
  return s;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open scenario file " + path);
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    const auto offset = std::min<std::size_t>(e.byte, text.size());
    const auto line = 1 + std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(offset), '\n');
    throw Error(ErrorCode::kValidation, path + ":" + std::to_string(line) + ": " + e.what());
  }
  return scenario_from_json(doc);
}

Scenario resize_lattice(const Scenario& s, Index side) {
  if (s.lattices.empty()) throw Error(ErrorCode::kInvalidArgument, "resize_lattice: scenario has no lattice");
  json doc = s.source;
  doc["lattices"][0]["rows"] = side;
  doc["lattices"][0]["cols"] = side;
  return scenario_from_json(doc);
}

}  // namespace cond
