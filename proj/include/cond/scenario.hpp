#pragma once

#include <json.hpp>

#include <cstdint>
#include <string>
#include <vector>

#include "cond/contact.hpp"
#include "cond/dynamics.hpp"

namespace cond {

/// Piecewise-constant force applied to every listed body (N each).
struct ForceSchedule {
  struct Segment {
    double start = 0.0;
    Vector3 force = Vector3::Zero();
  };
  std::vector<Index> bodies;
  std::vector<Segment> segments;  // ascending start times

  Vector3 at(double time) const;
};

struct LatticeInfo {
  Index first_body = 0;
  Index rows = 0;
  Index cols = 0;
};

struct Scenario {
  std::string name;
  double step_size = 0.01;
  double duration = 1.0;
  Vector3 gravity = Vector3(0.0, 0.0, -9.81);
  std::uint64_t seed = 0;
  ContactParams contact;
  DampingPolicy damping;
  std::vector<Body> bodies;
  std::vector<ConstraintPotential> constraints;
  Geometry geometry;
  std::vector<ForceSchedule> forces;
  std::vector<LatticeInfo> lattices;
  SystemState initial;
  nlohmann::json source;  // validated document, kept for resizing

  long steps() const;
  /// Generalized external force at step k (gravity excluded).
  Vector external_force(long step) const;
};

/// Builds a scenario from a parsed document. Unknown keys and missing
/// required fields raise kValidation naming the JSON path.
Scenario scenario_from_json(const nlohmann::json& doc);

/// Parses a file; syntax errors report the line, kIo when unreadable.
Scenario load_scenario(const std::string& path);

/// Same scenario with the first lattice resized to side × side nodes.
Scenario resize_lattice(const Scenario& s, Index side);

}  // namespace cond
