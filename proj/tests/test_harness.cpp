#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "cond/error.hpp"
#include "cond/simulation.hpp"

using namespace cond;
namespace fs = std::filesystem;

namespace {

std::string fixture(const std::string& name) { return std::string(COND_SCENARIO_DIR) + "/" + name + ".json"; }

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::kInvalidArgument;
}

std::string message_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.what();
  }
  return {};
}

nlohmann::json minimal() {
  return nlohmann::json::parse(R"({
    "step_size": 0.01, "duration": 0.1,
    "static": [{"type": "plane", "point": [0, 0, 0], "normal": [0, 0, 1]}],
    "particles": [{"position": [0, 0, 1], "mass": 1.0}]
  })");
}

struct TempFile {
  fs::path path;
  explicit TempFile(const std::string& text) {
    path = fs::temp_directory_path() / ("cond_test_" + std::to_string(std::rand()) + ".tmp");
    std::ofstream(path) << text;
  }
  ~TempFile() { fs::remove(path); }
};

}  // namespace

TEST_CASE("minimal scenario") {
  const Scenario s = scenario_from_json(minimal());
  CHECK(s.bodies.size() == 1);
  CHECK(s.steps() == 10);
  CHECK(s.geometry.statics.size() == 1);
  CHECK(s.initial.q == Vector3(0, 0, 1));
  CHECK(s.contact.kv == 1e5);

  TempFile f(minimal().dump());
  CHECK(load_scenario(f.path.string()).bodies.size() == 1);
}

TEST_CASE("scenario validation") {
  nlohmann::json doc = minimal();
  doc.erase("step_size");
  CHECK(code_of([&] { scenario_from_json(doc); }) == ErrorCode::kValidation);
  CHECK(message_of([&] { scenario_from_json(doc); }).find("step_size") != std::string::npos);

  doc = minimal();
  doc["particles"][0]["colour"] = "red";
  CHECK(message_of([&] { scenario_from_json(doc); }).find("colour") != std::string::npos);

  doc = minimal();
  doc["particles"][0]["mass"] = -1.0;
  CHECK(code_of([&] { scenario_from_json(doc); }) == ErrorCode::kValidation);

  doc = minimal();
  doc["duration"] = 0.015;
  CHECK(code_of([&] { scenario_from_json(doc); }) == ErrorCode::kValidation);

  doc = minimal();
  doc["static"][0]["type"] = "torus";
  CHECK(code_of([&] { scenario_from_json(doc); }) == ErrorCode::kValidation);

  TempFile broken("{\n  \"step_size\": 0.01,\n  oops\n}");
  CHECK(code_of([&] { load_scenario(broken.path.string()); }) == ErrorCode::kValidation);
  CHECK(message_of([&] { load_scenario(broken.path.string()); }).find(":3:") != std::string::npos);

  CHECK(code_of([] { load_scenario("/nonexistent/scenario.json"); }) == ErrorCode::kIo);
}

TEST_CASE("box-slide fixture") {
  const Scenario s = load_scenario(fixture("box_slide"));
  REQUIRE(s.bodies.size() == 1);
  CHECK(s.bodies[0].kind == BodyKind::kRigid);
  CHECK(s.bodies[0].mass == 0.5);
  CHECK(s.contact.mu == 0.2);
  CHECK(s.geometry.points.size() == 4);
  for (const auto& p : s.geometry.points) {
    CHECK(std::abs(p.local_point.x()) == doctest::Approx(0.1));
    CHECK(std::abs(p.local_point.y()) == doctest::Approx(0.1));
    CHECK(p.local_point.z() == doctest::Approx(-0.1));
  }
  // uniform cube inertia m s² / 6
  CHECK((s.bodies[0].inertia - Matrix3::Identity() * 0.5 * 0.04 / 6.0).norm() < 1e-15);
  CHECK(s.external_force(0).head<3>() == Vector3(0, 2, 0));
}

TEST_CASE("force schedule") {
  ForceSchedule f;
  f.segments = {{0.0, Vector3(1, 0, 0)}, {0.5, Vector3(0, 2, 0)}};
  CHECK(f.at(0.0) == Vector3(1, 0, 0));
  CHECK(f.at(0.49) == Vector3(1, 0, 0));
  CHECK(f.at(0.5) == Vector3(0, 2, 0));
  CHECK(f.at(3.0) == Vector3(0, 2, 0));
  ForceSchedule late;
  late.segments = {{1.0, Vector3(1, 1, 1)}};
  CHECK(late.at(0.5) == Vector3::Zero());
}

TEST_CASE("randomized scenarios are seeded") {
  nlohmann::json doc = minimal();
  doc["randomize"] = {{"position_jitter", 0.01}, {"velocity_jitter", 0.1}};
  doc["seed"] = 7;
  const Scenario a = scenario_from_json(doc);
  const Scenario b = scenario_from_json(doc);
  CHECK(a.initial.q == b.initial.q);
  CHECK(a.initial.v == b.initial.v);
  doc["seed"] = 8;
  CHECK(scenario_from_json(doc).initial.q != a.initial.q);
}

TEST_CASE("lattice resizing") {
  const Scenario s = load_scenario(fixture("lattice_drag"));
  const Scenario r = resize_lattice(s, 5);
  REQUIRE(r.lattices.size() == 1);
  CHECK(r.lattices[0].rows == 5);
  CHECK(r.lattices[0].cols == 5);
  CHECK(velocity_dim(r.bodies) == 75);
  CHECK(code_of([] { resize_lattice(scenario_from_json(minimal()), 4); }) == ErrorCode::kInvalidArgument);
}

TEST_CASE("free fall") {
  const Scenario s = load_scenario(fixture("free_fall"));
  const RunResult r = run(s, RunConfig{});
  REQUIRE(r.rows.size() == 100);
  CHECK(r.final_state.v[2] == doctest::Approx(-9.81).epsilon(1e-10));
  CHECK(std::abs(r.final_state.v[2] + 9.81) < 1e-9);
  for (const auto& row : r.rows) CHECK(row.contacts == 0);
  CHECK(r.diverged_steps == 0);
}

TEST_CASE("resting particle") {
  const Scenario s = load_scenario(fixture("resting_particle"));
  for (SolverKind solver : {SolverKind::kCond, SolverKind::kPgs, SolverKind::kApgd}) {
    RunConfig cfg;
    cfg.solver = solver;
    const RunResult r = run(s, cfg);
    CHECK(r.max_penetration <= 1e-6);
    CHECK(r.final_state.v.norm() < 1e-6);
    CHECK(r.rows.back().contacts == 1);
  }
}

TEST_CASE("particle stack settles") {
  const Scenario s = load_scenario(fixture("particle_stack"));
  RunConfig cfg;
  std::vector<double> speed;
  Vector q50;
  const RunResult r = run(s, cfg, [&](const StepTrace& t) {
    speed.push_back(t.v_hat.head(15).norm());
    if (t.step == 50) q50 = t.state.q;
  });
  REQUIRE(speed.size() == 100);
  for (std::size_t k = 50; k < speed.size(); ++k) CHECK(speed[k] < 1e-6);
  CHECK((r.final_state.q - q50).norm() < 1e-6);
  CHECK(r.max_penetration < 5e-5);
}

TEST_CASE("analytic box slide") {
  BoxSlideParams p;
  p.force = 0.5 * p.mu * p.mass * p.gravity;
  for (double y : analytic_box_slide(p)) CHECK(y == 0.0);

  p.mu = 0.0;
  p.force = 2.0;
  const auto y = analytic_box_slide(p);
  CHECK(y.size() == 301);
  // midpoint rule integrates constant acceleration exactly
  CHECK(y.back() == doctest::Approx(0.5 * (2.0 / 0.5) * 9.0).epsilon(1e-12));

  BoxSlideParams q;
  const auto yq = analytic_box_slide(q);
  const double a = (2.0 - 0.2 * 0.5 * 9.81) / 0.5;
  CHECK(yq[100] == doctest::Approx(0.5 * a).epsilon(1e-12));

  BoxSlideParams bad;
  bad.force = 10.0;
  CHECK(code_of([&] { analytic_box_slide(bad); }) == ErrorCode::kInvalidArgument);
  bad = BoxSlideParams{};
  bad.mass = 0.0;
  CHECK_THROWS_AS(analytic_box_slide(bad), Error);
}

TEST_CASE("box slide follows the analytic trajectory") {
  const Scenario s = load_scenario(fixture("box_slide"));
  RunConfig cfg;
  cfg.record_trajectory = true;
  cfg.cond.residual_tol = 1e-12;
  cfg.cond.max_iterations = 100000;
  cfg.steps = 100;
  const RunResult r = run(s, cfg);
  BoxSlideParams p;
  p.duration = 1.0;
  const auto y = analytic_box_slide(p);
  double worst = 0.0;
  for (std::size_t k = 0; k < r.trajectory.size(); ++k) worst = std::max(worst, std::abs(r.trajectory[k][1] - y[k + 1]));
  CHECK(worst < 1e-5);
  CHECK(r.max_penetration < 1e-5);
}

TEST_CASE("CSV output") {
  CHECK(format_csv({}) == "step,dyn_ms,solve_ms,iters,residual,max_pen_m,contacts,ke_J\n");
  MetricsRow a;
  a.step = 0;
  a.dyn_ms = 0.1;
  a.solve_ms = 1.0 / 3.0;
  a.iters = 7;
  a.residual = 9.87654321e-5;
  a.max_pen_m = 1e-300;
  a.contacts = 4;
  a.ke_J = 9.345;
  MetricsRow b = a;
  b.step = 1;
  b.residual = 0.0;
  const std::string text = format_csv({a, b});
  CHECK(std::count(text.begin(), text.end(), '\n') == 3);

  const auto rows = parse_csv(text);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].solve_ms == a.solve_ms);
  CHECK(rows[0].residual == a.residual);
  CHECK(rows[0].max_pen_m == a.max_pen_m);
  CHECK(rows[1].step == 1);
  CHECK(format_csv(rows) == text);

  const fs::path path = fs::temp_directory_path() / "cond_test_rows.csv";
  report_csv({a, b}, path.string());
  std::ifstream in(path);
  const std::string back((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  CHECK(back == text);
  fs::remove(path);

  report_csv({}, path.string());
  CHECK(fs::file_size(path) == format_csv({}).size());
  fs::remove(path);

  CHECK(code_of([&] { report_csv({a}, "/nonexistent/dir/out.csv"); }) == ErrorCode::kIo);
  CHECK(code_of([] { parse_csv("nope\n"); }) == ErrorCode::kValidation);
}

TEST_CASE("identical runs are bit-identical") {
  const Scenario s = load_scenario(fixture("box_on_mat"));
  RunConfig cfg;
  cfg.steps = 20;
  auto strip_timing = [](std::vector<MetricsRow> rows) {
    for (auto& r : rows) r.dyn_ms = r.solve_ms = 0.0;
    return format_csv(rows);
  };
  const RunResult a = run(s, cfg);
  const RunResult b = run(s, cfg);
  CHECK(strip_timing(a.rows) == strip_timing(b.rows));
  CHECK(a.final_state.q == b.final_state.q);
}

TEST_CASE("scaling fit") {
  ScalingFit single;
  single.dofs = {300};
  single.mean_solve_ms = {1.0};
  fit_scaling(single);
  CHECK(!single.exponent.has_value());
  CHECK(!single.r_squared.has_value());

  ScalingFit exact;
  exact.dofs = {100, 200, 400, 800};
  for (Index n : exact.dofs) exact.mean_solve_ms.push_back(0.01 * std::pow(static_cast<double>(n), 1.5));
  fit_scaling(exact);
  CHECK(*exact.exponent == doctest::Approx(1.5).epsilon(1e-12));
  CHECK(*exact.r_squared == doctest::Approx(1.0));

  const Scenario s = load_scenario(fixture("lattice_drag"));
  RunConfig cfg;
  cfg.steps = 2;
  const ScalingFit fit = bench_scaling(s, {75, 300}, cfg);
  CHECK(fit.dofs == std::vector<Index>{75, 300});
  CHECK(fit.exponent.has_value());
  CHECK(code_of([&] { bench_scaling(s, {300, 75}, cfg); }) == ErrorCode::kInvalidArgument);
}
