#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "biconvex_mpc/gait.hpp"
#include "biconvex_mpc/problem_builder.hpp"
#include "biconvex_mpc/scenario.hpp"
#include "support/oracles.hpp"

using namespace biconvex_mpc;

namespace {

constexpr std::size_t FL = 0, FR = 1, HL = 2, HR = 3;

ContactPlan plan_at(const GaitParams& g, double t) {
  return make_cyclic_plan(g, default_quadruped_hips(), t, Vec3(0, 0, 0.25), Vec3::Zero(), Vec3::Zero());
}

bool same_activity(const ContactPlan& a, std::size_t a0, const ContactPlan& b, std::size_t b0, std::size_t count) {
  for (std::size_t t = 0; t < count; ++t)
    for (std::size_t j = 0; j < a.numEffectors(); ++j)
      if (a.active(a0 + t, j) != b.active(b0 + t, j)) return false;
  return true;
}

// Rotation vector of q_des^-1 q0 from Eigen's axis-angle conversion, folded to the short arc.
Vec3 axis_angle_log(const Quaternion& q0, const Quaternion& q_des) {
  Eigen::AngleAxisd aa(q_des.conjugate() * q0);
  double angle = aa.angle();
  Vec3 axis = aa.axis();
  if (angle > std::numbers::pi) {
    angle = 2.0 * std::numbers::pi - angle;
    axis = -axis;
  }
  return angle * axis;
}

Quaternion random_quaternion(oracle::Rng& rng) {
  Quaternion q(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
  return q.normalized();
}

}  // namespace

TEST_CASE("gait table parameters") {
  const auto trot = GaitParams::trot();
  CHECK(trot.stance_duration == 0.15);
  CHECK(trot.gait_duration == 0.3);
  CHECK(trot.dt == 0.03);
  CHECK(trot.n_knots == 10);
  const auto jump = GaitParams::jump();
  CHECK(jump.stance_duration == 0.2);
  CHECK(jump.gait_duration == 0.5);
  CHECK(jump.dt == 0.05);
  CHECK(jump.n_knots == 10);
  const auto bound = GaitParams::bound();
  CHECK(bound.stance_duration == 0.15);
  CHECK(bound.gait_duration == 0.3);
  CHECK(bound.dt == 0.05);
  CHECK(bound.n_knots == 12);
  CHECK(GaitParams::byName("bound").n_knots == 12);
  CHECK_THROWS(GaitParams::byName("gallop"));
}

TEST_CASE("trot: diagonal pairs alternate every five knots") {
  const ContactPlan p = plan_at(GaitParams::trot(), 0.0);
  for (std::size_t t = 0; t < 10; ++t) {
    const bool first_half = t < 5;
    CHECK(p.active(t, FL) == first_half);
    CHECK(p.active(t, HR) == first_half);
    CHECK(p.active(t, FR) == !first_half);
    CHECK(p.active(t, HL) == !first_half);
  }
}

TEST_CASE("jump: all legs together, stance for phase < 0.4") {
  const ContactPlan p = plan_at(GaitParams::jump(), 0.0);
  for (std::size_t t = 0; t < 10; ++t) {
    const double phase = std::fmod(static_cast<double>(t) * 0.05 / 0.5, 1.0);
    for (std::size_t j = 0; j < 4; ++j) CHECK(p.active(t, j) == (phase < 0.4 - 1e-12));
  }
}

TEST_CASE("stance equal to the cycle means always active") {
  GaitParams g = GaitParams::trot();
  g.stance_duration = g.gait_duration;
  const ContactPlan p = plan_at(g, 0.123);
  for (std::size_t t = 0; t < g.n_knots; ++t) CHECK(p.numActive(t) == 4);
}

TEST_CASE("property: periodicity and moving-horizon shift") {
  oracle::Rng rng(41);
  for (const auto& g : {GaitParams::trot(), GaitParams::jump(), GaitParams::bound()}) {
    for (int trial = 0; trial < 30; ++trial) {
      // Whole knots keep the phase arithmetic on the same grid.
      const double t0 = g.dt * rng.integer(0, 200);
      const ContactPlan a = plan_at(g, t0);
      CHECK(same_activity(a, 0, plan_at(g, t0 + g.gait_duration), 0, g.n_knots));
      CHECK(same_activity(a, 1, plan_at(g, t0 + g.dt), 0, g.n_knots - 1));
    }
  }
}

TEST_CASE("stance feet are held through the stance and sit on the ground") {
  const ContactPlan p = make_cyclic_plan(GaitParams::trot(), default_quadruped_hips(), 0.0, Vec3(0, 0, 0.25),
                                         Vec3(0.4, 0, 0), Vec3(0.5, 0, 0));
  for (std::size_t j = 0; j < 4; ++j)
    for (std::size_t t = 1; t < 10; ++t) {
      if (p.active(t, j) && p.active(t - 1, j)) CHECK(p.position(t, j) == p.position(t - 1, j));
      if (p.active(t, j)) CHECK(p.position(t, j).z() == 0.0);
    }
}

TEST_CASE("current feet are kept for legs already in stance") {
  std::vector<std::optional<Vec3>> feet(4);
  feet[FL] = Vec3(0.3, 0.2, 0.0);
  const ContactPlan p = make_cyclic_plan(GaitParams::trot(), default_quadruped_hips(), 0.0, Vec3(0, 0, 0.25),
                                         Vec3::Zero(), Vec3::Zero(), FootstepConfig{}, feet);
  CHECK(p.position(0, FL) == Vec3(0.3, 0.2, 0.0));
  CHECK(p.position(4, FL) == Vec3(0.3, 0.2, 0.0));
}

TEST_CASE("raibert footstep") {
  const Vec3 hip(0.2, 0.15, 0.1);
  CHECK(raibert_footstep(hip, Vec3::Zero(), Vec3::Zero(), 0.15, 0.03) == Vec3(0.2, 0.15, 0.0));
  const Vec3 ff = raibert_footstep(hip, Vec3(0.5, 0, 0), Vec3(0.5, 0, 0), 0.15, 0.03);
  CHECK((ff - Vec3(0.2375, 0.15, 0.0)).norm() < 1e-15);
  const Vec3 fb = raibert_footstep(hip, Vec3(0.6, 0, 0), Vec3(0.5, 0, 0), 0.15, 0.1);
  CHECK((fb - Vec3(0.2 + 0.045 + 0.01, 0.15, 0.0)).norm() < 1e-15);
  const Vec3 terrain = raibert_footstep(hip, Vec3::Zero(), Vec3::Zero(), 0.15, 0.03,
                                        [](double x, double) { return 0.5 * x; });
  CHECK(terrain.z() == doctest::Approx(0.1));
}

TEST_CASE("property: raibert footstep is affine in the velocities") {
  oracle::Rng rng(42);
  for (int i = 0; i < 100; ++i) {
    const Vec3 hip = rng.vec3(-0.3, 0.3);
    const Vec3 va = rng.vec3(-1, 1), vb = rng.vec3(-1, 1), da = rng.vec3(-1, 1), db = rng.vec3(-1, 1);
    const double s = rng.uniform(-2, 2);
    auto r = [&](const Vec3& v, const Vec3& d) { return raibert_footstep(hip, v, d, 0.15, 0.03); };
    const Vec3 lhs = r(va + s * vb, da + s * db) - r(Vec3::Zero(), Vec3::Zero());
    const Vec3 rhs = (r(va, da) - r(Vec3::Zero(), Vec3::Zero())) + s * (r(vb, db) - r(Vec3::Zero(), Vec3::Zero()));
    CHECK((lhs - rhs).norm() < 1e-12);
  }
}

TEST_CASE("k_nom against the axis-angle oracle") {
  const Vec3 w(1, 1, 1);
  CHECK(k_nom(Quaternion::Identity(), Quaternion::Identity(), w) == Vec3::Zero());
  const Quaternion yaw(Eigen::AngleAxisd(std::numbers::pi / 2, Vec3::UnitZ()));
  CHECK((k_nom(yaw, Quaternion::Identity(), w) - Vec3(0, 0, std::numbers::pi / 2)).norm() < 1e-12);

  oracle::Rng rng(43);
  for (int i = 0; i < 200; ++i) {
    const Quaternion a = random_quaternion(rng), b = random_quaternion(rng);
    const Vec3 wr = rng.vec3(0, 2);
    const Vec3 expected = wr.cwiseProduct(axis_angle_log(a, b));
    CHECK((k_nom(a, b, wr) - expected).norm() < 1e-9);
    CHECK(k_nom(a, a, wr).norm() == 0.0);
    CHECK((k_nom(a, b, wr) + k_nom(b, a, wr)).norm() < 1e-9);
    CHECK(k_nom(a, b, Vec3::Zero()).norm() == 0.0);
  }
}

TEST_CASE("build_nominal") {
  NominalSpec spec;
  spec.v_des = Vec3(0.5, 0, 0);
  const auto g = GaitParams::trot();
  const StateTrajectory X = build_nominal(spec, g, Vec3(0, 0, 0.3));
  CHECK(X.horizon() == 10);
  CHECK(X.c(9).x() == doctest::Approx(0.135));
  CHECK(X.c(10).x() == doctest::Approx(0.15));
  for (std::size_t s = 0; s <= 10; ++s) {
    CHECK(X.c(s).z() == 0.25);
    CHECK(Vec3(X.cdot(s)) == spec.v_des);
  }
  NominalSpec tilted;
  tilted.w_amom = Vec3(0.0, 2.0, 0.0);
  tilted.q0 = Quaternion(Eigen::AngleAxisd(10.0 * std::numbers::pi / 180.0, Vec3::UnitY()));
  const StateTrajectory T = build_nominal(tilted, g, Vec3(0.1, 0.2, 0.3));
  CHECK(T.c(4) == Vec3(0.1, 0.2, 0.25));
  for (std::size_t s = 0; s <= 10; ++s) CHECK((Vec3(T.k(s)) - Vec3(0, 2.0 * 10.0 * std::numbers::pi / 180.0, 0)).norm() < 1e-12);
}

TEST_CASE("validation") {
  GaitParams g = GaitParams::trot();
  g.stance_duration = 0.5;
  CHECK_THROWS(g.validate());
  g = GaitParams::trot();
  g.n_knots = 1;
  CHECK_THROWS(g.validate());
  NominalSpec n;
  n.z_des = 0.0;
  CHECK_THROWS(n.validate());
}

TEST_CASE("problem builder: CoM boxes follow the support and contain the nominal height") {
  ProblemBuilder builder;
  NominalSpec nominal;
  CentroidalState s;
  s.c = Vec3(0, 0, 0.25);
  const ProblemSpec spec = builder.build(GaitParams::bound(), nominal, 0.0, s);
  CHECK_NOTHROW(spec.validate());
  for (std::size_t k = 0; k <= spec.horizon(); ++k) {
    CHECK(spec.com_lower[k].z() <= 0.25);
    CHECK(spec.com_upper[k].z() >= 0.25);
  }
  CHECK(spec.x_init.c == s.c);
}

TEST_CASE("contact plan JSON export") {
  const ContactPlan p = plan_at(GaitParams::trot(), 0.0);
  const auto j = contact_plan_to_json(p);
  CHECK(j.at("horizon") == 10);
  CHECK(j.at("active").size() == 10);
  CHECK(j.at("active")[0][FL] == 1);
  CHECK(j.at("positions")[0][0].size() == 3);
}
