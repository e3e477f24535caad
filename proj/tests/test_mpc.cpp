#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <atomic>
#include <cmath>
#include <sstream>
#include <thread>

#include "biconvex_mpc/mpc.hpp"
#include "biconvex_mpc/scenario.hpp"
#include "support/oracles.hpp"

using namespace biconvex_mpc;

namespace {

// One effector, four knots of 0.03 s; knot values (0,0,2),(0,0,4), then flight, then (0,0,10).
TimedPlan small_plan() {
  TimedPlan p;
  p.contacts = ContactPlan(4, 1, 0.03);
  p.forces = ForcePlan(4, 1);
  p.contacts.setActive(0, 0, true);
  p.contacts.setActive(1, 0, true);
  p.contacts.setActive(3, 0, true);
  p.forces.force(0, 0) = Vec3(0, 0, 2);
  p.forces.force(1, 0) = Vec3(0, 0, 4);
  p.forces.force(3, 0) = Vec3(0, 0, 10);
  return p;
}

Vec3 force_at(const TimedPlan& p, double t) { return interpolate_forces(p, t).effectors[0].force; }

Scenario stand_scenario(double duration = 2.0) {
  Scenario s = scenario_from_json(nlohmann::json::parse(R"({
    "mass": 2.5, "mu": 0.8, "gait": "stand",
    "nominal": {"v_des": [0, 0, 0], "z_des": 0.25},
    "mpc": {"replan_hz": 20, "control_hz": 1000, "lag": "none"}
  })"));
  s.mpc.scenario_duration = duration;
  return s;
}

bool same(const CentroidalState& a, const CentroidalState& b) { return a.c == b.c && a.cdot == b.cdot && a.k == b.k; }

Scenario trot_scenario(double duration) {
  Scenario s = scenario_from_json(nlohmann::json::parse(R"({
    "mass": 2.5, "mu": 0.8, "gait": "trot",
    "nominal": {"v_des": [0.3, 0, 0], "z_des": 0.25},
    "mpc": {"replan_hz": 20, "control_hz": 1000, "lag": {"fixed_ms": 10}},
    "disturbances": [{"start": 0.2, "duration": 0.2, "magnitude": 5, "direction_deg": 90}]
  })"));
  s.mpc.scenario_duration = duration;
  return s;
}

std::string csv_of(const SimLog& log) {
  std::ostringstream os;
  write_sim_csv(log, os);
  return os.str();
}

}  // namespace

TEST_CASE("interpolate_forces examples") {
  const TimedPlan p = small_plan();
  CHECK(force_at(p, 0.0) == Vec3(0, 0, 2));
  CHECK(force_at(p, 0.03) == Vec3(0, 0, 4));
  CHECK((force_at(p, 0.015) - Vec3(0, 0, 3)).norm() < 1e-12);
  // 25% into the flight knot that precedes the stance knot of value 10.
  CHECK((force_at(p, 0.06 + 0.25 * 0.03) - Vec3(0, 0, 2.5)).norm() < 1e-12);
  CHECK_FALSE(interpolate_forces(p, 0.1).exhausted);
  const InterpolatedForces past = interpolate_forces(p, 0.5);
  CHECK(past.exhausted);
  CHECK(past.effectors[0].force == Vec3(0, 0, 10));
}

TEST_CASE("interpolate_forces: stance to flight ramps down to zero") {
  const TimedPlan p = small_plan();
  CHECK((force_at(p, 0.03 + 0.5 * 0.03) - Vec3(0, 0, 2)).norm() < 1e-12);
}

TEST_CASE("property: interpolation is linear inside each interval") {
  oracle::Rng rng(51);
  TimedPlan p;
  p.contacts = ContactPlan(6, 2, 0.05);
  p.forces = ForcePlan(6, 2);
  for (std::size_t t = 0; t < 6; ++t)
    for (std::size_t j = 0; j < 2; ++j) {
      p.contacts.setActive(t, j, true);
      p.forces.force(t, j) = rng.vec3(-5, 5);
    }
  for (int i = 0; i < 200; ++i) {
    const std::size_t k = static_cast<std::size_t>(rng.integer(0, 4));
    const double a = rng.uniform(0, 1);
    const auto f = interpolate_forces(p, 0.05 * (static_cast<double>(k) + a));
    for (std::size_t j = 0; j < 2; ++j) {
      const Vec3 expected = (1 - a) * p.forces.force(k, j) + a * p.forces.force(k + 1, j);
      CHECK((f.effectors[j].force - expected).norm() < 1e-9);
    }
  }
}

TEST_CASE("apply_plan_lag") {
  const TimedPlan p = small_plan();
  const TimedPlan same = apply_plan_lag(p, 0.0);
  for (double t : {0.0, 0.01, 0.045, 0.08}) CHECK(force_at(same, t) == force_at(p, t));
  const TimedPlan one = apply_plan_lag(p, 0.03);
  CHECK((force_at(one, 0.0) - Vec3(0, 0, 4)).norm() < 1e-12);
  const TimedPlan lagged = apply_plan_lag(p, 0.023);
  for (double t : {0.0, 0.002, 0.03, 0.05})
    CHECK((force_at(lagged, t) - force_at(p, t + 0.023)).norm() < 1e-12);
  CHECK_THROWS_WITH(apply_plan_lag(p, 0.12), "lag exceeds horizon");
  CHECK_THROWS_WITH(apply_plan_lag(lagged, 0.1), "lag exceeds horizon");
  CHECK_THROWS(apply_plan_lag(p, -0.01));
}

TEST_CASE("shift_solution") {
  std::mt19937_64 gen(52);
  const ProblemSpec spec = oracle::gait_problem(GaitParams::trot(), gen);
  oracle::Rng rng(52);
  const ForcePlan F = oracle::random_forces(rng, spec);
  const StateTrajectory X = rollout(F, spec);
  const Vector P = Vector::LinSpaced(static_cast<Eigen::Index>(9 * spec.horizon()), 0, 1);
  const AdmmInit zero = shift_solution(X, F, P, 0);
  CHECK(zero.X.data() == X.data());
  CHECK(zero.F.data() == F.data());
  const AdmmInit two = shift_solution(X, F, P, 2);
  const std::size_t T = spec.horizon();
  CHECK(same(two.X.knot(0), X.knot(2)));
  CHECK(same(two.X.knot(T), X.knot(T)));
  CHECK(same(two.X.knot(T - 1), X.knot(T)));
  CHECK(Vec3(two.F.force(0, 1)) == Vec3(F.force(2, 1)));
  CHECK(Vec3(two.F.force(T - 1, 1)) == Vec3(F.force(T - 1, 1)));
  CHECK(two.P[0] == P[18]);
}

TEST_CASE("plant agrees with the planned rollout under constant forces") {
  ProblemSpec spec = oracle::hover_problem(10);
  spec.validate();
  AdmmConfig cfg;
  cfg.eps_dyn = 1e-8;
  const AdmmResult res = admm_solve(spec, std::nullopt, cfg);
  // Hold every knot at the knot-0 force so interpolation and zero-order hold coincide.
  ForcePlan held(spec.horizon(), 4);
  for (std::size_t t = 0; t < spec.horizon(); ++t)
    for (std::size_t j = 0; j < 4; ++j) held.force(t, j) = res.F.force(0, j);
  const StateTrajectory X = rollout(held, spec);
  TimedPlan plan{held, spec.plan, 0.0};
  const double dt_c = 1e-3;
  const int per_knot = static_cast<int>(std::lround(spec.dt() / dt_c));
  CentroidalState s = spec.x_init;
  for (std::size_t k = 0; k < spec.horizon(); ++k) {
    for (int i = 0; i < per_knot; ++i) {
      const auto f = interpolate_forces(plan, (static_cast<double>(k * per_knot + i)) * dt_c);
      s = integrate_step(s, f.effectors, spec.mass, spec.gravity, dt_c);
    }
    const double scale = dt_c / spec.dt();
    CHECK((s.c - X.c(k + 1)).norm() < 0.05 * scale + 1e-9);
    CHECK((s.cdot - X.cdot(k + 1)).norm() < 1e-9);
  }
}

TEST_CASE("mpc_cost_metric") {
  SimLog log;
  CHECK_THROWS(mpc_cost_metric(log));
  log.replans.push_back(ReplanRecord{.cost = 1.5});
  CHECK(mpc_cost_metric(log) == 1.5);
  log.replans.push_back(ReplanRecord{.cost = 1.5});
  CHECK(mpc_cost_metric(log) == 1.5);
  log.replans.push_back(ReplanRecord{.cost = 100.0, .failed = true});
  CHECK(mpc_cost_metric(log) == 1.5);
}

TEST_CASE("format_number") {
  CHECK(format_number(0.1) == "0.1");
  CHECK(format_number(-2.5e-7) == "-2.5e-07");
  CHECK(format_number(3.0) == "3");
  CHECK(format_number(std::nan("")) == "nan");
}

TEST_CASE("config validation") {
  MpcConfig m;
  m.control_hz = 10.0;
  CHECK_THROWS(m.validate(0.03, 10));
  m = MpcConfig{};
  m.replan_hz = 2.0;
  CHECK_THROWS(m.validate(0.03, 10));
  CHECK_NOTHROW(m.validate(0.03, 20));
  Disturbance d;
  d.duration = 0.0;
  CHECK_THROWS(d.validate());
  const Disturbance p = Disturbance::planar(1.0, 0.3, 10.0, 90.0);
  CHECK((p.force - Vec3(0, 10, 0)).norm() < 1e-12);
}

TEST_CASE("standing stays within a centimetre of the nominal height") {
  const Scenario s = stand_scenario();
  const SimLog log = run_closed_loop(s);
  CHECK(log.rows.size() == 2000);
  CHECK_FALSE(log.aborted);
  double worst = 0.0;
  for (std::size_t i = 1; i < log.rows.size(); ++i) {
    CHECK(log.rows[i].t > log.rows[i - 1].t);
    worst = std::max(worst, std::abs(log.rows[i].state.c.z() - 0.25));
  }
  CHECK(worst <= 0.01);
}

TEST_CASE("sequential runs are byte-identical") {
  const Scenario s = trot_scenario(0.6);
  const SimLog a = run_closed_loop(s);
  const SimLog b = run_closed_loop(s);
  CHECK(a.rows.size() == 600);
  const std::string ca = csv_of(a);
  CHECK(ca == csv_of(b));
  const std::string header = ca.substr(0, ca.find('\n'));
  CHECK(header ==
        "t,cx,cy,cz,vx,vy,vz,kx,ky,kz,f0x,f0y,f0z,f1x,f1y,f1z,f2x,f2y,f2z,f3x,f3y,f3z,"
        "vdesx,vdesy,vdesz,violation,solve_us,cost");
  const auto summary = nlohmann::json::parse(sim_summary_json(a));
  for (const char* key : {"mean_cost", "mean_violation", "tracking_rmse", "max_solve_us"})
    CHECK(summary.contains(key));
}

TEST_CASE("push is visible in the logged lateral velocity") {
  const SimLog log = run_closed_loop(trot_scenario(0.6));
  double vy_max = 0.0;
  for (const auto& r : log.rows) vy_max = std::max(vy_max, r.state.cdot.y());
  // 5 N for 0.2 s on 2.5 kg gives up to 0.4 m/s before the controller reacts.
  CHECK(vy_max > 0.05);
}

TEST_CASE("PlanSlot hands out whole entries under contention") {
  PlanSlot slot;
  std::atomic<bool> done{false};
  std::atomic<int> torn{0};
  std::thread reader([&] {
    while (!done) {
      const auto e = slot.read();
      if (e && e->plan.forces.force(0, 0).x() != e->activation_time) ++torn;
    }
  });
  for (int i = 0; i < 2000; ++i) {
    auto e = std::make_shared<PlanSlot::Entry>();
    e->activation_time = i;
    e->plan.forces = ForcePlan(3, 1);
    e->plan.forces.force(0, 0).x() = i;
    slot.publish(std::move(e));
  }
  done = true;
  reader.join();
  CHECK(torn == 0);
  CHECK(slot.read()->activation_time == 1999);
}

TEST_CASE("concurrent mode runs and logs every tick") {
  Scenario s = stand_scenario(0.5);
  s.mpc.sequential = false;
  s.mpc.lag = LagModel{LagKind::Measured, 0.0};
  const SimLog log = run_closed_loop(s);
  CHECK(log.rows.size() == 500);
  CHECK_FALSE(log.aborted);
  CHECK_FALSE(log.replans.empty());
}

TEST_CASE("scenario parsing errors name the field") {
  auto doc = nlohmann::json::parse(R"({"gait": "trot", "nominal": {"v_des": [0, 0, 0]}})");
  CHECK_THROWS_WITH(scenario_from_json(doc), doctest::Contains("mass"));
  doc["mass"] = 2.5;
  doc["gait"] = "gallop";
  CHECK_THROWS_WITH(scenario_from_json(doc), doctest::Contains("gait"));
  doc["gait"] = "trot";
  doc["mpc"] = {{"lag", "sometimes"}};
  CHECK_THROWS_WITH(scenario_from_json(doc), doctest::Contains("lag"));
}
