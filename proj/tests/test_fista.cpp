#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "biconvex_mpc/fista.hpp"
#include "biconvex_mpc/prox.hpp"
#include "support/oracles.hpp"

using namespace biconvex_mpc;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

ConvexSubproblem from_dense(const Eigen::MatrixXd& H, const Vector& g) {
  ConvexSubproblem p;
  p.hessian = H.sparseView();
  p.linear = g;
  p.constant = 0.0;
  return p;
}

// f(x) = x^T H x / 2 - g^T x expressed in the library's convention.
ConvexSubproblem from_qp(const oracle::BoxQp& qp) { return from_dense(qp.H, qp.g); }

Vector grad(const ConvexSubproblem& p, const Vector& y) {
  Vector g(y.size());
  p.gradient(y, g);
  return g;
}

bool in_cone(const Vec3& f, double mu, double tol) { return std::hypot(f.x(), f.y()) <= mu * f.z() + tol; }

}  // namespace

// ---------------------------------------------------------------- box projection

TEST_CASE("box_project clamps and leaves interior points alone") {
  Vector x(3), l(3), u(3);
  x << 5, -3, 0.2;
  l << 0, -1, 0;
  u << 1, 1, 1;
  const Vector p = box_project(x, l, u);
  CHECK(p == (Vector(3) << 1, -1, 0.2).finished());
  CHECK(box_project(p, l, u) == p);
  const Vector free_l = Vector::Constant(3, -kInf), free_u = Vector::Constant(3, kInf);
  CHECK(box_project(x, free_l, free_u) == x);
  l[1] = 2.0;
  CHECK_THROWS(box_project(x, l, u));
}

// ---------------------------------------------------------------- cone projection

TEST_CASE("soc_project: the three cases") {
  CHECK(soc_project(Vec3(0.1, 0, 1.0), 0.8) == Vec3(0.1, 0, 1.0));
  CHECK(soc_project(Vec3(1, 0, -2), 0.8) == Vec3::Zero());
  const Vec3 half = soc_project(Vec3(1, 0, 0), 1.0);
  CHECK((half - Vec3(0.5, 0, 0.5)).norm() < 1e-15);
  CHECK(soc_project(Vec3(0, 0, -1), 0.5) == Vec3::Zero());
  CHECK(soc_project(Vec3(0, 0, 3), 0.5) == Vec3(0, 0, 3));
}

TEST_CASE("soc_project: halfway rule for mu = 1 on the x axis") {
  // For mu = 1 the boundary ray through (1,0,1) is at 45 degrees, so the
  // projection of (a, 0, b) with a > |b| is ((a + b)/2, 0, (a + b)/2).
  oracle::Rng rng(3);
  for (int i = 0; i < 100; ++i) {
    const double a = rng.uniform(0.1, 5.0);
    const double b = rng.uniform(-0.99, 0.99) * a;
    const Vec3 p = soc_project(Vec3(a, 0, b), 1.0);
    CHECK((p - Vec3((a + b) / 2, 0, (a + b) / 2)).norm() < 1e-12);
  }
}

TEST_CASE("property: soc_project against the dense grid oracle") {
  oracle::Rng rng(4);
  for (double mu : {0.5, 0.8, 1.0}) {
    for (int i = 0; i < 200; ++i) {
      const Vec3 f = rng.vec3(-10.0, 10.0);
      const Vec3 p = soc_project(f, mu);
      const auto grid = oracle::grid_cone_projection(f, mu);
      const double d = (f - p).norm();
      REQUIRE(in_cone(p, mu, 1e-9));
      REQUIRE(d <= grid.distance + 1e-12);
      REQUIRE(d >= grid.distance - grid.resolution);
      REQUIRE((p - grid.point).norm() <= std::sqrt(2.0 * d * grid.resolution + grid.resolution * grid.resolution) + 1e-12);
      REQUIRE((soc_project(p, mu) - p).norm() <= 1e-12 * (1.0 + p.norm()));
    }
  }
}

TEST_CASE("friction cone prox zeroes inactive groups") {
  FrictionConeProx prox{0.8, {1, 0}};
  Vector x(6), out(6);
  x << 1, 0, 0, 5, 5, 5;
  apply_prox(prox, x, out);
  CHECK(out.tail(3).norm() == 0.0);
  CHECK(is_feasible(prox, out));
  CHECK_FALSE(is_feasible(prox, x));
  CHECK_THROWS(validate_prox(FrictionConeProx{-1.0, {}}, 6));
  CHECK_THROWS(validate_prox(FrictionConeProx{0.8, {}}, 5));
}

// ---------------------------------------------------------------- FISTA

TEST_CASE("fista: projection of a point onto the unit box") {
  const Vector a = (Vector(3) << 2, 0.5, -1).finished();
  const auto p = from_dense(Eigen::MatrixXd::Identity(3, 3), a);
  const BoxProx box{Vector::Zero(3), Vector::Ones(3)};
  const auto res = fista_minimize(p, box, Vector::Zero(3), FistaConfig{});
  CHECK((res.x - (Vector(3) << 1, 0.5, 0).finished()).norm() < 1e-6);
}

TEST_CASE("fista: unconstrained SPD quadratic against a dense solve") {
  oracle::Rng rng(5);
  FistaConfig cfg;
  cfg.grad_tol = 1e-9;
  for (int trial = 0; trial < 10; ++trial) {
    const auto qp = oracle::random_box_qp(rng, 20);
    const auto res = fista_minimize(from_qp(qp), IdentityProx{}, Vector::Zero(20), cfg);
    const Vector exact = qp.H.llt().solve(qp.g);
    CHECK((res.x - exact).norm() < 1e-6);
    CHECK(res.final_grad_norm <= cfg.grad_tol);
  }
}

TEST_CASE("fista: warm-started L skips the line search and saves work") {
  oracle::Rng rng(6);
  int cold_total = 0;
  int warm_total = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const auto qp = oracle::random_box_qp(rng, 15);
    const BoxProx box{qp.lower, qp.upper};
    const auto p = from_qp(qp);
    FistaConfig cfg;
    const auto cold = fista_minimize(p, box, Vector::Zero(15), cfg);
    cfg.warm_start_L = cold.accepted_L;
    const auto warm = fista_minimize(p, box, Vector::Zero(15), cfg);
    // Work = gradient evaluations + rejected line-search trials.
    cold_total += cold.iterations + cold.backtracks;
    warm_total += warm.iterations + warm.backtracks;
    CHECK(warm.backtracks == 0);
    CHECK(warm.accepted_L == cold.accepted_L);
    Vector x_out;
    const Vector y = Vector::Zero(15);
    CHECK(backtrack_step(p, box, y, grad(p, y), cold.accepted_L, 2.0, x_out).increases == 0);
  }
  CHECK(warm_total <= cold_total);
}

TEST_CASE("backtracking against the eigenvalue oracle") {
  oracle::Rng rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    const auto qp = oracle::random_box_qp(rng, 6);
    const double lmax = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(qp.H).eigenvalues().maxCoeff();
    const auto p = from_qp(qp);
    const Vector y = rng.vector(6, -1, 1);
    Vector x_out;
    const auto at_max = backtrack_step(p, IdentityProx{}, y, grad(p, y), lmax, 2.0, x_out);
    CHECK(at_max.increases == 0);
    const auto below = backtrack_step(p, IdentityProx{}, y, grad(p, y), lmax / 8.0, 2.0, x_out);
    CHECK(below.increases <= 3);
    const Vector d = x_out - y;
    CHECK(p.value(x_out) <= p.value(y) + grad(p, y).dot(d) + 0.5 * below.L * d.squaredNorm() + 1e-12);
  }
}

TEST_CASE("backtracking: decrease test is tight along an eigen-direction") {
  // 1-D quadratic f(x) = a x^2 / 2: with L = a the inequality holds with equality.
  Eigen::MatrixXd H(1, 1);
  H(0, 0) = 3.0;
  const auto p = from_dense(H, Vector::Zero(1));
  const Vector y = Vector::Constant(1, 2.0);
  Vector x_out;
  const auto bt = backtrack_step(p, IdentityProx{}, y, grad(p, y), 3.0, 2.0, x_out);
  CHECK(bt.L == 3.0);
  const Vector d = x_out - y;
  CHECK(p.value(x_out) == doctest::Approx(p.value(y) + grad(p, y).dot(d) + 1.5 * d.squaredNorm()));
}

TEST_CASE("property: box QPs match the enumeration and active-set oracles") {
  oracle::Rng rng(9);
  for (int trial = 0; trial < 40; ++trial) {
    const int dim = rng.integer(1, 6);
    const auto qp = oracle::random_box_qp(rng, dim, 2.0, 20.0);
    const Vector enumerated = oracle::box_qp_enumerate(qp);
    const Vector active = oracle::box_qp_active_set(qp);
    REQUIRE((enumerated - active).norm() < 1e-10);
    const auto res = fista_minimize(from_qp(qp), BoxProx{qp.lower, qp.upper}, Vector::Zero(dim), FistaConfig{});
    REQUIRE((res.x - enumerated).norm() < 1e-5);
  }
}

TEST_CASE("property: every emitted iterate is feasible and the endpoint improves on the start") {
  oracle::Rng rng(10);
  for (int trial = 0; trial < 20; ++trial) {
    const auto qp = oracle::random_box_qp(rng, 12);
    const BoxProx box{qp.lower, qp.upper};
    const auto p = from_qp(qp);
    FistaConfig cfg;
    bool all_feasible = true;
    FistaSolver solver;
    const Vector x0 = rng.vector(12, -3, 3);
    const auto res = solver.minimize(p, box, x0, cfg);
    all_feasible = is_feasible(box, res.x, 0.0);
    Vector start(12);
    apply_prox(box, x0, start);
    CHECK(all_feasible);
    CHECK(p.value(res.x) <= p.value(start) + 1e-12);
    CHECK((res.final_grad_norm <= cfg.grad_tol || res.iterations == cfg.max_iter));
  }
}

TEST_CASE("config validation and divergence") {
  FistaConfig cfg;
  cfg.beta_ls = 1.0;
  CHECK_THROWS(cfg.validate());
  cfg = FistaConfig{};
  cfg.grad_tol = 0.0;
  CHECK_THROWS(cfg.validate());
  Eigen::MatrixXd H = Eigen::MatrixXd::Identity(2, 2);
  Vector g(2);
  g << std::numeric_limits<double>::quiet_NaN(), 0.0;
  CHECK_THROWS_WITH(fista_minimize(from_dense(H, g), IdentityProx{}, Vector::Zero(2), FistaConfig{}),
                    doctest::Contains("diverged"));
}
