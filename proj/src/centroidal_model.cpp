/**
 * @file centroidal_model.cpp
 * @brief Centroidal dynamics residual and the A(F) / A(X) builders.
 */
#include "biconvex_mpc/centroidal_model.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace biconvex_mpc {

namespace {

using Triplet = Eigen::Triplet<double>;

Eigen::Matrix3d skew(const Vec3& v) {
  Eigen::Matrix3d m;
  m << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
       -v.y(), v.x(), 0.0;
  return m;
}

void addBlock(std::vector<Triplet>& triplets, Eigen::Index row, Eigen::Index col, const Eigen::Matrix3d& block) {
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      if (block(i, j) != 0.0) triplets.emplace_back(row + i, col + j, block(i, j));
}

void addDiagonal(std::vector<Triplet>& triplets, Eigen::Index row, Eigen::Index col, double value) {
  for (int i = 0; i < 3; ++i) triplets.emplace_back(row + i, col + i, value);
}

Eigen::Index freeColumn(std::size_t knot) { return static_cast<Eigen::Index>(kStateDim * (knot - 1)); }

void checkTrajectory(const StateTrajectory& X, const ProblemSpec& spec) {
  if (X.numKnots() < 2 || X.horizon() != spec.horizon())
    throw std::invalid_argument("state trajectory has " + std::to_string(X.numKnots()) + " knots, expected " +
                                std::to_string(spec.horizon() + 1));
}

void checkForces(const ForcePlan& F, const ProblemSpec& spec) {
  if (F.horizon() != spec.horizon() || F.numEffectors() != spec.numEffectors() ||
      static_cast<std::size_t>(F.data().size()) != spec.forceDim())
    throw std::invalid_argument("force plan dimension " + std::to_string(F.data().size()) + " does not match plan (" +
                                std::to_string(spec.forceDim()) + ")");
}

}  // namespace

// ---------------------------------------------------------------- containers

Eigen::Matrix<double, 9, 1> CentroidalState::stacked() const {
  Eigen::Matrix<double, 9, 1> v;
  v << c, cdot, k;
  return v;
}

CentroidalState CentroidalState::fromStacked(const Eigen::Ref<const Vector>& v) {
  if (v.size() != kStateDim) throw std::invalid_argument("centroidal state needs 9 entries");
  CentroidalState s;
  s.c = v.segment<3>(0);
  s.cdot = v.segment<3>(3);
  s.k = v.segment<3>(6);
  return s;
}

StateTrajectory::StateTrajectory(std::size_t horizon, double dt)
    : data_(Vector::Zero(static_cast<Eigen::Index>(kStateDim * (horizon + 1)))), dt_(dt) {
  if (horizon < 1) throw std::invalid_argument("state trajectory needs at least 2 knots");
  if (!(dt > 0.0)) throw std::invalid_argument("state trajectory dt must be positive");
}

StateTrajectory::StateTrajectory(Vector data, double dt) : data_(std::move(data)), dt_(dt) {
  if (data_.size() % kStateDim != 0 || data_.size() < 2 * kStateDim)
    throw std::invalid_argument("state trajectory size must be 9 (T + 1) with T >= 1");
  if (!(dt > 0.0)) throw std::invalid_argument("state trajectory dt must be positive");
}

CentroidalState StateTrajectory::knot(std::size_t t) const {
  return CentroidalState::fromStacked(data_.segment<kStateDim>(static_cast<Eigen::Index>(kStateDim * t)));
}

void StateTrajectory::setKnot(std::size_t t, const CentroidalState& s) {
  data_.segment<kStateDim>(static_cast<Eigen::Index>(kStateDim * t)) = s.stacked();
}

ForcePlan::ForcePlan(Vector data, std::size_t horizon, std::size_t n_eff)
    : data_(std::move(data)), horizon_(horizon), n_eff_(n_eff) {
  if (static_cast<std::size_t>(data_.size()) != 3 * horizon * n_eff)
    throw std::invalid_argument("force plan size must be 3 N T");
}

ContactPlan::ContactPlan(std::size_t horizon, std::size_t n_eff, double dt)
    : active_(horizon * n_eff, 0), positions_(horizon * n_eff, Vec3::Zero()), horizon_(horizon), n_eff_(n_eff),
      dt_(dt) {
  if (horizon < 1) throw std::invalid_argument("contact plan horizon must be >= 1");
  if (!(dt > 0.0)) throw std::invalid_argument("contact plan dt must be positive");
}

std::size_t ContactPlan::numActive(std::size_t t) const {
  std::size_t n = 0;
  for (std::size_t j = 0; j < n_eff_; ++j) n += active(t, j) ? 1 : 0;
  return n;
}

void ContactPlan::validate() const {
  for (std::size_t t = 0; t < horizon_; ++t)
    for (std::size_t j = 0; j < n_eff_; ++j)
      if (active(t, j) && !position(t, j).allFinite())
        throw std::invalid_argument("plan: non-finite contact position at knot " + std::to_string(t) +
                                    ", effector " + std::to_string(j));
}

void ProblemSpec::validate() const {
  if (!(mass > 0.0) || !std::isfinite(mass)) throw std::invalid_argument("mass must be positive");
  if (!(mu > 0.0) || !std::isfinite(mu)) throw std::invalid_argument("mu must be positive");
  if (!gravity.allFinite()) throw std::invalid_argument("gravity must be finite");
  if (plan.horizon() < 1) throw std::invalid_argument("plan: empty horizon");
  plan.validate();
  const std::size_t knots = horizon() + 1;
  if (com_lower.size() != knots || com_upper.size() != knots)
    throw std::invalid_argument("com_bounds must hold T + 1 = " + std::to_string(knots) + " entries");
  for (std::size_t t = 0; t < knots; ++t)
    if ((com_lower[t].array() > com_upper[t].array()).any())
      throw std::invalid_argument("com_bounds: lower > upper at knot " + std::to_string(t));
  if (x_nom.numKnots() != knots) throw std::invalid_argument("x_nom must hold T + 1 knots");
  if ((weights_x.running.array() < 0.0).any() || (weights_x.terminal.array() < 0.0).any())
    throw std::invalid_argument("weights_x must be nonnegative");
  if ((weights_f.array() < 0.0).any()) throw std::invalid_argument("weights_f must be nonnegative");
  if (!x_init.isFinite()) throw std::invalid_argument("x_init: non-finite state");
}

// ---------------------------------------------------------------- dynamics

CentroidalState integrate_step(const CentroidalState& state, std::span<const EffectorInput> effectors, double mass,
                               const Vec3& gravity, double dt) {
  if (!state.isFinite()) throw std::invalid_argument("non-finite state");
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
  Vec3 total_force = Vec3::Zero();
  Vec3 moment = Vec3::Zero();
  for (const auto& e : effectors) {
    if (!e.active) continue;
    if (!e.force.allFinite() || !e.position.allFinite()) throw std::invalid_argument("non-finite state");
    total_force += e.force;
    moment += (e.position - state.c).cross(e.force);
  }
  CentroidalState next;
  next.c = state.c + state.cdot * dt;
  next.cdot = state.cdot + total_force / mass * dt + gravity * dt;
  next.k = state.k + moment * dt;
  return next;
}

CentroidalState integrate_step(const CentroidalState& state, const std::vector<Vec3>& forces, std::size_t knot,
                               const ProblemSpec& spec) {
  if (forces.size() != spec.numEffectors()) throw std::invalid_argument("forces must be given for all effectors");
  std::vector<EffectorInput> inputs(forces.size());
  for (std::size_t j = 0; j < forces.size(); ++j)
    inputs[j] = {forces[j], spec.plan.position(knot, j), spec.plan.active(knot, j)};
  return integrate_step(state, inputs, spec.mass, spec.gravity, spec.dt());
}

StateTrajectory rollout(const ForcePlan& F, const ProblemSpec& spec) {
  checkForces(F, spec);
  StateTrajectory X(spec.horizon(), spec.dt());
  X.setKnot(0, spec.x_init);
  std::vector<Vec3> forces(spec.numEffectors());
  for (std::size_t t = 0; t < spec.horizon(); ++t) {
    for (std::size_t j = 0; j < forces.size(); ++j) forces[j] = F.force(t, j);
    X.setKnot(t + 1, integrate_step(X.knot(t), forces, t, spec));
  }
  return X;
}

Vector dynamics_residual(const StateTrajectory& X, const ForcePlan& F, const ProblemSpec& spec) {
  checkTrajectory(X, spec);
  checkForces(F, spec);
  const double dt = spec.dt();
  Vector r(static_cast<Eigen::Index>(kStateDim * spec.horizon()));
  for (std::size_t t = 0; t < spec.horizon(); ++t) {
    const Vec3 c = t == 0 ? spec.x_init.c : Vec3(X.c(t));
    const Vec3 cdot = t == 0 ? spec.x_init.cdot : Vec3(X.cdot(t));
    const Vec3 k = t == 0 ? spec.x_init.k : Vec3(X.k(t));
    Vec3 total_force = Vec3::Zero();
    Vec3 moment = Vec3::Zero();
    for (std::size_t j = 0; j < spec.numEffectors(); ++j) {
      if (!spec.plan.active(t, j)) continue;
      total_force += F.force(t, j);
      moment += (spec.plan.position(t, j) - c).cross(Vec3(F.force(t, j)));
    }
    const Eigen::Index row = static_cast<Eigen::Index>(kStateDim * t);
    r.segment<3>(row) = X.c(t + 1) - c - cdot * dt;
    r.segment<3>(row + 3) = X.cdot(t + 1) - cdot - total_force / spec.mass * dt - spec.gravity * dt;
    r.segment<3>(row + 6) = X.k(t + 1) - k - moment * dt;
  }
  return r;
}

BiAffineSystem build_state_system(const ForcePlan& F, const ProblemSpec& spec) {
  checkForces(F, spec);
  const std::size_t T = spec.horizon();
  const double dt = spec.dt();
  const auto rows = static_cast<Eigen::Index>(kStateDim * T);

  std::vector<Triplet> triplets;
  triplets.reserve(static_cast<std::size_t>(rows) * 4);
  Vector b = Vector::Zero(rows);

  for (std::size_t t = 0; t < T; ++t) {
    const Eigen::Index row = static_cast<Eigen::Index>(kStateDim * t);
    Vec3 total_force = Vec3::Zero();
    Vec3 foot_moment = Vec3::Zero();
    for (std::size_t j = 0; j < spec.numEffectors(); ++j) {
      if (!spec.plan.active(t, j)) continue;
      total_force += F.force(t, j);
      foot_moment += spec.plan.position(t, j).cross(Vec3(F.force(t, j)));
    }
    // (r - c) x f = r x f + [f]x c, so the moment arm contributes -dt [sum f]x on c_t.
    const Eigen::Matrix3d c_coupling = -dt * skew(total_force);

    const Eigen::Index next = freeColumn(t + 1);
    addDiagonal(triplets, row, next, 1.0);
    addDiagonal(triplets, row + 3, next + 3, 1.0);
    addDiagonal(triplets, row + 6, next + 6, 1.0);

    b.segment<3>(row + 3) = total_force / spec.mass * dt + spec.gravity * dt;
    b.segment<3>(row + 6) = foot_moment * dt;

    if (t == 0) {
      const CentroidalState& x0 = spec.x_init;
      b.segment<3>(row) += x0.c + x0.cdot * dt;
      b.segment<3>(row + 3) += x0.cdot;
      b.segment<3>(row + 6) += x0.k - c_coupling * x0.c;
    } else {
      const Eigen::Index cur = freeColumn(t);
      addDiagonal(triplets, row, cur, -1.0);
      addDiagonal(triplets, row, cur + 3, -dt);
      addDiagonal(triplets, row + 3, cur + 3, -1.0);
      addDiagonal(triplets, row + 6, cur + 6, -1.0);
      addBlock(triplets, row + 6, cur, c_coupling);
    }
  }

  BiAffineSystem sys;
  sys.A.resize(rows, rows);
  sys.A.setFromTriplets(triplets.begin(), triplets.end());
  sys.A.makeCompressed();
  sys.b = std::move(b);
  return sys;
}

BiAffineSystem build_force_system(const StateTrajectory& X, const ProblemSpec& spec) {
  checkTrajectory(X, spec);
  const std::size_t T = spec.horizon();
  const double dt = spec.dt();
  const auto rows = static_cast<Eigen::Index>(kStateDim * T);
  const auto cols = static_cast<Eigen::Index>(spec.forceDim());

  std::vector<Triplet> triplets;
  triplets.reserve(static_cast<std::size_t>(cols) * 3);
  Vector b(rows);

  for (std::size_t t = 0; t < T; ++t) {
    const Eigen::Index row = static_cast<Eigen::Index>(kStateDim * t);
    const Vec3 c = t == 0 ? spec.x_init.c : Vec3(X.c(t));
    const Vec3 cdot = t == 0 ? spec.x_init.cdot : Vec3(X.cdot(t));
    const Vec3 k = t == 0 ? spec.x_init.k : Vec3(X.k(t));

    b.segment<3>(row) = -(X.c(t + 1) - c - cdot * dt);
    b.segment<3>(row + 3) = -(X.cdot(t + 1) - cdot - spec.gravity * dt);
    b.segment<3>(row + 6) = -(X.k(t + 1) - k);

    for (std::size_t j = 0; j < spec.numEffectors(); ++j) {
      if (!spec.plan.active(t, j)) continue;
      const Eigen::Index col = static_cast<Eigen::Index>(3 * (t * spec.numEffectors() + j));
      addDiagonal(triplets, row + 3, col, -dt / spec.mass);
      addBlock(triplets, row + 6, col, -dt * skew(spec.plan.position(t, j) - c));
    }
  }

  BiAffineSystem sys;
  sys.A.resize(rows, cols);
  sys.A.setFromTriplets(triplets.begin(), triplets.end());
  sys.A.makeCompressed();
  sys.b = std::move(b);
  return sys;
}

// ---------------------------------------------------------------- costs & bounds

Vector state_weight_diagonal(const ProblemSpec& spec) {
  const std::size_t T = spec.horizon();
  Vector w(static_cast<Eigen::Index>(kStateDim * T));
  for (std::size_t t = 1; t <= T; ++t)
    w.segment<kStateDim>(freeColumn(t)) = t == T ? spec.weights_x.terminal : spec.weights_x.running;
  return w;
}

Vector force_weight_diagonal(const ProblemSpec& spec) {
  Vector w(static_cast<Eigen::Index>(spec.forceDim()));
  for (Eigen::Index i = 0; i < w.size(); i += 3) w.segment<3>(i) = spec.weights_f;
  return w;
}

double state_cost(const StateTrajectory& X, const ProblemSpec& spec) {
  checkTrajectory(X, spec);
  const Vector d = X.freeBlock() - spec.x_nom.freeBlock();
  return d.dot(state_weight_diagonal(spec).cwiseProduct(d));
}

double force_cost(const ForcePlan& F, const ProblemSpec& spec) {
  checkForces(F, spec);
  return F.data().dot(force_weight_diagonal(spec).cwiseProduct(F.data()));
}

std::pair<Vector, Vector> state_bounds(const ProblemSpec& spec) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  const std::size_t T = spec.horizon();
  Vector lower = Vector::Constant(static_cast<Eigen::Index>(kStateDim * T), -inf);
  Vector upper = Vector::Constant(static_cast<Eigen::Index>(kStateDim * T), inf);
  for (std::size_t t = 1; t <= T; ++t) {
    lower.segment<3>(freeColumn(t)) = spec.com_lower[t];
    upper.segment<3>(freeColumn(t)) = spec.com_upper[t];
  }
  return {std::move(lower), std::move(upper)};
}

}  // namespace biconvex_mpc
