/**
 * @file centroidal_model.hpp
 * @brief Discrete centroidal dynamics and its two bi-affine rearrangements.
 *
 * The dynamics of the CoM position c, velocity cdot and angular momentum k
 * are discretized with explicit Euler:
 *
 *   c_{t+1}    = c_t + cdot_t dt
 *   cdot_{t+1} = cdot_t + sum_j n_t^j f_t^j / m dt + g dt
 *   k_{t+1}    = k_t + sum_j n_t^j (r_t^j - c_t) x f_t^j dt
 *
 * The only nonlinearity is the cross product, so the stacked residual is
 * affine in the states for fixed forces and affine in the forces for fixed
 * states. Both matrices are built here, with the initial state eliminated
 * (its contribution is folded into b).
 */
#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <Eigen/SparseCore>

namespace biconvex_mpc {

using Vec3 = Eigen::Vector3d;
using Vector = Eigen::VectorXd;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// Number of scalars per state knot: c, cdot, k.
inline constexpr int kStateDim = 9;

struct CentroidalState {
  Vec3 c = Vec3::Zero();
  Vec3 cdot = Vec3::Zero();
  Vec3 k = Vec3::Zero();

  bool isFinite() const { return c.allFinite() && cdot.allFinite() && k.allFinite(); }
  Eigen::Matrix<double, 9, 1> stacked() const;
  static CentroidalState fromStacked(const Eigen::Ref<const Vector>& v);
};

/// Knots 0..T stored contiguously as [c, cdot, k] blocks.
class StateTrajectory {
 public:
  StateTrajectory() = default;
  StateTrajectory(std::size_t horizon, double dt);
  StateTrajectory(Vector data, double dt);

  std::size_t horizon() const { return static_cast<std::size_t>(data_.size() / kStateDim) - 1; }
  std::size_t numKnots() const { return static_cast<std::size_t>(data_.size() / kStateDim); }
  double dt() const { return dt_; }

  auto c(std::size_t t) { return data_.segment<3>(kStateDim * t); }
  auto c(std::size_t t) const { return data_.segment<3>(kStateDim * t); }
  auto cdot(std::size_t t) { return data_.segment<3>(kStateDim * t + 3); }
  auto cdot(std::size_t t) const { return data_.segment<3>(kStateDim * t + 3); }
  auto k(std::size_t t) { return data_.segment<3>(kStateDim * t + 6); }
  auto k(std::size_t t) const { return data_.segment<3>(kStateDim * t + 6); }

  CentroidalState knot(std::size_t t) const;
  void setKnot(std::size_t t, const CentroidalState& s);

  const Vector& data() const { return data_; }
  Vector& data() { return data_; }

  /// Knots 1..T, the decision block of the state subproblem.
  Vector freeBlock() const { return data_.tail(data_.size() - kStateDim); }
  void setFreeBlock(const Eigen::Ref<const Vector>& v) { data_.tail(data_.size() - kStateDim) = v; }

 private:
  Vector data_;
  double dt_ = 0.0;
};

/// Forces f_t^j for t in [0, T), j in [0, N), flattened as ((t * N + j) * 3 + axis).
class ForcePlan {
 public:
  ForcePlan() = default;
  ForcePlan(std::size_t horizon, std::size_t n_eff)
      : data_(Vector::Zero(static_cast<Eigen::Index>(3 * horizon * n_eff))), horizon_(horizon), n_eff_(n_eff) {}
  ForcePlan(Vector data, std::size_t horizon, std::size_t n_eff);

  std::size_t horizon() const { return horizon_; }
  std::size_t numEffectors() const { return n_eff_; }

  auto force(std::size_t t, std::size_t j) { return data_.segment<3>(index(t, j)); }
  auto force(std::size_t t, std::size_t j) const { return data_.segment<3>(index(t, j)); }
  Eigen::Index index(std::size_t t, std::size_t j) const { return static_cast<Eigen::Index>(3 * (t * n_eff_ + j)); }

  const Vector& data() const { return data_; }
  Vector& data() { return data_; }

 private:
  Vector data_;
  std::size_t horizon_ = 0;
  std::size_t n_eff_ = 0;
};

/// Contact activity n_t^j and location r_t^j for every knot t in [0, T).
class ContactPlan {
 public:
  ContactPlan() = default;
  ContactPlan(std::size_t horizon, std::size_t n_eff, double dt);

  std::size_t horizon() const { return horizon_; }
  std::size_t numEffectors() const { return n_eff_; }
  double dt() const { return dt_; }

  bool active(std::size_t t, std::size_t j) const { return active_[t * n_eff_ + j] != 0; }
  void setActive(std::size_t t, std::size_t j, bool on) { active_[t * n_eff_ + j] = on ? 1 : 0; }
  const Vec3& position(std::size_t t, std::size_t j) const { return positions_[t * n_eff_ + j]; }
  void setPosition(std::size_t t, std::size_t j, const Vec3& r) { positions_[t * n_eff_ + j] = r; }
  std::size_t numActive(std::size_t t) const;

  /// Throws std::invalid_argument if an active contact has a non-finite position.
  void validate() const;

 private:
  std::vector<unsigned char> active_;
  std::vector<Vec3> positions_;
  std::size_t horizon_ = 0;
  std::size_t n_eff_ = 0;
  double dt_ = 0.0;
};

struct StateWeights {
  Eigen::Matrix<double, 9, 1> running = Eigen::Matrix<double, 9, 1>::Ones();
  Eigen::Matrix<double, 9, 1> terminal = Eigen::Matrix<double, 9, 1>::Ones();
};

/// Discrete centroidal optimal control problem over one horizon.
struct ProblemSpec {
  double mass = 1.0;
  Vec3 gravity{0.0, 0.0, -9.81};
  double mu = 0.8;
  ContactPlan plan;
  // CoM bounds per state knot 0..T; infinite entries allowed.
  std::vector<Vec3> com_lower;
  std::vector<Vec3> com_upper;
  StateTrajectory x_nom;
  StateWeights weights_x;
  Vec3 weights_f = Vec3::Constant(1e-3);
  CentroidalState x_init;

  std::size_t horizon() const { return plan.horizon(); }
  std::size_t numEffectors() const { return plan.numEffectors(); }
  double dt() const { return plan.dt(); }
  std::size_t stateFreeDim() const { return kStateDim * horizon(); }
  std::size_t forceDim() const { return 3 * numEffectors() * horizon(); }

  /// Throws std::invalid_argument naming the first inconsistent field.
  void validate() const;
};

/// A z = b, rows = 9 T. A is built once and treated as immutable.
struct BiAffineSystem {
  SparseMatrix A;
  Vector b;

  Vector residual(const Eigen::Ref<const Vector>& z) const { return A * z - b; }
};

/// Contact input for a single effector during one integration step.
struct EffectorInput {
  Vec3 force = Vec3::Zero();
  Vec3 position = Vec3::Zero();
  bool active = false;
};

/// One explicit-Euler step of the centroidal dynamics. Throws
/// std::invalid_argument("non-finite state") on non-finite input.
CentroidalState integrate_step(const CentroidalState& state, std::span<const EffectorInput> effectors,
                               double mass, const Vec3& gravity, double dt);

/// Same step using the plan row and dt of a ProblemSpec.
CentroidalState integrate_step(const CentroidalState& state, const std::vector<Vec3>& forces,
                               std::size_t knot, const ProblemSpec& spec);

/// Forward rollout of x_init under F; knot 0 equals x_init.
StateTrajectory rollout(const ForcePlan& forces, const ProblemSpec& spec);

/// Stacked residual of the three dynamics equations, ordered per knot as
/// [position(3), velocity(3), angular momentum(3)]. Length 9 T.
Vector dynamics_residual(const StateTrajectory& X, const ForcePlan& F, const ProblemSpec& spec);

/// A(F) X_free = b(F): the residual as an affine map of knots 1..T.
BiAffineSystem build_state_system(const ForcePlan& F, const ProblemSpec& spec);

/// A(X) F = b(X): the residual as an affine map of the forces. Columns of
/// inactive contacts are structurally empty.
BiAffineSystem build_force_system(const StateTrajectory& X, const ProblemSpec& spec);

/// Phi(X) = (X - X_nom)^T W_x (X - X_nom) over knots 1..T; knot T uses the terminal weights.
double state_cost(const StateTrajectory& X, const ProblemSpec& spec);
/// Phi(F) = F^T W_f F.
double force_cost(const ForcePlan& F, const ProblemSpec& spec);

/// Diagonal of W_x for the free block (knots 1..T).
Vector state_weight_diagonal(const ProblemSpec& spec);
/// Diagonal of W_f for the full force vector.
Vector force_weight_diagonal(const ProblemSpec& spec);

/// Lower/upper bounds of the free state block: CoM boxes, +-inf elsewhere.
std::pair<Vector, Vector> state_bounds(const ProblemSpec& spec);

}  // namespace biconvex_mpc
