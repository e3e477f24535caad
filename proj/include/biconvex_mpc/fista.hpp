/**
 * @file fista.hpp
 * @brief Accelerated proximal gradient (FISTA) for the convex quadratic
 *        subproblems, with backtracking and a warm-startable step parameter.
 */
#pragma once

#include <functional>
#include <optional>

#include "biconvex_mpc/centroidal_model.hpp"
#include "biconvex_mpc/prox.hpp"

namespace biconvex_mpc {

/// f(z) = 1/2 z^T H z - g^T z + constant, with H symmetric positive definite.
struct ConvexSubproblem {
  SparseMatrix hessian;
  Vector linear;
  double constant = 0.0;

  Eigen::Index dim() const { return linear.size(); }
  double value(const Eigen::Ref<const Vector>& z) const;
  void gradient(const Eigen::Ref<const Vector>& z, Eigen::Ref<Vector> out) const;

  /// z^T W z - 2 z^T W z_nom + z_nom^T W z_nom + rho/2 |A z - b + P|^2 for a diagonal W.
  /// H = 2 W + rho A^T A is formed once here and reused by every iteration.
  static ConvexSubproblem penalized(const Vector& weight_diag, const Vector& nominal, const BiAffineSystem& sys,
                                    const Vector& dual, double rho);
};

struct FistaConfig {
  int max_iter = 5000;
  double grad_tol = 1e-5;
  double l0 = 1e-2;
  double beta_ls = 2.0;
  std::optional<double> warm_start_L;
  /// Called after every iteration with (k, objective, L). Objective evaluation
  /// costs one extra product, so it only happens when this is set.
  std::function<void(int, double, double)> trace;

  void validate() const;
};

struct FistaResult {
  Vector x;
  int iterations = 0;
  double final_grad_norm = 0.0;
  double accepted_L = 0.0;
  /// Total number of L increases made by the line search.
  int backtracks = 0;
};

struct BacktrackResult {
  double L = 0.0;
  int increases = 0;
};

/// Smallest L in {L0 beta^i} with f(x) <= f(y) + grad^T (x - y) + L/2 |x - y|^2,
/// x = prox(y - grad / L). Writes the accepted x into x_out.
BacktrackResult backtrack_step(const ConvexSubproblem& p, const ProxOperator& prox, const Eigen::Ref<const Vector>& y,
                               const Eigen::Ref<const Vector>& grad, double L0, double beta_ls, Vector& x_out);

/// Owns the iteration buffers; one solve at a time per instance.
class FistaSolver {
 public:
  FistaResult minimize(const ConvexSubproblem& p, const ProxOperator& prox, const Eigen::Ref<const Vector>& x0,
                       const FistaConfig& cfg);

 private:
  Vector x_, x_prev_, y_, grad_, candidate_, step_, hd_;
};

FistaResult fista_minimize(const ConvexSubproblem& p, const ProxOperator& prox, const Eigen::Ref<const Vector>& x0,
                           const FistaConfig& cfg);

}  // namespace biconvex_mpc
