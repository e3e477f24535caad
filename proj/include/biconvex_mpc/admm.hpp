/**
 * @file admm.hpp
 * @brief Biconvex centroidal optimization: ADMM over the force and state
 *        subproblems, each solved by FISTA.
 *
 * Every outer iteration solves, in this order,
 *
 *   F+ = argmin Phi(F) + rho/2 |A(X) F - b(X) + P|^2 + I(F)
 *   X+ = argmin Phi(X) + rho/2 |A(F+) X - b(F+) + P|^2 + I(X)
 *   P+ = P + A(F+) X+ - b(F+)
 *
 * and stops as soon as |A(F+) X+ - b(F+)|^2 <= eps_dyn.
 */
#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "biconvex_mpc/centroidal_model.hpp"
#include "biconvex_mpc/fista.hpp"

namespace biconvex_mpc {

struct AdmmConfig {
  double rho = 100.0;
  double eps_dyn = 1e-3;
  int max_iter = 50;
  FistaConfig inner;
  /// Reuse the accepted FISTA step parameter of the previous solve of the same subproblem.
  bool warm_start_line_search = true;

  void validate() const;
};

/// Starting point (X, F, P). Defaults: X = x_nom, F = 0, P = 0.
struct AdmmInit {
  StateTrajectory X;
  ForcePlan F;
  Vector P;
};

struct AdmmIterationRecord {
  int iter = 0;
  double violation = 0.0;
  int inner_iters_f = 0;
  int inner_iters_x = 0;
  double elapsed_us = 0.0;
};

struct AdmmResult {
  StateTrajectory X;
  ForcePlan F;
  Vector P;
  /// Dynamics violation after every outer iteration.
  std::vector<double> violations;
  std::vector<AdmmIterationRecord> trace;
  int iterations = 0;
  bool converged = false;
  /// Iteration (0-based) whose iterate is returned: the one with least violation.
  int best_iteration = 0;
  /// Phi(X) + Phi(F) of the returned iterate.
  double objective = 0.0;
};

/// |A(F) X - b(F)|^2.
double violation(const StateTrajectory& X, const ForcePlan& F, const ProblemSpec& spec);

/// Holds the per-subproblem FISTA workspaces and the line-search cache, which
/// persists across solve() calls (e.g. across MPC cycles).
class AdmmSolver {
 public:
  explicit AdmmSolver(AdmmConfig cfg = {});

  AdmmResult solve(const ProblemSpec& spec, const std::optional<AdmmInit>& init = std::nullopt);

  const AdmmConfig& config() const { return cfg_; }
  AdmmConfig& config() { return cfg_; }
  std::optional<double> cachedForceStep() const { return force_L_; }
  std::optional<double> cachedStateStep() const { return state_L_; }
  void resetLineSearchCache() { force_L_.reset(); state_L_.reset(); }

  /// Invoked after every outer iteration.
  std::function<void(const AdmmIterationRecord&)> on_iteration;

 private:
  AdmmConfig cfg_;
  FistaSolver force_solver_;
  FistaSolver state_solver_;
  std::optional<double> force_L_;
  std::optional<double> state_L_;
};

AdmmResult admm_solve(const ProblemSpec& spec, const std::optional<AdmmInit>& init, const AdmmConfig& cfg);

/// {"iter":..,"violation":..,"inner_iters_f":..,"inner_iters_x":..,"elapsed_us":..}
std::string trace_json_line(const AdmmIterationRecord& rec);

}  // namespace biconvex_mpc
