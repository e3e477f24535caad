#include "biconvex_mpc/admm.hpp"

#include <chrono>
#include <stdexcept>

#include <json.hpp>

#include "biconvex_mpc/prox.hpp"

namespace biconvex_mpc {

void AdmmConfig::validate() const {
  if (!(rho > 0.0)) throw std::invalid_argument("admm: rho must be positive");
  if (!(eps_dyn >= 0.0)) throw std::invalid_argument("admm: eps_dyn must be nonnegative");
  if (max_iter < 1) throw std::invalid_argument("admm: max_iter must be >= 1");
  inner.validate();
}

double violation(const StateTrajectory& X, const ForcePlan& F, const ProblemSpec& spec) {
  return dynamics_residual(X, F, spec).squaredNorm();
}

AdmmSolver::AdmmSolver(AdmmConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

AdmmResult AdmmSolver::solve(const ProblemSpec& spec, const std::optional<AdmmInit>& init) {
  cfg_.validate();
  spec.validate();
  using Clock = std::chrono::steady_clock;
  const auto start = Clock::now();

  const std::size_t T = spec.horizon();
  StateTrajectory X = spec.x_nom;
  ForcePlan F(T, spec.numEffectors());
  Vector P = Vector::Zero(static_cast<Eigen::Index>(kStateDim * T));
  if (init) {
    if (init->X.horizon() != T || init->F.horizon() != T || init->F.numEffectors() != spec.numEffectors() ||
        init->P.size() != P.size())
      throw std::invalid_argument("admm: initial guess does not match the problem dimensions");
    X = init->X;
    F = init->F;
    P = init->P;
  }
  X.setKnot(0, spec.x_init);

  const Vector w_state = state_weight_diagonal(spec);
  const Vector w_force = force_weight_diagonal(spec);
  const Vector x_nom_free = spec.x_nom.freeBlock();
  const Vector zero_force = Vector::Zero(static_cast<Eigen::Index>(spec.forceDim()));

  FrictionConeProx cone{spec.mu, {}};
  cone.active.resize(T * spec.numEffectors());
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t j = 0; j < spec.numEffectors(); ++j)
      cone.active[t * spec.numEffectors() + j] = spec.plan.active(t, j) ? 1 : 0;
  const ProxOperator force_prox = std::move(cone);
  auto [lower, upper] = state_bounds(spec);
  const ProxOperator state_prox = BoxProx{std::move(lower), std::move(upper)};

  AdmmResult res;
  double best = std::numeric_limits<double>::infinity();
  FistaConfig inner = cfg_.inner;

  for (int k = 0; k < cfg_.max_iter; ++k) {
    AdmmIterationRecord rec;
    rec.iter = k;
    try {
      const BiAffineSystem force_sys = build_force_system(X, spec);
      const auto force_problem = ConvexSubproblem::penalized(w_force, zero_force, force_sys, P, cfg_.rho);
      inner.warm_start_L = cfg_.warm_start_line_search ? force_L_ : std::nullopt;
      FistaResult fr = force_solver_.minimize(force_problem, force_prox, F.data(), inner);
      F.data() = std::move(fr.x);
      force_L_ = fr.accepted_L;
      rec.inner_iters_f = fr.iterations;

      const BiAffineSystem state_sys = build_state_system(F, spec);
      const auto state_problem = ConvexSubproblem::penalized(w_state, x_nom_free, state_sys, P, cfg_.rho);
      inner.warm_start_L = cfg_.warm_start_line_search ? state_L_ : std::nullopt;
      FistaResult xr = state_solver_.minimize(state_problem, state_prox, X.freeBlock(), inner);
      X.setFreeBlock(xr.x);
      state_L_ = xr.accepted_L;
      rec.inner_iters_x = xr.iterations;

      const Vector r = state_sys.residual(X.freeBlock());
      P += r;
      rec.violation = r.squaredNorm();
    } catch (const std::exception& e) {
      throw std::runtime_error("admm iteration " + std::to_string(k) + ": " + e.what());
    }
    if (!std::isfinite(rec.violation)) throw std::runtime_error("admm iteration " + std::to_string(k) + ": diverged");

    rec.elapsed_us = std::chrono::duration<double, std::micro>(Clock::now() - start).count();
    res.violations.push_back(rec.violation);
    res.trace.push_back(rec);
    res.iterations = k + 1;
    if (on_iteration) on_iteration(rec);

    if (rec.violation < best) {
      best = rec.violation;
      res.best_iteration = k;
      res.X = X;
      res.F = F;
      res.P = P;
    }
    if (rec.violation <= cfg_.eps_dyn) {
      res.converged = true;
      break;
    }
  }

  res.objective = state_cost(res.X, spec) + force_cost(res.F, spec);
  return res;
}

AdmmResult admm_solve(const ProblemSpec& spec, const std::optional<AdmmInit>& init, const AdmmConfig& cfg) {
  AdmmSolver solver(cfg);
  return solver.solve(spec, init);
}

std::string trace_json_line(const AdmmIterationRecord& rec) {
  nlohmann::json j;
  j["iter"] = rec.iter;
  j["violation"] = rec.violation;
  j["inner_iters_f"] = rec.inner_iters_f;
  j["inner_iters_x"] = rec.inner_iters_x;
  j["elapsed_us"] = rec.elapsed_us;
  return j.dump();
}

}  // namespace biconvex_mpc
