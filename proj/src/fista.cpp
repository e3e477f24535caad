#include "biconvex_mpc/fista.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace biconvex_mpc {

double ConvexSubproblem::value(const Eigen::Ref<const Vector>& z) const {
  return 0.5 * z.dot(hessian * z) - linear.dot(z) + constant;
}

void ConvexSubproblem::gradient(const Eigen::Ref<const Vector>& z, Eigen::Ref<Vector> out) const {
  out.noalias() = hessian * z;
  out -= linear;
}

ConvexSubproblem ConvexSubproblem::penalized(const Vector& weight_diag, const Vector& nominal,
                                             const BiAffineSystem& sys, const Vector& dual, double rho) {
  const Eigen::Index n = sys.A.cols();
  if (weight_diag.size() != n || nominal.size() != n || dual.size() != sys.A.rows() || sys.b.size() != sys.A.rows())
    throw std::invalid_argument("penalized subproblem: dimension mismatch");
  if (!(rho > 0.0)) throw std::invalid_argument("penalized subproblem: rho must be positive");

  ConvexSubproblem p;
  const SparseMatrix At = sys.A.transpose();
  p.hessian = rho * (At * sys.A);
  SparseMatrix w(n, n);
  w.reserve(Eigen::VectorXi::Constant(n, 1));
  for (Eigen::Index i = 0; i < n; ++i) w.insert(i, i) = 2.0 * weight_diag[i];
  p.hessian += w;
  p.hessian.makeCompressed();

  const Vector target = sys.b - dual;
  p.linear = 2.0 * weight_diag.cwiseProduct(nominal) + rho * (At * target);
  p.constant = nominal.dot(weight_diag.cwiseProduct(nominal)) + 0.5 * rho * target.squaredNorm();
  return p;
}

void FistaConfig::validate() const {
  if (max_iter < 1) throw std::invalid_argument("fista: max_iter must be >= 1");
  if (!(grad_tol > 0.0)) throw std::invalid_argument("fista: grad_tol must be positive");
  if (!(l0 > 0.0)) throw std::invalid_argument("fista: l0 must be positive");
  if (!(beta_ls > 1.0)) throw std::invalid_argument("fista: beta_ls must be > 1");
  if (warm_start_L && !(*warm_start_L > 0.0)) throw std::invalid_argument("fista: warm_start_L must be positive");
}

namespace {

// Shared by backtrack_step and the solver loop; scratch buffers are caller-owned.
BacktrackResult backtrackInto(const ConvexSubproblem& p, const ProxOperator& prox, const Eigen::Ref<const Vector>& y,
                              const Eigen::Ref<const Vector>& grad, double L0, double beta_ls, Vector& x_out,
                              Vector& step, Vector& h_step) {
  BacktrackResult res{L0, 0};
  for (;;) {
    step = y - grad / res.L;
    apply_prox(prox, step, x_out);
    step = x_out - y;
    // For a quadratic, f(x) - f(y) - grad^T (x - y) = 1/2 (x - y)^T H (x - y) exactly,
    // which avoids cancellation once the steps get small.
    h_step.noalias() = p.hessian * step;
    const double curvature = step.dot(h_step);
    if (!std::isfinite(curvature)) throw std::runtime_error("diverged");
    if (curvature <= res.L * step.squaredNorm() * (1.0 + 1e-12)) return res;
    res.L *= beta_ls;
    ++res.increases;
  }
}

}  // namespace

BacktrackResult backtrack_step(const ConvexSubproblem& p, const ProxOperator& prox, const Eigen::Ref<const Vector>& y,
                               const Eigen::Ref<const Vector>& grad, double L0, double beta_ls, Vector& x_out) {
  if (!(L0 > 0.0)) throw std::invalid_argument("backtrack_step: L must be positive");
  if (!(beta_ls > 1.0)) throw std::invalid_argument("backtrack_step: beta_ls must be > 1");
  x_out.resize(y.size());
  Vector step(y.size()), h_step(y.size());
  return backtrackInto(p, prox, y, grad, L0, beta_ls, x_out, step, h_step);
}

FistaResult FistaSolver::minimize(const ConvexSubproblem& p, const ProxOperator& prox,
                                  const Eigen::Ref<const Vector>& x0, const FistaConfig& cfg) {
  cfg.validate();
  const Eigen::Index n = p.dim();
  if (x0.size() != n) throw std::invalid_argument("fista: x0 has dimension " + std::to_string(x0.size()) +
                                                  ", expected " + std::to_string(n));
  validate_prox(prox, n);

  x_.resize(n);
  apply_prox(prox, x0, x_);
  y_ = x_;
  x_prev_ = x_;
  grad_.resize(n);
  candidate_.resize(n);
  hd_.resize(n);
  step_.resize(n);

  double L = cfg.warm_start_L.value_or(cfg.l0);
  double t = 1.0;
  FistaResult res;
  res.final_grad_norm = std::numeric_limits<double>::infinity();

  for (int k = 0; k < cfg.max_iter; ++k) {
    p.gradient(y_, grad_);
    if (!grad_.allFinite()) throw std::runtime_error("diverged");

    // Only increases L, so the descent guarantee of earlier steps is kept.
    const BacktrackResult bt = backtrackInto(p, prox, y_, grad_, L, cfg.beta_ls, candidate_, step_, hd_);
    L = bt.L;
    res.backtracks += bt.increases;

    // Gradient mapping at y; measuring x_{k+1} - x_k instead stops early at
    // the turning points of the momentum oscillation.
    const double step_norm = L * (candidate_ - y_).norm();
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    x_prev_.swap(x_);
    x_.swap(candidate_);
    y_ = x_ + ((t - 1.0) / t_next) * (x_ - x_prev_);
    t = t_next;

    res.iterations = k + 1;
    res.final_grad_norm = step_norm;
    if (cfg.trace) cfg.trace(k, p.value(x_), L);
    if (step_norm <= cfg.grad_tol) break;
  }

  res.x = x_;
  res.accepted_L = L;
  return res;
}

FistaResult fista_minimize(const ConvexSubproblem& p, const ProxOperator& prox, const Eigen::Ref<const Vector>& x0,
                           const FistaConfig& cfg) {
  FistaSolver solver;
  return solver.minimize(p, prox, x0, cfg);
}

}  // namespace biconvex_mpc
