#include "biconvex_mpc/problem_builder.hpp"

namespace biconvex_mpc {

ProblemBuilder::ProblemBuilder() {
  weights_x.running << 1e-3, 1e-3, 1e1, 1e0, 1e0, 1e0, 1e-1, 1e-1, 1e-1;
  weights_x.terminal = 10.0 * weights_x.running;
}

void ProblemBuilder::fill_com_bounds(ProblemSpec& spec, const Vec3& com) const {
  const ContactPlan& plan = spec.plan;
  const std::size_t T = plan.horizon();
  spec.com_lower.assign(T + 1, Vec3::Zero());
  spec.com_upper.assign(T + 1, Vec3::Zero());
  Vec3 center(com.x(), com.y(), 0.0);
  for (std::size_t s = 0; s <= T; ++s) {
    const std::size_t knot = s < T ? s : T - 1;
    const std::size_t n = plan.numActive(knot);
    if (n > 0) {
      Vec3 sum = Vec3::Zero();
      for (std::size_t j = 0; j < plan.numEffectors(); ++j)
        if (plan.active(knot, j)) sum += plan.position(knot, j);
      center = sum / static_cast<double>(n);
    }
    const Vec3 mid = center + Vec3(0.0, 0.0, com_box.center_height);
    spec.com_lower[s] = mid - com_box.half_width;
    spec.com_upper[s] = mid + com_box.half_width;
  }
}

ProblemSpec ProblemBuilder::build(const GaitParams& gait, const NominalSpec& nominal, double t_elapsed,
                                  const CentroidalState& state,
                                  const std::vector<std::optional<Vec3>>& current_feet) const {
  ProblemSpec spec;
  spec.mass = mass;
  spec.gravity = gravity;
  spec.mu = mu;
  spec.plan = make_cyclic_plan(gait, hips, t_elapsed, state.c, state.cdot, nominal.v_des, footstep, current_feet);
  spec.x_nom = build_nominal(nominal, gait, state.c);
  spec.weights_x = weights_x;
  spec.weights_f = weights_f;
  spec.x_init = state;
  fill_com_bounds(spec, state.c);
  spec.validate();
  return spec;
}

CentroidalState perturbed_state(const CentroidalState& base, std::mt19937_64& rng, const StatePerturbation& range) {
  auto draw = [&rng](double half) {
    Vec3 v;
    for (int i = 0; i < 3; ++i) v[i] = std::uniform_real_distribution<double>(-half, half)(rng);
    return v;
  };
  CentroidalState s = base;
  s.c += draw(range.position);
  s.cdot += draw(range.velocity);
  s.k += draw(range.momentum);
  return s;
}

}  // namespace biconvex_mpc
