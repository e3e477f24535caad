#include "biconvex_mpc/gait.hpp"

#include <cmath>
#include <stdexcept>

namespace biconvex_mpc {

namespace {
// Absorbs rounding in (t dt + t_elapsed) / gait_duration so that knot
// boundaries land on the intended side of the stance threshold.
constexpr double kPhaseEps = 1e-9;
}  // namespace

void GaitParams::validate() const {
  if (!(stance_duration > 0.0) || stance_duration > gait_duration)
    throw std::invalid_argument("gait: need 0 < stance_duration <= gait_duration");
  if (!(dt > 0.0)) throw std::invalid_argument("gait: dt must be positive");
  if (n_knots < 2) throw std::invalid_argument("gait: n_knots must be >= 2");
  for (double off : phase_offsets)
    if (off < 0.0 || off >= 1.0) throw std::invalid_argument("gait: phase offsets must lie in [0, 1)");
}

GaitParams GaitParams::trot() { return {"trot", 0.15, 0.3, 0.03, 10, {0.0, 0.5, 0.5, 0.0}}; }
GaitParams GaitParams::jump() { return {"jump", 0.2, 0.5, 0.05, 10, {0.0, 0.0, 0.0, 0.0}}; }
GaitParams GaitParams::bound() { return {"bound", 0.15, 0.3, 0.05, 12, {0.0, 0.0, 0.5, 0.5}}; }
GaitParams GaitParams::stand(double dt, std::size_t n_knots) {
  return {"stand", 1.0, 1.0, dt, n_knots, {0.0, 0.0, 0.0, 0.0}};
}

GaitParams GaitParams::byName(const std::string& name) {
  if (name == "trot") return trot();
  if (name == "jump") return jump();
  if (name == "bound") return bound();
  if (name == "stand") return stand();
  throw std::invalid_argument("unknown gait '" + name + "'");
}

void NominalSpec::validate() const {
  if (!(z_des > 0.0)) throw std::invalid_argument("nominal: z_des must be positive");
  if ((w_amom.array() < 0.0).any()) throw std::invalid_argument("nominal: w_amom must be nonnegative");
  if (std::abs(q0.norm() - 1.0) > 1e-9 || std::abs(q_des.norm() - 1.0) > 1e-9)
    throw std::invalid_argument("nominal: quaternions must be unit");
}

Vec3 raibert_footstep(const Vec3& hip_nominal, const Vec3& v_actual, const Vec3& v_des, double stance_duration,
                      double k_gain, const std::function<double(double, double)>& terrain_height) {
  if (!(stance_duration > 0.0)) throw std::invalid_argument("raibert_footstep: stance_duration must be positive");
  Vec3 r = hip_nominal + v_actual * (0.5 * stance_duration) + k_gain * (v_actual - v_des);
  r.z() = terrain_height ? terrain_height(r.x(), r.y()) : 0.0;
  return r;
}

double gait_phase(const GaitParams& gait, std::size_t effector, double t) {
  const double offset = effector < gait.phase_offsets.size() ? gait.phase_offsets[effector] : 0.0;
  double phase = t / gait.gait_duration + offset;
  phase -= std::floor(phase);
  if (phase > 1.0 - kPhaseEps) phase = 0.0;
  return phase;
}

bool in_stance(const GaitParams& gait, std::size_t effector, double t) {
  if (gait.stance_duration >= gait.gait_duration) return true;
  return gait_phase(gait, effector, t) < gait.stance_duration / gait.gait_duration - kPhaseEps;
}

ContactPlan make_cyclic_plan(const GaitParams& gait, const std::vector<Vec3>& hip_offsets, double t_elapsed,
                             const Vec3& com, const Vec3& v_actual, const Vec3& v_des,
                             const FootstepConfig& footstep,
                             const std::vector<std::optional<Vec3>>& current_feet) {
  gait.validate();
  const std::size_t N = hip_offsets.size();
  if (!current_feet.empty() && current_feet.size() != N)
    throw std::invalid_argument("make_cyclic_plan: current_feet must match the effector count");
  ContactPlan plan(gait.n_knots, N, gait.dt);

  for (std::size_t j = 0; j < N; ++j) {
    Vec3 foot = Vec3::Zero();
    bool have_foot = false;
    for (std::size_t t = 0; t < gait.n_knots; ++t) {
      const double ahead = static_cast<double>(t) * gait.dt;
      const bool on = in_stance(gait, j, t_elapsed + ahead);
      // Hip location predicted with the commanded velocity.
      const Vec3 hip = com + v_des * ahead + hip_offsets[j];
      if (on && !have_foot) {
        if (t == 0 && !current_feet.empty() && current_feet[j]) {
          foot = *current_feet[j];
        } else {
          foot = raibert_footstep(hip, v_actual, v_des, gait.stance_duration, footstep.raibert_gain,
                                  footstep.terrain_height);
        }
        have_foot = true;
      }
      if (!on) have_foot = false;
      plan.setActive(t, j, on);
      plan.setPosition(t, j, on ? foot : Vec3(hip.x(), hip.y(), 0.0));
    }
  }
  return plan;
}

Vec3 k_nom(const Quaternion& q0, const Quaternion& q_des, const Vec3& w) {
  Quaternion rel = q_des.conjugate() * q0;
  if (rel.w() < 0.0) rel.coeffs() = -rel.coeffs();
  const Vec3 v = rel.vec();
  const double s = v.norm();
  Vec3 log;
  if (s < 1e-12) {
    log = 2.0 * v / rel.w();
  } else {
    log = (2.0 * std::atan2(s, rel.w()) / s) * v;
  }
  return w.cwiseProduct(log);
}

StateTrajectory build_nominal(const NominalSpec& spec, const GaitParams& gait, const Vec3& com0) {
  spec.validate();
  gait.validate();
  StateTrajectory X(gait.n_knots, gait.dt);
  const Vec3 amom = k_nom(spec.q0, spec.q_des, spec.w_amom);
  for (std::size_t t = 0; t <= gait.n_knots; ++t) {
    CentroidalState s;
    s.c = com0 + spec.v_des * (static_cast<double>(t) * gait.dt);
    s.c.z() = spec.z_des;
    s.cdot = spec.v_des;
    s.k = amom;
    X.setKnot(t, s);
  }
  return X;
}

std::vector<Vec3> default_quadruped_hips() {
  return {Vec3(0.1946, 0.14695, -0.25), Vec3(0.1946, -0.14695, -0.25), Vec3(-0.1946, 0.14695, -0.25),
          Vec3(-0.1946, -0.14695, -0.25)};
}

}  // namespace biconvex_mpc
