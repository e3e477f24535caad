/**
 * @file gait.hpp
 * @brief Cyclic contact plans, Raibert footstep adaptation and nominal
 *        centroidal trajectories.
 */
#pragma once

#include <array>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Geometry>

#include "biconvex_mpc/centroidal_model.hpp"

namespace biconvex_mpc {

using Quaternion = Eigen::Quaterniond;

struct GaitParams {
  std::string name;
  double stance_duration = 0.15;
  double gait_duration = 0.3;
  double dt = 0.03;
  std::size_t n_knots = 10;
  /// Phase offset in [0, 1) per effector.
  std::vector<double> phase_offsets;

  void validate() const;

  // Quadruped gaits, effector order (FL, FR, HL, HR).
  static GaitParams trot();
  static GaitParams jump();
  static GaitParams bound();
  static GaitParams stand(double dt = 0.05, std::size_t n_knots = 10);
  /// Looks up "trot", "jump", "bound" or "stand".
  static GaitParams byName(const std::string& name);
};

struct NominalSpec {
  Vec3 v_des = Vec3::Zero();
  double z_des = 0.25;
  Vec3 w_amom = Vec3::Zero();
  Quaternion q0 = Quaternion::Identity();
  Quaternion q_des = Quaternion::Identity();

  void validate() const;
};

struct FootstepConfig {
  /// Gain on (v_actual - v_des), seconds.
  double raibert_gain = 0.03;
  /// Ground height under (x, y); flat ground when empty.
  std::function<double(double, double)> terrain_height;
};

/// r = hip + v_actual T_stance / 2 + k (v_actual - v_des), z on the terrain.
Vec3 raibert_footstep(const Vec3& hip_nominal, const Vec3& v_actual, const Vec3& v_des, double stance_duration,
                      double k_gain, const std::function<double(double, double)>& terrain_height = {});

/// Phase of effector j at absolute time t, in [0, 1).
double gait_phase(const GaitParams& gait, std::size_t effector, double t);
/// True if effector j is in stance at absolute time t.
bool in_stance(const GaitParams& gait, std::size_t effector, double t);

/// Contact plan for knots t = 0..n_knots-1 starting at t_elapsed. hip_offsets
/// are nominal hip positions relative to the CoM. Effectors in stance at knot
/// 0 keep their position from current_feet when one is given.
ContactPlan make_cyclic_plan(const GaitParams& gait, const std::vector<Vec3>& hip_offsets, double t_elapsed,
                             const Vec3& com, const Vec3& v_actual, const Vec3& v_des,
                             const FootstepConfig& footstep = {},
                             const std::vector<std::optional<Vec3>>& current_feet = {});

/// w * log(q_des^-1 q0), shortest arc. Zero when q0 == q_des.
Vec3 k_nom(const Quaternion& q0, const Quaternion& q_des, const Vec3& w);

/// Knots 0..n_knots: c_t = com0 + v_des t dt with z = z_des, cdot_t = v_des, k_t = k_nom.
StateTrajectory build_nominal(const NominalSpec& spec, const GaitParams& gait, const Vec3& com0);

/// Solo12-like hip offsets relative to the CoM, order (FL, FR, HL, HR).
std::vector<Vec3> default_quadruped_hips();

}  // namespace biconvex_mpc
