/**
 * @file problem_builder.hpp
 * @brief Assembles a ProblemSpec for one horizon from robot parameters, a gait,
 *        a nominal specification and the current state.
 */
#pragma once

#include <optional>
#include <random>
#include <vector>

#include "biconvex_mpc/centroidal_model.hpp"
#include "biconvex_mpc/gait.hpp"

namespace biconvex_mpc {

/// Per-knot CoM box centered on the centroid of the active contacts, lifted by
/// center_height. During full flight the previous knot's center is kept.
struct ComBoxConfig {
  Vec3 half_width{0.2, 0.2, 0.15};
  double center_height = 0.25;
};

struct ProblemBuilder {
  double mass = 2.5;
  Vec3 gravity{0.0, 0.0, -9.81};
  double mu = 0.8;
  std::vector<Vec3> hips = default_quadruped_hips();
  StateWeights weights_x;
  Vec3 weights_f = Vec3::Constant(1e-4);
  ComBoxConfig com_box;
  FootstepConfig footstep;

  ProblemBuilder();

  ProblemSpec build(const GaitParams& gait, const NominalSpec& nominal, double t_elapsed,
                    const CentroidalState& state,
                    const std::vector<std::optional<Vec3>>& current_feet = {}) const;

  /// Box bounds for every state knot 0..T of the given plan.
  void fill_com_bounds(ProblemSpec& spec, const Vec3& com) const;
};

/// Half-ranges of the uniform perturbation used for randomized initial states.
struct StatePerturbation {
  double position = 0.05;
  double velocity = 0.2;
  double momentum = 0.05;
};

CentroidalState perturbed_state(const CentroidalState& base, std::mt19937_64& rng,
                                const StatePerturbation& range = {});

}  // namespace biconvex_mpc
