/**
 * @file scenario.hpp
 * @brief Scenario documents for closed-loop runs and contact plan export.
 *
 * Layout (all keys except mass/gait/nominal optional):
 *
 *   { "mass": 2.5, "gravity": [0,0,-9.81], "mu": 0.8,
 *     "gait": "trot" | {name, stance_duration, gait_duration, dt, n_knots, phase_offsets},
 *     "nominal": {v_des, z_des, w_amom, q0: [x,y,z,w], q_des: [x,y,z,w]},
 *     "mpc": {replan_hz, control_hz, horizon_knots, duration, sequential, warm_start,
 *             lag: "none" | "measured" | {"fixed_ms": 10}},
 *     "admm": {rho, eps_dyn, max_iter, inner: {max_iter, grad_tol, l0, beta_ls}},
 *     "weights": {x_running[9], x_terminal[9], f[3]},
 *     "com_box": {half_width[3], center_height},
 *     "hips": [[x,y,z], ...], "raibert_gain": 0.03,
 *     "initial_state": {c, cdot, k},
 *     "commands": [{start, v_des}],
 *     "disturbances": [{start, duration, force[3], offset[3]} |
 *                      {start, duration, magnitude, direction_deg}],
 *     "recovery": {max_support_offset, max_height_drop, max_final_speed_error, settle_window},
 *     "seed": 0 }
 */
#pragma once

#include <string>

#include <json.hpp>

#include "biconvex_mpc/mpc.hpp"

namespace biconvex_mpc {

/// Throws std::invalid_argument whose message names the offending field.
Scenario scenario_from_json(const nlohmann::json& doc);
Scenario load_scenario(const std::string& path);

GaitParams gait_from_json(const nlohmann::json& node);
nlohmann::json contact_plan_to_json(const ContactPlan& plan);

/// Reads and parses a JSON file; parse errors carry the path.
nlohmann::json read_json_file(const std::string& path);

}  // namespace biconvex_mpc
