/**
 * @file problem_io.hpp
 * @brief JSON serialization of ProblemSpec.
 *
 * Arrays are row-major: plan.active is T x N, plan.positions is T x N x 3,
 * com_bounds.lower/upper and x_nom.knots have T + 1 rows. Infinite CoM
 * bounds are written as null.
 */
#pragma once

#include <string>
#include <string_view>

#include <json.hpp>

#include "biconvex_mpc/centroidal_model.hpp"

namespace biconvex_mpc {

nlohmann::json problem_to_json(const ProblemSpec& spec);

/// Throws std::invalid_argument whose message names the offending field.
ProblemSpec problem_from_json(const nlohmann::json& doc);

ProblemSpec load_problem(const std::string& path);
void save_problem(const ProblemSpec& spec, const std::string& path);

namespace json_field {

/// Returns doc[name] or throws "missing field '<name>'".
const nlohmann::json& require(const nlohmann::json& doc, std::string_view name);
double number(const nlohmann::json& doc, std::string_view name);
double number_or(const nlohmann::json& doc, std::string_view name, double fallback);
Vec3 vec3(const nlohmann::json& doc, std::string_view name);
Vec3 vec3_or(const nlohmann::json& doc, std::string_view name, const Vec3& fallback);
Vector vector(const nlohmann::json& doc, std::string_view name, Eigen::Index expected_size);
nlohmann::json array(const Eigen::Ref<const Vector>& v);

}  // namespace json_field

}  // namespace biconvex_mpc
