#include "biconvex_mpc/problem_io.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace biconvex_mpc {

namespace json_field {

const nlohmann::json& require(const nlohmann::json& doc, std::string_view name) {
  const std::string key(name);
  if (!doc.is_object() || !doc.contains(key)) throw std::invalid_argument("missing field '" + key + "'");
  return doc.at(key);
}

double number(const nlohmann::json& doc, std::string_view name) {
  const auto& v = require(doc, name);
  if (!v.is_number()) throw std::invalid_argument("field '" + std::string(name) + "' must be a number");
  return v.get<double>();
}

double number_or(const nlohmann::json& doc, std::string_view name, double fallback) {
  return doc.contains(std::string(name)) ? number(doc, name) : fallback;
}

Vector vector(const nlohmann::json& doc, std::string_view name, Eigen::Index expected_size) {
  const auto& v = require(doc, name);
  if (!v.is_array() || static_cast<Eigen::Index>(v.size()) != expected_size)
    throw std::invalid_argument("field '" + std::string(name) + "' must be an array of " +
                                std::to_string(expected_size) + " numbers");
  Vector out(expected_size);
  for (Eigen::Index i = 0; i < expected_size; ++i) {
    const auto& e = v[static_cast<std::size_t>(i)];
    if (!e.is_number()) throw std::invalid_argument("field '" + std::string(name) + "' must hold numbers");
    out[i] = e.get<double>();
  }
  return out;
}

Vec3 vec3(const nlohmann::json& doc, std::string_view name) { return vector(doc, name, 3); }

Vec3 vec3_or(const nlohmann::json& doc, std::string_view name, const Vec3& fallback) {
  return doc.contains(std::string(name)) ? vec3(doc, name) : fallback;
}

nlohmann::json array(const Eigen::Ref<const Vector>& v) {
  auto out = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

}  // namespace json_field

namespace {

nlohmann::json boundRow(const Vec3& v) {
  auto row = nlohmann::json::array();
  for (int i = 0; i < 3; ++i) row.push_back(std::isfinite(v[i]) ? nlohmann::json(v[i]) : nlohmann::json(nullptr));
  return row;
}

Vec3 readBoundRow(const nlohmann::json& row, double null_value, const char* field) {
  if (!row.is_array() || row.size() != 3) throw std::invalid_argument(std::string("field '") + field + "' rows need 3 entries");
  Vec3 v;
  for (int i = 0; i < 3; ++i) v[i] = row[static_cast<std::size_t>(i)].is_null() ? null_value : row[static_cast<std::size_t>(i)].get<double>();
  return v;
}

}  // namespace

nlohmann::json problem_to_json(const ProblemSpec& spec) {
  using json_field::array;
  nlohmann::json doc;
  doc["mass"] = spec.mass;
  doc["gravity"] = array(spec.gravity);
  doc["mu"] = spec.mu;

  const auto& plan = spec.plan;
  nlohmann::json jp;
  jp["horizon"] = plan.horizon();
  jp["n_eff"] = plan.numEffectors();
  jp["dt"] = plan.dt();
  auto active = nlohmann::json::array();
  auto positions = nlohmann::json::array();
  for (std::size_t t = 0; t < plan.horizon(); ++t) {
    auto arow = nlohmann::json::array();
    auto prow = nlohmann::json::array();
    for (std::size_t j = 0; j < plan.numEffectors(); ++j) {
      arow.push_back(plan.active(t, j) ? 1 : 0);
      prow.push_back(array(plan.position(t, j)));
    }
    active.push_back(arow);
    positions.push_back(prow);
  }
  jp["active"] = active;
  jp["positions"] = positions;
  doc["plan"] = jp;

  auto lower = nlohmann::json::array();
  auto upper = nlohmann::json::array();
  for (std::size_t t = 0; t < spec.com_lower.size(); ++t) {
    lower.push_back(boundRow(spec.com_lower[t]));
    upper.push_back(boundRow(spec.com_upper[t]));
  }
  doc["com_bounds"] = {{"lower", lower}, {"upper", upper}};

  auto knots = nlohmann::json::array();
  for (std::size_t t = 0; t < spec.x_nom.numKnots(); ++t) knots.push_back(array(spec.x_nom.knot(t).stacked()));
  doc["x_nom"] = {{"dt", spec.x_nom.dt()}, {"knots", knots}};
  doc["weights_x"] = {{"running", array(spec.weights_x.running)}, {"terminal", array(spec.weights_x.terminal)}};
  doc["weights_f"] = array(spec.weights_f);
  doc["x_init"] = array(spec.x_init.stacked());
  return doc;
}

ProblemSpec problem_from_json(const nlohmann::json& doc) {
  using namespace json_field;
  ProblemSpec spec;
  spec.mass = number(doc, "mass");
  spec.gravity = vec3(doc, "gravity");
  spec.mu = number(doc, "mu");

  const auto& jp = require(doc, "plan");
  const auto T = static_cast<std::size_t>(number(jp, "horizon"));
  const auto N = static_cast<std::size_t>(number(jp, "n_eff"));
  spec.plan = ContactPlan(T, N, number(jp, "dt"));
  const auto& active = require(jp, "active");
  const auto& positions = require(jp, "positions");
  if (!active.is_array() || active.size() != T || !positions.is_array() || positions.size() != T)
    throw std::invalid_argument("field 'plan' must have T rows of active and positions");
  for (std::size_t t = 0; t < T; ++t) {
    if (active[t].size() != N || positions[t].size() != N)
      throw std::invalid_argument("field 'plan' rows must have n_eff entries");
    for (std::size_t j = 0; j < N; ++j) {
      spec.plan.setActive(t, j, active[t][j].get<int>() != 0);
      const auto& p = positions[t][j];
      if (!p.is_array() || p.size() != 3) throw std::invalid_argument("field 'plan' positions must be 3-vectors");
      spec.plan.setPosition(t, j, Vec3(p[0].get<double>(), p[1].get<double>(), p[2].get<double>()));
    }
  }

  constexpr double inf = std::numeric_limits<double>::infinity();
  const auto& bounds = require(doc, "com_bounds");
  const auto& lower = require(bounds, "lower");
  const auto& upper = require(bounds, "upper");
  if (!lower.is_array() || !upper.is_array() || lower.size() != T + 1 || upper.size() != T + 1)
    throw std::invalid_argument("field 'com_bounds' must have T + 1 rows");
  for (std::size_t t = 0; t <= T; ++t) {
    spec.com_lower.push_back(readBoundRow(lower[t], -inf, "com_bounds"));
    spec.com_upper.push_back(readBoundRow(upper[t], inf, "com_bounds"));
  }

  const auto& xn = require(doc, "x_nom");
  const auto& knots = require(xn, "knots");
  if (!knots.is_array() || knots.size() != T + 1) throw std::invalid_argument("field 'x_nom' must have T + 1 knots");
  spec.x_nom = StateTrajectory(T, number(xn, "dt"));
  for (std::size_t t = 0; t <= T; ++t) {
    nlohmann::json wrapper = {{"knot", knots[t]}};
    spec.x_nom.setKnot(t, CentroidalState::fromStacked(vector(wrapper, "knot", kStateDim)));
  }

  const auto& wx = require(doc, "weights_x");
  spec.weights_x.running = vector(wx, "running", kStateDim);
  spec.weights_x.terminal = vector(wx, "terminal", kStateDim);
  spec.weights_f = vec3(doc, "weights_f");
  spec.x_init = CentroidalState::fromStacked(vector(doc, "x_init", kStateDim));
  spec.validate();
  return spec;
}

ProblemSpec load_problem(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open problem file '" + path + "'");
  return problem_from_json(nlohmann::json::parse(in));
}

void save_problem(const ProblemSpec& spec, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write problem file '" + path + "'");
  out << problem_to_json(spec).dump(2) << '\n';
}

}  // namespace biconvex_mpc
