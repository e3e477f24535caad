#include "biconvex_mpc/scenario.hpp"

#include <fstream>
#include <stdexcept>

#include "biconvex_mpc/problem_io.hpp"

namespace biconvex_mpc {

namespace {

using nlohmann::json;
namespace jf = json_field;

Quaternion quaternion_or(const json& node, std::string_view name, const Quaternion& fallback) {
  if (!node.contains(name)) return fallback;
  const Vector v = jf::vector(node, name, 4);
  Quaternion q(v[3], v[0], v[1], v[2]);
  if (!(q.norm() > 0.0)) throw std::invalid_argument(std::string(name) + ": zero quaternion");
  return q.normalized();
}

std::size_t count_field(const json& node, std::string_view name, std::size_t fallback) {
  if (!node.contains(name)) return fallback;
  const json& v = node.at(std::string(name));
  if (!v.is_number_integer() || v.get<long long>() < 0)
    throw std::invalid_argument(std::string(name) + ": expected a nonnegative integer");
  return v.get<std::size_t>();
}

NominalSpec nominal_from_json(const json& node) {
  NominalSpec n;
  n.v_des = jf::vec3_or(node, "v_des", n.v_des);
  n.z_des = jf::number_or(node, "z_des", n.z_des);
  n.w_amom = jf::vec3_or(node, "w_amom", n.w_amom);
  n.q0 = quaternion_or(node, "q0", n.q0);
  n.q_des = quaternion_or(node, "q_des", n.q_des);
  return n;
}

MpcConfig mpc_from_json(const json& node) {
  MpcConfig m;
  m.replan_hz = jf::number_or(node, "replan_hz", m.replan_hz);
  m.control_hz = jf::number_or(node, "control_hz", m.control_hz);
  m.horizon_knots = count_field(node, "horizon_knots", m.horizon_knots);
  m.scenario_duration = jf::number_or(node, "duration", m.scenario_duration);
  if (node.contains("sequential")) m.sequential = node.at("sequential").get<bool>();
  if (node.contains("warm_start")) m.warm_start = node.at("warm_start").get<bool>();
  if (node.contains("lag")) {
    const json& lag = node.at("lag");
    if (lag.is_string()) {
      const auto s = lag.get<std::string>();
      if (s == "none") m.lag.kind = LagKind::None;
      else if (s == "measured") m.lag.kind = LagKind::Measured;
      else throw std::invalid_argument("mpc.lag: unknown model '" + s + "'");
    } else if (lag.is_object()) {
      m.lag.kind = LagKind::Fixed;
      m.lag.fixed_ms = jf::number(lag, "fixed_ms");
    } else {
      throw std::invalid_argument("mpc.lag: expected string or object");
    }
  }
  return m;
}

AdmmConfig admm_from_json(const json& node) {
  AdmmConfig a;
  a.rho = jf::number_or(node, "rho", a.rho);
  a.eps_dyn = jf::number_or(node, "eps_dyn", a.eps_dyn);
  a.max_iter = static_cast<int>(count_field(node, "max_iter", static_cast<std::size_t>(a.max_iter)));
  if (node.contains("warm_start_line_search")) a.warm_start_line_search = node.at("warm_start_line_search").get<bool>();
  if (node.contains("inner")) {
    const json& in = node.at("inner");
    a.inner.max_iter = static_cast<int>(count_field(in, "max_iter", static_cast<std::size_t>(a.inner.max_iter)));
    a.inner.grad_tol = jf::number_or(in, "grad_tol", a.inner.grad_tol);
    a.inner.l0 = jf::number_or(in, "l0", a.inner.l0);
    a.inner.beta_ls = jf::number_or(in, "beta_ls", a.inner.beta_ls);
  }
  return a;
}

Disturbance disturbance_from_json(const json& node) {
  const double start = jf::number(node, "start");
  const double duration = jf::number(node, "duration");
  Disturbance d;
  if (node.contains("force")) {
    d.start = start;
    d.duration = duration;
    d.force = jf::vec3(node, "force");
  } else {
    d = Disturbance::planar(start, duration, jf::number(node, "magnitude"), jf::number_or(node, "direction_deg", 90.0));
  }
  d.offset = jf::vec3_or(node, "offset", Vec3::Zero());
  return d;
}

template <class F>
auto field_context(const char* name, F&& f) {
  try {
    return f();
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(std::string(name) + "." + e.what());
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string(name) + ": " + e.what());
  }
}

}  // namespace

GaitParams gait_from_json(const json& node) {
  if (node.is_string()) return GaitParams::byName(node.get<std::string>());
  if (!node.is_object()) throw std::invalid_argument("gait: expected name or object");
  GaitParams g = node.contains("name") ? GaitParams::byName(node.at("name").get<std::string>()) : GaitParams{};
  if (node.contains("name")) g.name = node.at("name").get<std::string>();
  g.stance_duration = jf::number_or(node, "stance_duration", g.stance_duration);
  g.gait_duration = jf::number_or(node, "gait_duration", g.gait_duration);
  g.dt = jf::number_or(node, "dt", g.dt);
  g.n_knots = count_field(node, "n_knots", g.n_knots);
  if (node.contains("phase_offsets")) g.phase_offsets = node.at("phase_offsets").get<std::vector<double>>();
  g.validate();
  return g;
}

Scenario scenario_from_json(const json& doc) {
  if (!doc.is_object()) throw std::invalid_argument("scenario: expected a JSON object");
  Scenario sc;
  ProblemBuilder& b = sc.builder;
  b.mass = jf::number(doc, "mass");
  b.gravity = jf::vec3_or(doc, "gravity", b.gravity);
  b.mu = jf::number_or(doc, "mu", b.mu);
  sc.gait = field_context("gait", [&] { return gait_from_json(jf::require(doc, "gait")); });
  sc.nominal = field_context("nominal", [&] { return nominal_from_json(jf::require(doc, "nominal")); });
  if (doc.contains("mpc")) sc.mpc = field_context("mpc", [&] { return mpc_from_json(doc.at("mpc")); });
  if (doc.contains("admm")) sc.admm = field_context("admm", [&] { return admm_from_json(doc.at("admm")); });

  if (doc.contains("weights")) {
    field_context("weights", [&] {
      const json& w = doc.at("weights");
      if (w.contains("x_running")) b.weights_x.running = jf::vector(w, "x_running", kStateDim);
      if (w.contains("x_terminal")) b.weights_x.terminal = jf::vector(w, "x_terminal", kStateDim);
      b.weights_f = jf::vec3_or(w, "f", b.weights_f);
      return 0;
    });
  }
  if (doc.contains("com_box")) {
    field_context("com_box", [&] {
      const json& c = doc.at("com_box");
      b.com_box.half_width = jf::vec3_or(c, "half_width", b.com_box.half_width);
      b.com_box.center_height = jf::number_or(c, "center_height", b.com_box.center_height);
      return 0;
    });
  }
  if (doc.contains("hips")) {
    field_context("hips", [&] {
      b.hips.clear();
      for (const auto& h : doc.at("hips")) b.hips.push_back(Vec3(h.at(0), h.at(1), h.at(2)));
      return 0;
    });
  }
  b.footstep.raibert_gain = jf::number_or(doc, "raibert_gain", b.footstep.raibert_gain);

  if (doc.contains("initial_state")) {
    sc.initial_state = field_context("initial_state", [&] {
      const json& s = doc.at("initial_state");
      CentroidalState st;
      st.c = jf::vec3_or(s, "c", Vec3(0.0, 0.0, sc.nominal.z_des));
      st.cdot = jf::vec3_or(s, "cdot", Vec3::Zero());
      st.k = jf::vec3_or(s, "k", Vec3::Zero());
      return st;
    });
  }
  if (doc.contains("commands")) {
    field_context("commands", [&] {
      for (const auto& c : doc.at("commands")) sc.commands.push_back({jf::number(c, "start"), jf::vec3(c, "v_des")});
      return 0;
    });
  }
  if (doc.contains("disturbances")) {
    field_context("disturbances", [&] {
      for (const auto& d : doc.at("disturbances")) sc.disturbances.push_back(disturbance_from_json(d));
      return 0;
    });
  }
  if (doc.contains("recovery")) {
    field_context("recovery", [&] {
      const json& r = doc.at("recovery");
      sc.recovery.max_support_offset = jf::number_or(r, "max_support_offset", sc.recovery.max_support_offset);
      sc.recovery.max_height_drop = jf::number_or(r, "max_height_drop", sc.recovery.max_height_drop);
      sc.recovery.max_final_speed_error = jf::number_or(r, "max_final_speed_error", sc.recovery.max_final_speed_error);
      sc.recovery.settle_window = jf::number_or(r, "settle_window", sc.recovery.settle_window);
      return 0;
    });
  }
  if (doc.contains("seed")) sc.seed = doc.at("seed").get<std::uint64_t>();
  sc.validate();
  return sc;
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(path + ": " + e.what());
  }
}

Scenario load_scenario(const std::string& path) { return scenario_from_json(read_json_file(path)); }

json contact_plan_to_json(const ContactPlan& plan) {
  json active = json::array();
  json positions = json::array();
  for (std::size_t t = 0; t < plan.horizon(); ++t) {
    json a = json::array();
    json p = json::array();
    for (std::size_t j = 0; j < plan.numEffectors(); ++j) {
      a.push_back(plan.active(t, j) ? 1 : 0);
      const Vec3& r = plan.position(t, j);
      p.push_back({r.x(), r.y(), r.z()});
    }
    active.push_back(std::move(a));
    positions.push_back(std::move(p));
  }
  return {{"horizon", plan.horizon()}, {"n_eff", plan.numEffectors()}, {"dt", plan.dt()},
          {"active", std::move(active)}, {"positions", std::move(positions)}};
}

}  // namespace biconvex_mpc
