/**
 * @file biconmp.cpp
 * @brief Command-line driver: one-shot solves, closed-loop runs, gait plans and sweeps.
 *
 * Exit codes: 0 success (converged), 2 solve finished without converging, 1 error.
 */
#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "biconvex_mpc/bench.hpp"
#include "biconvex_mpc/problem_io.hpp"
#include "biconvex_mpc/scenario.hpp"

using namespace biconvex_mpc;
namespace fs = std::filesystem;

namespace {

struct Options {
  std::string scenario;
  std::string out = ".";
  std::optional<std::uint64_t> seed;
  std::string mode = "solve";
  std::optional<double> rho;
  std::optional<double> eps_dyn;
  std::optional<int> max_iter;
  std::optional<double> replan_hz;
  bool sequential = false;
};

bool trace_enabled() {
  const char* v = std::getenv("BICONMP_TRACE");
  return v && std::string(v) == "1";
}

std::ofstream open_out(const Options& opt, const std::string& name) {
  std::ofstream f(fs::path(opt.out) / name);
  if (!f) throw std::runtime_error("cannot write " + (fs::path(opt.out) / name).string());
  return f;
}

void apply_overrides(const Options& opt, AdmmConfig& admm) {
  if (opt.rho) admm.rho = *opt.rho;
  if (opt.eps_dyn) admm.eps_dyn = *opt.eps_dyn;
  if (opt.max_iter) admm.max_iter = *opt.max_iter;
}

Scenario scenario_with_overrides(const Options& opt, const nlohmann::json& doc) {
  Scenario sc = scenario_from_json(doc);
  apply_overrides(opt, sc.admm);
  if (opt.replan_hz) sc.mpc.replan_hz = *opt.replan_hz;
  if (opt.sequential) sc.mpc.sequential = true;
  if (opt.seed) sc.seed = *opt.seed;
  sc.validate();
  return sc;
}

void write_trajectory(const ProblemSpec& spec, const AdmmResult& res, std::ostream& out) {
  const std::size_t N = spec.numEffectors();
  out << "knot,t,cx,cy,cz,vx,vy,vz,kx,ky,kz";
  for (std::size_t j = 0; j < N; ++j) out << ",f" << j << "x,f" << j << "y,f" << j << "z";
  out << '\n';
  for (std::size_t s = 0; s <= spec.horizon(); ++s) {
    out << s << ',' << format_number(static_cast<double>(s) * spec.dt());
    const CentroidalState x = res.X.knot(s);
    for (const Vec3* v : {&x.c, &x.cdot, &x.k})
      for (int i = 0; i < 3; ++i) out << ',' << format_number((*v)[i]);
    // No force acts at the terminal knot.
    for (std::size_t j = 0; j < N; ++j)
      for (int i = 0; i < 3; ++i)
        out << ',' << (s < spec.horizon() ? format_number(res.F.force(s, j)[i]) : std::string("0"));
    out << '\n';
  }
}

int cmd_solve(const Options& opt, const nlohmann::json& doc) {
  ProblemSpec spec;
  AdmmConfig admm;
  if (doc.contains("plan")) {
    spec = problem_from_json(doc);
  } else {
    const Scenario sc = scenario_with_overrides(opt, doc);
    admm = sc.admm;
    CentroidalState x0 = sc.initialState();
    if (!sc.initial_state) x0.cdot = sc.nominal.v_des;
    spec = sc.builder.build(sc.horizonGait(), sc.nominal, 0.0, x0);
  }
  apply_overrides(opt, admm);
  spec.validate();

  AdmmSolver solver(admm);
  if (trace_enabled())
    solver.on_iteration = [](const AdmmIterationRecord& r) { std::cerr << trace_json_line(r) << '\n'; };
  const AdmmResult res = solver.solve(spec);

  auto traj = open_out(opt, "trajectory.csv");
  write_trajectory(spec, res, traj);
  auto trace = open_out(opt, "trace.jsonl");
  for (const auto& r : res.trace) trace << trace_json_line(r) << '\n';
  nlohmann::json summary;
  summary["converged"] = res.converged;
  summary["iterations"] = res.iterations;
  summary["violation"] = res.violations.empty() ? 0.0 : res.violations[static_cast<std::size_t>(res.best_iteration)];
  summary["objective"] = res.objective;
  summary["knots"] = spec.horizon();
  open_out(opt, "summary.json") << summary.dump(2) << '\n';
  std::cout << "converged=" << (res.converged ? "true" : "false") << " iterations=" << res.iterations
            << " violation=" << format_number(summary["violation"].get<double>()) << '\n';
  return res.converged ? 0 : 2;
}

int cmd_mpc(const Options& opt, const nlohmann::json& doc) {
  const Scenario sc = scenario_with_overrides(opt, doc);
  const SimLog log = run_closed_loop(sc);
  auto csv = open_out(opt, "sim.csv");
  write_sim_csv(log, csv);
  open_out(opt, "summary.json") << sim_summary_json(log) << '\n';
  if (trace_enabled()) {
    auto trace = open_out(opt, "replans.jsonl");
    for (const auto& r : log.replans) {
      nlohmann::json j = {{"t", r.t},         {"violation", r.violation}, {"solve_us", r.solve_us},
                          {"lag_s", r.lag_s}, {"cost", r.cost},           {"iterations", r.iterations},
                          {"converged", r.converged}, {"failed", r.failed}};
      if (r.failed) j["error"] = r.error;
      trace << j.dump() << '\n';
    }
  }
  std::cout << sim_summary_json(log) << '\n';
  if (log.aborted) {
    std::cerr << "aborted: " << log.diagnostic << '\n';
    return 1;
  }
  return 0;
}

int cmd_gait(const Options& opt, const nlohmann::json& doc) {
  const Scenario sc = scenario_with_overrides(opt, doc);
  const ProblemSpec spec = sc.builder.build(sc.horizonGait(), sc.nominal, 0.0, sc.initialState());
  nlohmann::json j = contact_plan_to_json(spec.plan);
  j["gait"] = sc.gait.name;
  open_out(opt, "contact_plan.json") << j.dump(2) << '\n';
  for (std::size_t t = 0; t < spec.horizon(); ++t) {
    std::cout << t << ' ';
    for (std::size_t e = 0; e < spec.numEffectors(); ++e) std::cout << (spec.plan.active(t, e) ? '#' : '.');
    std::cout << '\n';
  }
  return 0;
}

int cmd_bench_knots(const Options& opt, const nlohmann::json& doc) {
  const Scenario sc = scenario_with_overrides(opt, doc);
  const StatePerturbation range;
  std::vector<std::size_t> knots;
  for (std::size_t k = 10; k <= 140; k += 10) knots.push_back(k);
  const auto rows = bench_knots(sc, knots, 20, sc.seed, range);
  auto csv = open_out(opt, "bench_knots.csv");
  csv << "# gait=" << sc.gait.name << " runs=20 timing=min-of-3 seed=" << sc.seed << " perturbation: position +-"
      << format_number(range.position) << " m, velocity +-" << format_number(range.velocity)
      << " m/s, momentum +-" << format_number(range.momentum) << " kg m^2/s\n";
  write_knot_csv(rows, csv);
  write_knot_csv(rows, std::cout);
  return 0;
}

int cmd_bench_freq(const Options& opt, const nlohmann::json& doc) {
  const Scenario sc = scenario_with_overrides(opt, doc);
  const auto rows = bench_freq(sc, {2.0, 5.0, 7.0, 10.0, 20.0, 40.0});
  auto csv = open_out(opt, "bench_freq.csv");
  write_freq_csv(rows, csv);
  write_freq_csv(rows, std::cout);
  for (const auto& r : rows)
    if (!r.aborted) return 0;
  std::cerr << "every run aborted\n";
  return 1;
}

int cmd_bench_push(const Options& opt, const nlohmann::json& doc) {
  const Scenario sc = scenario_with_overrides(opt, doc);
  const auto rows = bench_push(sc, {5.0, 10.0, 20.0, 40.0, 50.0, 100.0});
  auto csv = open_out(opt, "bench_push.csv");
  write_push_csv(rows, csv);
  write_push_csv(rows, std::cout);
  for (const auto& r : rows)
    if (!std::isnan(r.max_push)) return 0;
  std::cerr << "no frequency survived the unperturbed run\n";
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Biconvex centroidal MPC: solves, closed-loop runs and sweeps"};
  Options opt;
  app.add_option("--scenario", opt.scenario, "Scenario or problem JSON")->required()->check(CLI::ExistingFile);
  app.add_option("--out", opt.out, "Output directory");
  app.add_option("--seed", opt.seed, "Random seed (overrides the scenario)");
  app.add_option("--mode", opt.mode, "Command")
      ->check(CLI::IsMember({"solve", "mpc", "gait", "bench-knots", "bench-freq", "bench-push"}));
  app.add_option("--rho", opt.rho, "ADMM penalty");
  app.add_option("--eps-dyn", opt.eps_dyn, "Dynamics violation threshold");
  app.add_option("--max-iter", opt.max_iter, "ADMM iteration limit");
  app.add_option("--replan-hz", opt.replan_hz, "Re-planning frequency");
  app.add_flag("--sequential", opt.sequential, "Freeze simulated time while solving");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    fs::create_directories(opt.out);
    const nlohmann::json doc = read_json_file(opt.scenario);
    if (opt.mode == "solve") return cmd_solve(opt, doc);
    if (opt.mode == "mpc") return cmd_mpc(opt, doc);
    if (opt.mode == "gait") return cmd_gait(opt, doc);
    if (opt.mode == "bench-knots") return cmd_bench_knots(opt, doc);
    if (opt.mode == "bench-freq") return cmd_bench_freq(opt, doc);
    return cmd_bench_push(opt, doc);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
