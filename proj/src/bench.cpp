#include "biconvex_mpc/bench.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>

namespace biconvex_mpc {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

Disturbance pushTemplate(const Scenario& sc) {
  if (!sc.disturbances.empty()) return sc.disturbances.front();
  return Disturbance::planar(1.0, 0.3, 1.0, 90.0);
}

}  // namespace

std::vector<KnotBenchRow> bench_knots(const Scenario& sc, const std::vector<std::size_t>& knot_counts, int runs,
                                      std::uint64_t seed, const StatePerturbation& range, int repeats) {
  if (repeats < 1) throw std::invalid_argument("bench_knots: repeats must be >= 1");
  std::mt19937_64 rng(seed);
  CentroidalState base = sc.initialState();
  base.cdot = sc.nominal.v_des;
  std::vector<KnotBenchRow> rows;
  for (const std::size_t knots : knot_counts) {
    GaitParams gait = sc.gait;
    gait.n_knots = knots;
    AdmmSolver solver(sc.admm);
    KnotBenchRow row;
    row.knots = knots;
    row.runs = runs;
    std::vector<double> times;
    double violation_sum = 0.0;
    for (int r = 0; r < runs; ++r) {
      const ProblemSpec spec = sc.builder.build(gait, sc.nominal, 0.0, perturbed_state(base, rng, range));
      AdmmResult res;
      double best = std::numeric_limits<double>::infinity();
      for (int rep = 0; rep < repeats; ++rep) {
        solver.resetLineSearchCache();
        const auto start = std::chrono::steady_clock::now();
        res = solver.solve(spec);
        best = std::min(best, std::chrono::duration<double, std::micro>(std::chrono::steady_clock::now() - start).count());
      }
      times.push_back(best);
      if (res.converged) {
        ++row.converged;
        violation_sum += res.violations[static_cast<std::size_t>(res.best_iteration)];
      }
    }
    double sum = 0.0;
    for (double t : times) sum += t;
    row.mean_us = sum / static_cast<double>(times.size());
    double sq = 0.0;
    for (double t : times) sq += (t - row.mean_us) * (t - row.mean_us);
    row.std_us = times.size() > 1 ? std::sqrt(sq / static_cast<double>(times.size() - 1)) : 0.0;
    row.mean_violation = row.converged > 0 ? violation_sum / row.converged : kNaN;
    rows.push_back(row);
  }
  return rows;
}

std::vector<FreqBenchRow> bench_freq(const Scenario& sc, const std::vector<double>& frequencies) {
  std::vector<FreqBenchRow> rows;
  for (const double hz : frequencies) {
    Scenario run = sc;
    run.mpc.replan_hz = hz;
    FreqBenchRow row;
    row.replan_hz = hz;
    try {
      const SimLog log = run_closed_loop(run);
      row.aborted = log.aborted;
      row.replans = static_cast<int>(log.replans.size());
      row.mean_cost = log.aborted ? kNaN : mpc_cost_metric(log);
      row.mean_violation = mean_violation(log);
      row.tracking_rmse = tracking_rmse(log);
    } catch (const std::exception&) {
      row.aborted = true;
      row.mean_cost = row.mean_violation = row.tracking_rmse = kNaN;
    }
    rows.push_back(row);
  }
  return rows;
}

double max_recoverable_push(const Scenario& sc, double replan_hz, const PushSearch& search) {
  const Disturbance shape = pushTemplate(sc);
  const double norm = shape.force.head<2>().norm();
  const double direction = norm > 0.0 ? std::atan2(shape.force.y(), shape.force.x()) * 180.0 / std::numbers::pi : 90.0;
  auto survives = [&](double magnitude) {
    Scenario run = sc;
    run.mpc.replan_hz = replan_hz;
    run.disturbances = {Disturbance::planar(shape.start, shape.duration, magnitude, direction)};
    try {
      return recovered(run_closed_loop(run), run);
    } catch (const std::exception&) {
      return false;
    }
  };
  if (!survives(0.0)) return kNaN;
  if (survives(search.upper)) return search.upper;
  double lo = 0.0, hi = search.upper;
  while (hi - lo > search.tolerance) {
    const double mid = 0.5 * (lo + hi);
    (survives(mid) ? lo : hi) = mid;
  }
  return lo;
}

std::vector<PushBenchRow> bench_push(const Scenario& sc, const std::vector<double>& frequencies,
                                     const PushSearch& search) {
  std::vector<PushBenchRow> rows;
  for (const double hz : frequencies) rows.push_back({hz, max_recoverable_push(sc, hz, search)});
  return rows;
}

void write_knot_csv(const std::vector<KnotBenchRow>& rows, std::ostream& out) {
  out << "knots,mean_us,std_us,mean_violation\n";
  for (const auto& r : rows)
    out << r.knots << ',' << format_number(r.mean_us) << ',' << format_number(r.std_us) << ','
        << format_number(r.mean_violation) << '\n';
}

void write_freq_csv(const std::vector<FreqBenchRow>& rows, std::ostream& out) {
  out << "replan_hz,mean_cost,mean_violation,tracking_rmse,replans\n";
  for (const auto& r : rows)
    out << format_number(r.replan_hz) << ',' << format_number(r.mean_cost) << ',' << format_number(r.mean_violation)
        << ',' << format_number(r.tracking_rmse) << ',' << r.replans << '\n';
}

void write_push_csv(const std::vector<PushBenchRow>& rows, std::ostream& out) {
  out << "replan_hz,max_push_n\n";
  for (const auto& r : rows) out << format_number(r.replan_hz) << ',' << format_number(r.max_push) << '\n';
}

}  // namespace biconvex_mpc
