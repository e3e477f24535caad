/**
 * @file bench.hpp
 * @brief Parameter sweeps: solve time vs horizon length, closed-loop cost vs
 *        re-planning frequency, and maximum recoverable push vs frequency.
 */
#pragma once

#include <cstdint>
#include <ostream>
#include <vector>

#include "biconvex_mpc/mpc.hpp"

namespace biconvex_mpc {

struct KnotBenchRow {
  std::size_t knots = 0;
  double mean_us = 0.0;
  double std_us = 0.0;
  /// Mean final violation over the converged runs; NaN if none converged.
  double mean_violation = 0.0;
  int converged = 0;
  int runs = 0;
};

/// For every knot count, `runs` cold solves from states drawn around the
/// nominal (c at z_des, cdot = v_des) with the given perturbation. Each solve
/// is timed `repeats` times and the fastest is kept to suppress scheduler noise.
std::vector<KnotBenchRow> bench_knots(const Scenario& scenario, const std::vector<std::size_t>& knot_counts,
                                      int runs, std::uint64_t seed, const StatePerturbation& range = {},
                                      int repeats = 3);

struct FreqBenchRow {
  double replan_hz = 0.0;
  double mean_cost = 0.0;
  double mean_violation = 0.0;
  double tracking_rmse = 0.0;
  int replans = 0;
  bool aborted = false;
};

/// Closed-loop run per frequency; everything else as in the scenario.
std::vector<FreqBenchRow> bench_freq(const Scenario& scenario, const std::vector<double>& frequencies);

struct PushBenchRow {
  double replan_hz = 0.0;
  /// NaN when the run fails without any push.
  double max_push = 0.0;
};

struct PushSearch {
  double upper = 100.0;
  double tolerance = 0.5;
};

/// Bisection on the magnitude of the scenario's first disturbance (direction,
/// start and duration kept). Without one, a 0.3 s lateral push at t = 1 s.
double max_recoverable_push(const Scenario& scenario, double replan_hz, const PushSearch& search = {});
std::vector<PushBenchRow> bench_push(const Scenario& scenario, const std::vector<double>& frequencies,
                                     const PushSearch& search = {});

void write_knot_csv(const std::vector<KnotBenchRow>& rows, std::ostream& out);
void write_freq_csv(const std::vector<FreqBenchRow>& rows, std::ostream& out);
void write_push_csv(const std::vector<PushBenchRow>& rows, std::ostream& out);

}  // namespace biconvex_mpc
