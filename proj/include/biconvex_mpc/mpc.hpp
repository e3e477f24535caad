/**
 * @file mpc.hpp
 * @brief Closed-loop MPC harness on the centroidal point-mass plant.
 *
 * The plant integrates the same explicit-Euler centroidal dynamics as the
 * optimizer, at control rate, under forces interpolated from the latest plan
 * plus any active disturbance. Re-planning happens at replan_hz with a moving
 * horizon and optionally delayed by a plan-lag model that skips the part of the plan consumed while solving.
 */
#pragma once

#include <limits>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "biconvex_mpc/admm.hpp"
#include "biconvex_mpc/gait.hpp"
#include "biconvex_mpc/problem_builder.hpp"

namespace biconvex_mpc {

enum class LagKind { None, Fixed, Measured };

struct LagModel {
  LagKind kind = LagKind::None;
  double fixed_ms = 0.0;
};

struct MpcConfig {
  double replan_hz = 20.0;
  double control_hz = 1000.0;
  /// 0 keeps the gait's own n_knots.
  std::size_t horizon_knots = 0;
  LagModel lag;
  double scenario_duration = 2.0;
  /// Freeze simulated time while solving. When false the solve runs on a
  /// worker thread and the plant keeps integrating in real time.
  bool sequential = true;
  /// Seed each solve with the previous solution shifted by the elapsed knots.
  /// Off by default: the shifted iterate already meets eps_dyn, so ADMM stops
  /// after one pass with a plan that is feasible but far from optimal.
  bool warm_start = false;

  void validate(double knot_dt, std::size_t knots) const;
};

struct Disturbance {
  double start = 0.0;
  double duration = 0.2;
  Vec3 force = Vec3::Zero();
  /// Application point relative to the CoM; nonzero adds a moment.
  Vec3 offset = Vec3::Zero();

  bool activeAt(double t) const { return t >= start && t < start + duration; }
  void validate() const;
  /// Horizontal push of the given magnitude at direction_deg from +x.
  static Disturbance planar(double start, double duration, double magnitude, double direction_deg);
};

/// Piecewise-constant desired velocity: the command with the latest start <= t.
struct VelocityCommand {
  double start = 0.0;
  Vec3 v_des = Vec3::Zero();
};

/// Failure test for push-recovery runs. The point mass has no legs, so a fall
/// is declared when the CoM gets further than max_support_offset (horizontal)
/// from the centroid of the loaded contacts, drops by more than
/// max_height_drop, or has not settled to the command by the end of the run.
struct RecoveryCriteria {
  double max_support_offset = 0.2;
  double max_height_drop = 0.1;
  double max_final_speed_error = 0.25;
  double settle_window = 0.5;
};

/// Everything needed for one closed-loop run.
struct Scenario {
  ProblemBuilder builder;
  GaitParams gait = GaitParams::trot();
  NominalSpec nominal;
  MpcConfig mpc;
  AdmmConfig admm;
  std::vector<Disturbance> disturbances;
  /// Empty means nominal.v_des throughout.
  std::vector<VelocityCommand> commands;
  std::optional<CentroidalState> initial_state;
  RecoveryCriteria recovery;
  std::uint64_t seed = 0;

  /// Gait with the MPC horizon applied.
  GaitParams horizonGait() const;
  Vec3 commandAt(double t) const;
  CentroidalState initialState() const;
  void validate() const;
};

/// A solved plan with its time origin advanced by `offset` seconds.
struct TimedPlan {
  ForcePlan forces;
  ContactPlan contacts;
  double offset = 0.0;

  double duration() const { return static_cast<double>(contacts.horizon()) * contacts.dt(); }
};

struct InterpolatedForces {
  std::vector<EffectorInput> effectors;
  /// True when the query fell past the end of the plan (last knot held).
  bool exhausted = false;
};

/// Piecewise-linear force at t_since_plan; inactive knots count as zero, so a
/// flight-to-stance transition ramps from zero up to the first stance value.
InterpolatedForces interpolate_forces(const TimedPlan& plan, double t_since_plan);

/// Advances the plan's time origin by solve_time. Throws if the lag reaches the horizon.
TimedPlan apply_plan_lag(TimedPlan plan, double solve_time);

/// Previous solution shifted forward by `knots`, padded by replicating the last knot.
AdmmInit shift_solution(const StateTrajectory& X, const ForcePlan& F, const Vector& P, std::size_t knots);

/// Latest complete plan, swapped atomically between the planner and controller.
class PlanSlot {
 public:
  struct Entry {
    TimedPlan plan;
    double activation_time = 0.0;
  };
  void publish(std::shared_ptr<const Entry> entry);
  std::shared_ptr<const Entry> read() const;

 private:
  mutable std::mutex mutex_;
  std::shared_ptr<const Entry> entry_;
};

struct ReplanRecord {
  double t = 0.0;
  double violation = 0.0;
  double solve_us = 0.0;
  double lag_s = 0.0;
  double cost = 0.0;
  int iterations = 0;
  bool converged = false;
  bool failed = false;
  std::string error;
};

struct SimRow {
  double t = 0.0;
  CentroidalState state;
  std::vector<Vec3> forces;
  Vec3 v_des = Vec3::Zero();
  /// Centroid of the contacts applying force this tick; NaN during flight.
  Vec3 support_center = Vec3::Constant(std::numeric_limits<double>::quiet_NaN());
  double violation = 0.0;
  double solve_us = 0.0;
  double lag_us = 0.0;
  double cost = 0.0;
};

struct SimLog {
  std::size_t n_eff = 0;
  bool sequential = true;
  std::vector<SimRow> rows;
  std::vector<ReplanRecord> replans;
  bool aborted = false;
  std::string diagnostic;
  int solver_failures = 0;
  int exhausted_ticks = 0;
};

/// Runs the scenario for mpc.scenario_duration; one log row per control tick.
SimLog run_closed_loop(const Scenario& scenario);

/// Mean over successful re-plans of Phi(X) + Phi(F). Throws on an empty log.
double mpc_cost_metric(const SimLog& log);

double mean_violation(const SimLog& log);
/// RMS of the horizontal velocity error over rows with start <= t < end.
double tracking_rmse(const SimLog& log, double start = 0.0, double end = 1e300);
/// Mean norm of the horizontal velocity error over [start, end).
double mean_velocity_error(const SimLog& log, double start, double end);
double max_solve_us(const SimLog& log);
bool recovered(const SimLog& log, const Scenario& scenario);

/// Header plus one row per tick. In sequential mode the solve_us column holds
/// the plan lag applied in simulation so identical runs give identical bytes.
void write_sim_csv(const SimLog& log, std::ostream& out);
std::string sim_summary_json(const SimLog& log);

/// Shortest round-trip decimal representation, independent of locale.
std::string format_number(double v);

}  // namespace biconvex_mpc
