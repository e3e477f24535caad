#include "biconvex_mpc/mpc.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <future>
#include <numbers>
#include <stdexcept>
#include <thread>

#include <json.hpp>

namespace biconvex_mpc {

namespace {

constexpr double kTimeEps = 1e-9;

using Clock = std::chrono::steady_clock;

struct SolveOutcome {
  ProblemSpec spec;
  AdmmResult result;
  double solve_us = 0.0;
  bool failed = false;
  std::string error;
};

std::size_t knotIndex(double tau, double dt) {
  return static_cast<std::size_t>(std::floor(tau / dt + kTimeEps));
}

std::vector<std::optional<Vec3>> feetInStance(const PlanSlot::Entry* entry, double t, std::size_t n_eff) {
  std::vector<std::optional<Vec3>> feet(n_eff);
  if (!entry) return feet;
  const ContactPlan& contacts = entry->plan.contacts;
  const double tau = t - entry->activation_time + entry->plan.offset;
  if (tau < 0.0) return feet;
  const std::size_t k = knotIndex(tau, contacts.dt());
  if (k >= contacts.horizon()) return feet;
  for (std::size_t j = 0; j < n_eff; ++j)
    if (contacts.active(k, j)) feet[j] = contacts.position(k, j);
  return feet;
}

}  // namespace

// ---------------------------------------------------------------- configuration

void MpcConfig::validate(double knot_dt, std::size_t knots) const {
  if (!(replan_hz > 0.0) || !(control_hz > 0.0)) throw std::invalid_argument("mpc: rates must be positive");
  if (control_hz < replan_hz) throw std::invalid_argument("mpc: control_hz must be >= replan_hz");
  if (!(scenario_duration > 0.0)) throw std::invalid_argument("mpc: scenario_duration must be positive");
  if (static_cast<double>(knots) * knot_dt <= 1.0 / replan_hz)
    throw std::invalid_argument("mpc: horizon (" + format_number(static_cast<double>(knots) * knot_dt) +
                                " s) must exceed the replan period (" + format_number(1.0 / replan_hz) + " s)");
  if (lag.kind == LagKind::Fixed && !(lag.fixed_ms >= 0.0)) throw std::invalid_argument("mpc: lag must be >= 0");
}

void Disturbance::validate() const {
  if (!(duration > 0.0)) throw std::invalid_argument("disturbance: duration must be positive");
  if (!force.allFinite() || !offset.allFinite()) throw std::invalid_argument("disturbance: non-finite force");
}

Disturbance Disturbance::planar(double start, double duration, double magnitude, double direction_deg) {
  const double a = direction_deg * std::numbers::pi / 180.0;
  Disturbance d;
  d.start = start;
  d.duration = duration;
  d.force = Vec3(magnitude * std::cos(a), magnitude * std::sin(a), 0.0);
  return d;
}

GaitParams Scenario::horizonGait() const {
  GaitParams g = gait;
  if (mpc.horizon_knots > 0) g.n_knots = mpc.horizon_knots;
  return g;
}

Vec3 Scenario::commandAt(double t) const {
  Vec3 v = nominal.v_des;
  double latest = -1e300;
  for (const auto& c : commands)
    if (c.start <= t + kTimeEps && c.start >= latest) {
      latest = c.start;
      v = c.v_des;
    }
  return v;
}

CentroidalState Scenario::initialState() const {
  if (initial_state) return *initial_state;
  CentroidalState s;
  s.c = Vec3(0.0, 0.0, nominal.z_des);
  return s;
}

void Scenario::validate() const {
  const GaitParams g = horizonGait();
  g.validate();
  nominal.validate();
  admm.validate();
  mpc.validate(g.dt, g.n_knots);
  for (const auto& d : disturbances) d.validate();
  if (g.phase_offsets.size() != builder.hips.size())
    throw std::invalid_argument("gait: phase_offsets must match the number of hips");
  if (!(builder.mass > 0.0)) throw std::invalid_argument("mass must be positive");
  if (!(builder.mu > 0.0)) throw std::invalid_argument("mu must be positive");
}

// ---------------------------------------------------------------- plan handling

InterpolatedForces interpolate_forces(const TimedPlan& plan, double t_since_plan) {
  const ContactPlan& contacts = plan.contacts;
  const std::size_t T = contacts.horizon();
  const std::size_t N = contacts.numEffectors();
  const double dt = contacts.dt();
  const double tau = std::max(0.0, t_since_plan + plan.offset);

  InterpolatedForces out;
  out.effectors.resize(N);
  out.exhausted = tau >= static_cast<double>(T) * dt - kTimeEps;

  std::size_t k = std::min(knotIndex(tau, dt), T - 1);
  const bool has_next = !out.exhausted && k + 1 < T;
  const double alpha = has_next ? std::clamp(tau / dt - static_cast<double>(k), 0.0, 1.0) : 0.0;

  for (std::size_t j = 0; j < N; ++j) {
    EffectorInput& e = out.effectors[j];
    const bool on_now = contacts.active(k, j);
    const bool on_next = has_next && contacts.active(k + 1, j);
    const Vec3 f_now = on_now ? Vec3(plan.forces.force(k, j)) : Vec3::Zero();
    const Vec3 f_next = on_next ? Vec3(plan.forces.force(k + 1, j)) : (has_next ? Vec3::Zero() : f_now);
    e.force = (1.0 - alpha) * f_now + alpha * f_next;
    e.active = on_now || (on_next && alpha > 0.0);
    e.position = on_now ? contacts.position(k, j) : (on_next ? contacts.position(k + 1, j) : contacts.position(k, j));
    if (!e.active) e.force.setZero();
  }
  return out;
}

TimedPlan apply_plan_lag(TimedPlan plan, double solve_time) {
  if (!(solve_time >= 0.0)) throw std::invalid_argument("plan lag must be nonnegative");
  if (plan.offset + solve_time >= plan.duration() - kTimeEps) throw std::invalid_argument("lag exceeds horizon");
  plan.offset += solve_time;
  return plan;
}

AdmmInit shift_solution(const StateTrajectory& X, const ForcePlan& F, const Vector& P, std::size_t knots) {
  const std::size_t T = X.horizon();
  if (F.horizon() != T || P.size() != static_cast<Eigen::Index>(kStateDim * T))
    throw std::invalid_argument("shift_solution: inconsistent dimensions");
  AdmmInit init{StateTrajectory(T, X.dt()), ForcePlan(T, F.numEffectors()), Vector(P.size())};
  for (std::size_t s = 0; s <= T; ++s) init.X.setKnot(s, X.knot(std::min(s + knots, T)));
  for (std::size_t t = 0; t < T; ++t) {
    const std::size_t src = std::min(t + knots, T - 1);
    for (std::size_t j = 0; j < F.numEffectors(); ++j) init.F.force(t, j) = F.force(src, j);
    init.P.segment<kStateDim>(static_cast<Eigen::Index>(kStateDim * t)) =
        P.segment<kStateDim>(static_cast<Eigen::Index>(kStateDim * src));
  }
  return init;
}

void PlanSlot::publish(std::shared_ptr<const Entry> entry) {
  std::lock_guard<std::mutex> lock(mutex_);
  entry_ = std::move(entry);
}

std::shared_ptr<const PlanSlot::Entry> PlanSlot::read() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return entry_;
}

// ---------------------------------------------------------------- closed loop

namespace {

class Replanner {
 public:
  explicit Replanner(const Scenario& sc) : sc_(sc), gait_(sc.horizonGait()), solver_(sc.admm) {}

  SolveOutcome solve(double t, const CentroidalState& state, const std::vector<std::optional<Vec3>>& feet) {
    SolveOutcome out;
    const auto start = Clock::now();
    try {
      NominalSpec nominal = sc_.nominal;
      nominal.v_des = sc_.commandAt(t);
      out.spec = sc_.builder.build(gait_, nominal, t, state, feet);
      std::optional<AdmmInit> init;
      if (sc_.mpc.warm_start && previous_) {
        const double elapsed = t - previous_t_;
        const auto shift = static_cast<std::size_t>(std::llround(std::max(0.0, elapsed) / gait_.dt));
        if (shift < gait_.n_knots) init = shift_solution(previous_->X, previous_->F, previous_->P, shift);
      }
      out.result = solver_.solve(out.spec, init);
      if (!out.result.X.data().allFinite() || !out.result.F.data().allFinite())
        throw std::runtime_error("non-finite solution");
      previous_ = out.result;
      previous_t_ = t;
    } catch (const std::exception& e) {
      out.failed = true;
      out.error = e.what();
    }
    out.solve_us = std::chrono::duration<double, std::micro>(Clock::now() - start).count();
    return out;
  }

 private:
  const Scenario& sc_;
  GaitParams gait_;
  AdmmSolver solver_;
  std::optional<AdmmResult> previous_;
  double previous_t_ = 0.0;
};

struct LoopState {
  SimLog log;
  int consecutive_failures = 0;
  double violation = 0.0;
  double solve_us = 0.0;
  double lag_us = 0.0;
  double cost = 0.0;
};

// Records the outcome; returns the entry to publish (null on failure).
std::shared_ptr<PlanSlot::Entry> absorb(LoopState& ls, SolveOutcome&& out, double t_sampled, double lag,
                                        double activation) {
  ReplanRecord rec;
  rec.t = t_sampled;
  rec.solve_us = out.solve_us;
  rec.lag_s = lag;
  std::shared_ptr<PlanSlot::Entry> entry;
  if (!out.failed) {
    try {
      TimedPlan plan{std::move(out.result.F), out.spec.plan, 0.0};
      entry = std::make_shared<PlanSlot::Entry>(PlanSlot::Entry{apply_plan_lag(std::move(plan), lag), activation});
    } catch (const std::exception& e) {
      out.failed = true;
      out.error = e.what();
    }
  }
  if (out.failed) {
    rec.failed = true;
    rec.error = out.error;
    ++ls.log.solver_failures;
    ++ls.consecutive_failures;
    if (ls.consecutive_failures > 3) {
      ls.log.aborted = true;
      ls.log.diagnostic = "solver failed " + std::to_string(ls.consecutive_failures) +
                          " consecutive cycles at t=" + format_number(t_sampled) + ": " + out.error;
    }
  } else {
    ls.consecutive_failures = 0;
    rec.violation = out.result.violations.empty() ? 0.0 : out.result.violations[static_cast<std::size_t>(out.result.best_iteration)];
    rec.cost = out.result.objective;
    rec.iterations = out.result.iterations;
    rec.converged = out.result.converged;
    ls.violation = rec.violation;
    ls.cost = rec.cost;
    ls.solve_us = out.solve_us;
    ls.lag_us = lag * 1e6;
  }
  ls.log.replans.push_back(std::move(rec));
  return entry;
}

double modeledLag(const MpcConfig& mpc, double measured_us) {
  switch (mpc.lag.kind) {
    case LagKind::Fixed:
      return mpc.lag.fixed_ms * 1e-3;
    case LagKind::Measured:
      return measured_us * 1e-6;
    case LagKind::None:
      break;
  }
  return 0.0;
}

}  // namespace

SimLog run_closed_loop(const Scenario& sc) {
  sc.validate();
  const std::size_t N = sc.builder.hips.size();
  const double dt_c = 1.0 / sc.mpc.control_hz;
  const auto ticks = static_cast<std::size_t>(std::llround(sc.mpc.scenario_duration * sc.mpc.control_hz));

  LoopState ls;
  ls.log.n_eff = N;
  ls.log.sequential = sc.mpc.sequential;
  ls.log.rows.reserve(ticks);

  Replanner planner(sc);
  PlanSlot slot;
  std::shared_ptr<PlanSlot::Entry> pending;
  std::future<SolveOutcome> inflight;
  double inflight_t = 0.0;
  std::size_t next_replan = 0;
  CentroidalState state = sc.initialState();
  const auto wall_start = Clock::now();

  for (std::size_t i = 0; i < ticks && !ls.log.aborted; ++i) {
    const double t = static_cast<double>(i) * dt_c;
    const bool due = t + kTimeEps >= static_cast<double>(next_replan) / sc.mpc.replan_hz;

    if (sc.mpc.sequential) {
      if (due) {
        ++next_replan;
        const auto current = slot.read();
        SolveOutcome out = planner.solve(t, state, feetInStance(current.get(), t, N));
        const double lag = modeledLag(sc.mpc, out.solve_us);
        auto entry = absorb(ls, std::move(out), t, lag, t + lag);
        if (entry) pending = std::move(entry);
      }
    } else {
      std::this_thread::sleep_until(wall_start + std::chrono::duration_cast<Clock::duration>(
                                                     std::chrono::duration<double>(t)));
      if (inflight.valid() && inflight.wait_for(std::chrono::seconds(0)) == std::future_status::ready) {
        SolveOutcome out = inflight.get();
        const double lag = std::max(t - inflight_t, modeledLag(sc.mpc, out.solve_us));
        auto entry = absorb(ls, std::move(out), inflight_t, lag, inflight_t + lag);
        if (entry) pending = std::move(entry);
      }
      if (due && !inflight.valid()) {
        ++next_replan;
        const auto current = slot.read();
        inflight_t = t;
        inflight = std::async(std::launch::async, [&planner, t, state, feet = feetInStance(current.get(), t, N)] {
          return planner.solve(t, state, feet);
        });
      } else if (due) {
        ++next_replan;  // planner busy: this tick is skipped
      }
    }
    if (ls.log.aborted) break;
    if (pending && t + kTimeEps >= pending->activation_time) {
      slot.publish(std::move(pending));
      pending.reset();
    }

    const auto entry = slot.read();
    std::vector<EffectorInput> inputs(N);
    if (entry) {
      InterpolatedForces f = interpolate_forces(entry->plan, t - entry->activation_time);
      if (f.exhausted) ++ls.log.exhausted_ticks;
      inputs = std::move(f.effectors);
    }

    SimRow row;
    row.t = t;
    row.state = state;
    row.forces.resize(N);
    Vec3 support = Vec3::Zero();
    int n_support = 0;
    for (std::size_t j = 0; j < N; ++j) {
      row.forces[j] = inputs[j].force;
      if (inputs[j].active) {
        support += inputs[j].position;
        ++n_support;
      }
    }
    if (n_support > 0) row.support_center = support / n_support;
    row.v_des = sc.commandAt(t);
    row.violation = ls.violation;
    row.solve_us = ls.solve_us;
    row.lag_us = ls.lag_us;
    row.cost = ls.cost;
    ls.log.rows.push_back(std::move(row));

    for (const auto& d : sc.disturbances)
      if (d.activeAt(t)) inputs.push_back({d.force, state.c + d.offset, true});
    try {
      state = integrate_step(state, inputs, sc.builder.mass, sc.builder.gravity, dt_c);
    } catch (const std::exception& e) {
      ls.log.aborted = true;
      ls.log.diagnostic = std::string("plant: ") + e.what() + " at t=" + format_number(t);
    }
  }
  if (inflight.valid()) inflight.wait();
  return std::move(ls.log);
}

// ---------------------------------------------------------------- metrics

double mpc_cost_metric(const SimLog& log) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& r : log.replans)
    if (!r.failed) {
      sum += r.cost;
      ++n;
    }
  if (n == 0) throw std::invalid_argument("mpc_cost_metric: no successful re-plans in log");
  return sum / static_cast<double>(n);
}

double mean_violation(const SimLog& log) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& r : log.replans)
    if (!r.failed) {
      sum += r.violation;
      ++n;
    }
  return n ? sum / static_cast<double>(n) : std::numeric_limits<double>::quiet_NaN();
}

double tracking_rmse(const SimLog& log, double start, double end) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& row : log.rows) {
    if (row.t < start || row.t >= end) continue;
    sum += (row.state.cdot - row.v_des).head<2>().squaredNorm();
    ++n;
  }
  return n ? std::sqrt(sum / static_cast<double>(n)) : std::numeric_limits<double>::quiet_NaN();
}

double mean_velocity_error(const SimLog& log, double start, double end) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& row : log.rows) {
    if (row.t < start || row.t >= end) continue;
    sum += (row.state.cdot - row.v_des).head<2>().norm();
    ++n;
  }
  return n ? sum / static_cast<double>(n) : std::numeric_limits<double>::quiet_NaN();
}

double max_solve_us(const SimLog& log) {
  double m = 0.0;
  for (const auto& r : log.replans) m = std::max(m, r.solve_us);
  return m;
}

bool recovered(const SimLog& log, const Scenario& sc) {
  if (log.aborted || log.rows.empty()) return false;
  const RecoveryCriteria& rc = sc.recovery;
  for (const auto& row : log.rows) {
    if (!row.state.isFinite() || sc.nominal.z_des - row.state.c.z() > rc.max_height_drop) return false;
    if (row.support_center.allFinite() &&
        (row.state.c - row.support_center).head<2>().norm() > rc.max_support_offset)
      return false;
  }
  const double end = log.rows.back().t + 1e-12;
  return mean_velocity_error(log, end - rc.settle_window, end + 1.0) <= rc.max_final_speed_error;
}

// ---------------------------------------------------------------- output

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void write_sim_csv(const SimLog& log, std::ostream& out) {
  out << "t,cx,cy,cz,vx,vy,vz,kx,ky,kz";
  for (std::size_t j = 0; j < log.n_eff; ++j) out << ",f" << j << "x,f" << j << "y,f" << j << "z";
  out << ",vdesx,vdesy,vdesz,violation,solve_us,cost\n";
  std::string line;
  for (const auto& row : log.rows) {
    line.clear();
    auto put = [&line](double v) {
      if (!line.empty()) line += ',';
      line += format_number(v);
    };
    put(row.t);
    for (const Vec3* v : {&row.state.c, &row.state.cdot, &row.state.k})
      for (int i = 0; i < 3; ++i) put((*v)[i]);
    for (const auto& f : row.forces)
      for (int i = 0; i < 3; ++i) put(f[i]);
    for (int i = 0; i < 3; ++i) put(row.v_des[i]);
    put(row.violation);
    put(log.sequential ? row.lag_us : row.solve_us);
    put(row.cost);
    out << line << '\n';
  }
}

std::string sim_summary_json(const SimLog& log) {
  nlohmann::json j;
  auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
  j["mean_cost"] = num(log.replans.empty() ? std::numeric_limits<double>::quiet_NaN() : [&] {
    try {
      return mpc_cost_metric(log);
    } catch (const std::exception&) {
      return std::numeric_limits<double>::quiet_NaN();
    }
  }());
  j["mean_violation"] = num(mean_violation(log));
  j["tracking_rmse"] = num(tracking_rmse(log));
  j["max_solve_us"] = max_solve_us(log);
  j["replans"] = log.replans.size();
  j["solver_failures"] = log.solver_failures;
  j["aborted"] = log.aborted;
  if (!log.diagnostic.empty()) j["diagnostic"] = log.diagnostic;
  return j.dump(2);
}

}  // namespace biconvex_mpc
