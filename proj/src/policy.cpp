#include "pmpc/policy.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <ostream>
#include <stdexcept>

namespace pmpc {

const char* policy_name(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::Rmpc: return "rmpc";
    case PolicyKind::Ep: return "ep";
    case PolicyKind::Pmpc: return "pmpc";
  }
  return "?";
}

PolicyKind parse_policy(const std::string& name) {
  if (name == "rmpc") return PolicyKind::Rmpc;
  if (name == "ep") return PolicyKind::Ep;
  if (name == "pmpc") return PolicyKind::Pmpc;
  throw std::invalid_argument("unknown policy: " + name);
}

const char* termination_name(Termination t) {
  switch (t) {
    case Termination::GoalReached: return "goal";
    case Termination::Collision: return "collision";
    case Termination::Timeout: return "timeout";
    case Termination::SolverFailure: return "solver_failure";
  }
  return "?";
}

MPCProblem make_context_problem(const PlannerSettings& settings,
                                std::shared_ptr<const DistanceField> field, const State& goal,
                                const ResidualQuadratic* residual) {
  StaticCostConfig cost = settings.cost;
  cost.goal = {goal.px, goal.py};
  cost.goal_heading = goal.phi;
  MPCProblem p;
  p.horizon = settings.horizon;
  p.x0 = State{};
  p.dt = settings.dynamics.dt;
  p.dynamics = DynamicsModel::differential_drive(settings.dynamics);
  std::optional<ResidualQuadratic> res;
  if (residual != nullptr) res = *residual;
  p.cost = std::make_shared<NavigationCost>(cost, std::move(field), settings.horizon, std::move(res));
  return p;
}

void Policy::validate() const {
  if (kind == PolicyKind::Rmpc) return;
  if (!model) throw std::invalid_argument("policy: learned policy needs a model");
  if (params.size() != model->param_count()) throw std::invalid_argument("policy: parameter count mismatch");
  const int want = kind == PolicyKind::Ep ? 3 : kEmbeddingDim;
  if (model->config().output_dim != want)
    throw std::invalid_argument(std::string("policy: wrong readout size for ") + policy_name(kind));
}

namespace {

bool failed(const MPCSolution& sol) {
  return sol.status == SolveStatus::NumericalFailure || !std::isfinite(sol.cost);
}

std::vector<Control> initial_controls(const std::vector<Control>* warm, int horizon) {
  if (warm != nullptr && warm->size() == static_cast<std::size_t>(horizon)) return *warm;
  return std::vector<Control>(static_cast<std::size_t>(horizon));
}

void shift(std::vector<Control>& u) {
  if (u.empty()) return;
  std::rotate(u.begin(), u.begin() + 1, u.end());
  u.back() = u[u.size() >= 2 ? u.size() - 2 : 0];
}

}  // namespace

Reference plan_reference(const Policy& policy, const Context& ctx,
                         std::shared_ptr<const DistanceField> ctx_field, const State& goal,
                         std::vector<Control>* warm) {
  Reference ref;
  if (policy.kind == PolicyKind::Ep) {
    const Eigen::VectorXd out = policy.model->forward(image_from_grid(ctx.grid), policy.params);
    ref.goal_only = true;
    ref.states.push_back(State{out[0], out[1], out[2]});
    return ref;
  }
  std::optional<ResidualQuadratic> residual;
  if (policy.kind == PolicyKind::Pmpc) {
    const Eigen::VectorXd e = policy.model->forward(image_from_grid(ctx.grid), policy.params);
    residual = embed_to_quadratic(std::span<const double>(e.data(), static_cast<std::size_t>(e.size())));
  }
  const MPCProblem problem = make_context_problem(policy.settings, std::move(ctx_field), goal,
                                                  residual ? &*residual : nullptr);
  const auto u0 = initial_controls(warm, problem.horizon);
  const MPCSolution sol = solve(problem, u0, policy.settings.solver);
  ref.failed = failed(sol);
  ref.states = sol.trajectory.states;
  ref.controls = sol.trajectory.controls;
  if (warm != nullptr) *warm = sol.trajectory.controls;
  return ref;
}

TrackingResult tracking_mpc(const Reference& ref, std::shared_ptr<const DistanceField> ctx_field,
                            const PlannerSettings& settings, std::span<const Control> warm) {
  if (ref.states.empty()) throw std::invalid_argument("tracking_mpc: empty reference");
  const std::size_t idx =
      ref.goal_only ? 0 : std::min(static_cast<std::size_t>(settings.horizon), ref.states.size() - 1);
  const MPCProblem problem = make_context_problem(settings, std::move(ctx_field), ref.states[idx]);
  std::vector<Control> u0(static_cast<std::size_t>(problem.horizon));
  if (warm.size() == u0.size()) std::copy(warm.begin(), warm.end(), u0.begin());
  const MPCSolution sol = solve(problem, u0, settings.tracking_solver);
  TrackingResult out;
  if (failed(sol)) {
    out.failed = true;
    return out;
  }
  out.controls = sol.trajectory.controls;
  out.u = clamp_control(sol.trajectory.controls.front(), settings.dynamics);
  return out;
}

double pose_clearance(const DistanceField& field, const State& x, const StaticCostConfig& cost) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& offset : cost.collision_points)
    best = std::min(best, signed_distance(field, to_world(offset, x)).distance);
  return best;
}

EpisodeResult run_episode(const OccupancyGrid& world, const Policy& policy, const State& start,
                          const State& goal, const EpisodeConfig& cfg) {
  policy.validate();
  const DistanceField world_field = distance_field(world);
  const auto& settings = policy.settings;
  EpisodeResult res;
  res.trajectory.dt = settings.dynamics.dt;
  res.trajectory.states.push_back(start);
  res.min_clearance = pose_clearance(world_field, start, settings.cost);
  State x = start;
  std::vector<Control> warm_plan, warm_track;
  for (;;) {
    if (std::hypot(x.px - goal.px, x.py - goal.py) < cfg.success_radius) {
      res.success = true;
      res.reason = Termination::GoalReached;
      break;
    }
    if (res.steps >= cfg.max_steps) {
      res.reason = Termination::Timeout;
      break;
    }
    const Context ctx = crop_context(world, x);
    const auto field = std::make_shared<const DistanceField>(distance_field(ctx.grid));
    const Reference ref = plan_reference(policy, ctx, field, to_local(goal, x), &warm_plan);
    if (ref.failed) {
      res.reason = Termination::SolverFailure;
      break;
    }
    const TrackingResult tr = tracking_mpc(ref, field, settings, warm_track);
    if (tr.failed) {
      res.reason = Termination::SolverFailure;
      break;
    }
    x = step(x, tr.u, settings.dynamics);
    res.trajectory.controls.push_back(tr.u);
    res.trajectory.states.push_back(x);
    ++res.steps;
    const double clearance = pose_clearance(world_field, x, settings.cost);
    res.min_clearance = std::min(res.min_clearance, clearance);
    if (clearance <= 0.0) {
      res.reason = Termination::Collision;
      break;
    }
    shift(warm_plan);
    warm_track = tr.controls;
    shift(warm_track);
  }
  return res;
}

EvalReport eval_doorway(const Policy& policy, const EvalOptions& opts) {
  if (opts.trials < 1) throw std::invalid_argument("eval: need at least one trial");
  policy.validate();
  EvalReport report;
  report.kind = policy.kind;
  report.trials = opts.trials;
  report.rows.resize(static_cast<std::size_t>(opts.trials));
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < opts.trials; ++i) {
    const std::uint64_t s = opts.seed + static_cast<std::uint64_t>(i);
    const OccupancyGrid world = make_doorway_world(opts.world, s);
    const StartGoal sg = opts.same_side ? sample_start_goal_same_side(opts.world, s)
                                        : sample_start_goal(opts.world, s);
    TrialSummary& row = report.rows[static_cast<std::size_t>(i)];
    row.index = i;
    row.start = sg.start;
    row.goal = sg.goal;
    row.result = run_episode(world, policy, sg.start, sg.goal, opts.episode);
    if (opts.with_expert) {
      try {
        row.expert = generate_expert_demo(world, sg.start, sg.goal, opts.world, opts.expert,
                                          policy.settings.dynamics);
        const auto a = positions(row.result.trajectory.states);
        const auto b = positions(row.expert.states);
        row.hausdorff = hausdorff(a, b);
      } catch (const ExpertFailure&) {
        row.hausdorff = -1.0;
      } catch (const NoPathError&) {
        row.hausdorff = -1.0;
      }
    }
  }
  double total = 0.0;
  int counted = 0;
  for (const auto& row : report.rows) {
    if (row.result.success) ++report.successes;
    if (row.hausdorff >= 0.0) {
      total += row.hausdorff;
      ++counted;
    }
  }
  report.mean_hausdorff = counted > 0 ? total / counted : -1.0;
  return report;
}

namespace {
std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}
}  // namespace

void write_eval_report(std::ostream& out, const EvalReport& report) {
  out << "trial,start_x,start_y,start_phi,goal_x,goal_y,goal_phi,success,reason,steps,min_clearance,hausdorff\n";
  for (const auto& r : report.rows) {
    out << r.index << ',' << fmt(r.start.px) << ',' << fmt(r.start.py) << ',' << fmt(r.start.phi) << ','
        << fmt(r.goal.px) << ',' << fmt(r.goal.py) << ',' << fmt(r.goal.phi) << ','
        << (r.result.success ? 1 : 0) << ',' << termination_name(r.result.reason) << ',' << r.result.steps
        << ',' << fmt(r.result.min_clearance) << ',' << fmt(r.hausdorff) << '\n';
  }
  int counts[4] = {0, 0, 0, 0};
  for (const auto& r : report.rows) ++counts[static_cast<int>(r.result.reason)];
  out << "# summary\n";
  out << "policy=" << policy_name(report.kind) << '\n';
  out << "trials=" << report.trials << '\n';
  out << "successes=" << report.successes << '\n';
  out << "success_rate=" << fmt(static_cast<double>(report.successes) / report.trials) << '\n';
  out << "collisions=" << counts[static_cast<int>(Termination::Collision)] << '\n';
  out << "timeouts=" << counts[static_cast<int>(Termination::Timeout)] << '\n';
  out << "solver_failures=" << counts[static_cast<int>(Termination::SolverFailure)] << '\n';
  out << "mean_hausdorff=" << fmt(report.mean_hausdorff) << '\n';
}

void write_trajectory_header(std::ostream& out) { out << "label,t,px,py,phi,u_v,u_omega\n"; }

void write_trajectory(std::ostream& out, const std::string& label, const Trajectory& traj) {
  for (std::size_t t = 0; t < traj.states.size(); ++t) {
    const auto& s = traj.states[t];
    out << label << ',' << t << ',' << fmt(s.px) << ',' << fmt(s.py) << ',' << fmt(s.phi) << ',';
    if (t < traj.controls.size()) out << fmt(traj.controls[t].v) << ',' << fmt(traj.controls[t].omega);
    else out << ',';
    out << '\n';
  }
}

}  // namespace pmpc
