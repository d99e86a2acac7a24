#include "pmpc/imitation.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <memory>
#include <optional>

#include "pmpc/seed.hpp"

namespace pmpc {

void ExpertConfig::validate() const {
  if (horizon < 1 || max_iterations < 1) throw std::invalid_argument("expert: horizon and iterations must be >= 1");
  if (!(waypoint_spacing > 0.0) || !(goal_tolerance > 0.0))
    throw std::invalid_argument("expert: spacing and tolerance must be positive");
  cost.validate();
}

namespace {

// Waypoints roughly every `spacing` meters of arc length, excluding the start
// and always ending with the path's last point.
std::vector<Eigen::Vector2d> subsample(const PlannerPath& path, double spacing) {
  std::vector<Eigen::Vector2d> out;
  double since = 0.0;
  for (std::size_t k = 1; k < path.waypoints.size(); ++k) {
    since += (path.waypoints[k] - path.waypoints[k - 1]).norm();
    if (since >= spacing) {
      out.push_back(path.waypoints[k]);
      since = 0.0;
    }
  }
  if (!path.waypoints.empty() && (out.empty() || out.back() != path.waypoints.back()))
    out.push_back(path.waypoints.back());
  return out;
}

bool touches_obstacle(const Trajectory& traj, const DistanceField& field, const StaticCostConfig& cost) {
  for (const auto& x : traj.states)
    for (const auto& offset : cost.collision_points) {
      const Eigen::Vector2d p = to_world(offset, x);
      if (signed_distance(field, p).distance <= 0.0) return true;
    }
  return false;
}

}  // namespace

Trajectory generate_expert_demo(const OccupancyGrid& world, const State& start, const State& goal,
                                const DoorwaySpec& spec, const ExpertConfig& cfg,
                                const DynamicsConfig& dyn) {
  cfg.validate();
  auto field = std::make_shared<const DistanceField>(distance_field(world));
  const PlannerPath path = dijkstra_plan(world, *field, {start.px, start.py}, {goal.px, goal.py},
                                         spec.inflation);
  const auto waypoints = subsample(path, cfg.waypoint_spacing);

  MPCProblem problem;
  problem.horizon = cfg.horizon;
  problem.x0 = start;
  problem.dt = dyn.dt;
  problem.dynamics = DynamicsModel::differential_drive(dyn);
  SolverConfig solver;
  solver.max_iterations = cfg.max_iterations;

  std::vector<Control> u(static_cast<std::size_t>(cfg.horizon));
  Eigen::Vector2d prev(start.px, start.py);
  Trajectory best;
  const std::size_t n = waypoints.size();
  for (std::size_t k = 0; k <= n; ++k) {
    StaticCostConfig cost = cfg.cost;
    if (k < n) {
      // Intermediate targets carry the path direction as heading.
      const Eigen::Vector2d dir = waypoints[k] - prev;
      cost.goal = waypoints[k];
      cost.goal_heading = dir.norm() > 0.0 ? std::atan2(dir[1], dir[0]) : start.phi;
      prev = waypoints[k];
    } else {
      cost.goal = {goal.px, goal.py};
      cost.goal_heading = goal.phi;
    }
    problem.cost = std::make_shared<NavigationCost>(cost, field, cfg.horizon);
    const MPCSolution sol = solve(problem, u, solver);
    u = sol.trajectory.controls;
    best = sol.trajectory;
  }

  const State& last = best.states.back();
  const double miss = std::hypot(last.px - goal.px, last.py - goal.py);
  if (miss > cfg.goal_tolerance)
    throw ExpertFailure("expert ended " + std::to_string(miss) + " m from the goal");
  if (touches_obstacle(best, *field, cfg.cost)) throw ExpertFailure("expert trajectory touches an obstacle");
  return best;
}

std::vector<Demonstration> window_extract(const Trajectory& demo, const OccupancyGrid& world,
                                          const State& final_goal, int demo_id, int horizon,
                                          int stride) {
  if (horizon < 1 || stride < 1) throw std::invalid_argument("window_extract: bad window");
  const int n = demo.horizon();
  std::vector<Demonstration> out;
  for (int s = 0; s + horizon <= n; s += stride) {
    Demonstration d;
    d.demo_id = demo_id;
    const State origin = demo.states[static_cast<std::size_t>(s)];
    d.context = crop_context(world, origin);
    d.states.reserve(static_cast<std::size_t>(horizon + 1));
    for (int t = 0; t <= horizon; ++t) d.states.push_back(to_local(demo.states[static_cast<std::size_t>(s + t)], origin));
    d.controls.assign(demo.controls.begin() + s, demo.controls.begin() + s + horizon);
    d.goal = to_local(final_goal, origin);
    out.push_back(std::move(d));
  }
  return out;
}

Trajectory snippet_to_world(const Demonstration& demo) {
  Trajectory traj;
  for (const auto& x : demo.states) traj.states.push_back(to_world(x, demo.context.pose));
  traj.controls = demo.controls;
  return traj;
}

LossResult imitation_loss(const Trajectory& solution, const Demonstration& demo,
                          const DynamicsModel& dynamics, const LossConfig& cfg) {
  const int T = solution.horizon();
  if (T != demo.horizon() || solution.states.size() != demo.states.size())
    throw std::invalid_argument("imitation_loss: horizon mismatch");
  LossResult res;
  res.grad_u.resize(static_cast<std::size_t>(T));

  auto state_term = [&](int t, Eigen::Vector3d& grad) {
    const State& x = solution.states[static_cast<std::size_t>(t)];
    const State& r = demo.states[static_cast<std::size_t>(t)];
    const double dx = x.px - r.px, dy = x.py - r.py, dphi = x.phi - r.phi;
    grad = {2.0 * dx, 2.0 * dy, cfg.beta_heading * std::sin(dphi)};
    return dx * dx + dy * dy + cfg.beta_heading * (1.0 - std::cos(dphi));
  };

  Eigen::Vector3d lam;
  res.value = state_term(T, lam);
  for (int t = T - 1; t >= 0; --t) {
    const Control& u = solution.controls[static_cast<std::size_t>(t)];
    const Control& ur = demo.controls[static_cast<std::size_t>(t)];
    const Eigen::Vector2d du(u.v - ur.v, u.omega - ur.omega);
    const auto [A, B] = dynamics.linearize(solution.states[static_cast<std::size_t>(t)], u);
    res.value += cfg.beta_control * du.squaredNorm();
    res.grad_u[static_cast<std::size_t>(t)] = 2.0 * cfg.beta_control * du + B.transpose() * lam;
    Eigen::Vector3d gx;
    res.value += state_term(t, gx);
    lam = gx + A.transpose() * lam;
  }
  return res;
}

double hausdorff(std::span<const Eigen::Vector2d> a, std::span<const Eigen::Vector2d> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("hausdorff: empty point set");
  auto directed = [](std::span<const Eigen::Vector2d> p, std::span<const Eigen::Vector2d> q) {
    double worst = 0.0;
    for (const auto& x : p) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& y : q) best = std::min(best, (x - y).squaredNorm());
      worst = std::max(worst, best);
    }
    return worst;
  };
  return std::sqrt(std::max(directed(a, b), directed(b, a)));
}

std::vector<Eigen::Vector2d> positions(std::span<const State> states) {
  std::vector<Eigen::Vector2d> out;
  out.reserve(states.size());
  for (const auto& s : states) out.emplace_back(s.px, s.py);
  return out;
}

std::uint64_t world_spec_hash(const DoorwaySpec& spec) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (double v : {spec.extent, spec.resolution, spec.wall_x, spec.doorway_width, spec.wall_thickness,
                   spec.door_offset_range, spec.clearance, spec.inflation}) {
    unsigned char bytes[sizeof(double)];
    std::memcpy(bytes, &v, sizeof(double));
    for (unsigned char b : bytes) {
      h ^= b;
      h *= 0x100000001b3ull;
    }
  }
  return h;
}

Dataset generate_dataset(const DoorwaySpec& spec, const DataConfig& data, const ExpertConfig& expert,
                         const DynamicsConfig& dyn, std::uint64_t seed, const LogFn& log) {
  spec.validate();
  expert.validate();
  if (data.num_demos < 1 || data.horizon < 1 || data.stride < 1 || data.eval_fraction < 0.0 ||
      data.eval_fraction >= 1.0)
    throw std::invalid_argument("dataset: bad data config");
  if (data.horizon > expert.horizon) throw std::invalid_argument("dataset: window longer than expert horizon");

  Dataset ds;
  ds.world_hash = world_spec_hash(spec);
  ds.seed = seed;
  ds.num_demos = data.num_demos;
  ds.num_eval_demos = static_cast<int>(std::lround(data.eval_fraction * data.num_demos));
  ds.horizon = data.horizon;

  struct Attempt {
    std::optional<Trajectory> traj;
    OccupancyGrid world;
    State goal;
    std::string error;
  };
  int accepted = 0;
  long long next = 0;
  const long long max_attempts = 4LL * data.num_demos + 16;
  while (accepted < data.num_demos) {
    if (next >= max_attempts) throw std::runtime_error("dataset: too many expert failures");
    const long long batch = data.num_demos - accepted;
    std::vector<Attempt> attempts(static_cast<std::size_t>(batch));
#pragma omp parallel for schedule(dynamic)
    for (long long k = 0; k < batch; ++k) {
      const auto idx = static_cast<std::uint64_t>(next + k);
      Attempt& a = attempts[static_cast<std::size_t>(k)];
      a.world = make_doorway_world(spec, derive_seed(seed, 2 * idx));
      const StartGoal sg = sample_start_goal(spec, derive_seed(seed, 2 * idx + 1));
      a.goal = sg.goal;
      try {
        a.traj = generate_expert_demo(a.world, sg.start, sg.goal, spec, expert, dyn);
      } catch (const std::exception& e) {
        a.error = e.what();
      }
    }
    for (long long k = 0; k < batch; ++k) {
      Attempt& a = attempts[static_cast<std::size_t>(k)];
      if (!a.traj) {
        if (log) log("expert failure candidate=" + std::to_string(next + k) + " reason=" + a.error);
        continue;
      }
      auto snippets = window_extract(*a.traj, a.world, a.goal, accepted, data.horizon, data.stride);
      for (auto& s : snippets) ds.snippets.push_back(std::move(s));
      ++accepted;
    }
    next += batch;
  }
  return ds;
}

}  // namespace pmpc
