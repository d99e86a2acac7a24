#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pmpc/cost.hpp"
#include "pmpc/dynamics.hpp"
#include "pmpc/gridworld.hpp"
#include "pmpc/ilqr.hpp"

namespace pmpc {

/// Offline planner producing the long expert trajectories.
struct ExpertConfig {
  int horizon = 100;
  int max_iterations = 200;
  double waypoint_spacing = 0.5;  ///< [m] along the Dijkstra path
  double goal_tolerance = 0.2;    ///< [m]
  StaticCostConfig cost = expert_cost();  ///< weights; goal fields are overwritten per solve

  /// Static weights with a stronger goal pull so 100-step solves end on the goal.
  static StaticCostConfig expert_cost() {
    StaticCostConfig c;
    c.w_goal = 5.0;
    return c;
  }

  void validate() const;
};

struct ExpertFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Waypoint continuation: Dijkstra waypoints are visited in order, each solve
/// of the horizon-T static-cost MPC warm-started from the previous solution,
/// and the last solve targets the true goal. Returns the final T-step
/// trajectory. Throws ExpertFailure if it ends outside the goal tolerance or
/// touches an obstacle.
Trajectory generate_expert_demo(const OccupancyGrid& world, const State& start, const State& goal,
                                const DoorwaySpec& spec, const ExpertConfig& cfg,
                                const DynamicsConfig& dyn);

/// One training snippet, everything expressed in the frame of `context.pose`.
struct Demonstration {
  int demo_id = 0;
  Context context;
  std::vector<State> states;      ///< T+1, states[0] is the context origin
  std::vector<Control> controls;  ///< T
  State goal;                     ///< the original long-horizon goal

  int horizon() const { return static_cast<int>(controls.size()); }
};

/// Sliding windows of `horizon` controls with the given stride; each window
/// keeps the demo's final goal.
std::vector<Demonstration> window_extract(const Trajectory& demo, const OccupancyGrid& world,
                                          const State& final_goal, int demo_id, int horizon = 20,
                                          int stride = 1);

/// Maps a snippet back into the world frame.
Trajectory snippet_to_world(const Demonstration& demo);

struct LossConfig {
  double beta_heading = 0.1;
  double beta_control = 0.1;
};

struct LossResult {
  double value = 0.0;
  std::vector<Eigen::Vector2d> grad_u;  ///< d loss / d controls through the rollout
};

/// Stagewise imitation loss with a terminal state term; the gradient with
/// respect to the controls is propagated through the dynamics by the adjoint
/// recursion.
LossResult imitation_loss(const Trajectory& solution, const Demonstration& demo,
                          const DynamicsModel& dynamics, const LossConfig& cfg = {});

double hausdorff(std::span<const Eigen::Vector2d> a, std::span<const Eigen::Vector2d> b);
std::vector<Eigen::Vector2d> positions(std::span<const State> states);

struct DataConfig {
  int num_demos = 200;
  int horizon = 20;
  int stride = 1;
  double eval_fraction = 0.1;
};

struct Dataset {
  std::uint64_t world_hash = 0;
  std::uint64_t seed = 0;
  int num_demos = 0;
  int num_eval_demos = 0;  ///< the last demo ids form the eval split
  int horizon = 20;
  int context_side = kContextSide;
  std::vector<Demonstration> snippets;

  bool is_eval(const Demonstration& d) const { return d.demo_id >= num_demos - num_eval_demos; }
};

std::uint64_t world_spec_hash(const DoorwaySpec& spec);

using LogFn = std::function<void(const std::string&)>;

/// Demo k uses world seed derive_seed(seed, 2k) and start/goal seed
/// derive_seed(seed, 2k+1); failed experts are logged and skipped, and further
/// candidates are drawn until num_demos succeed.
Dataset generate_dataset(const DoorwaySpec& spec, const DataConfig& data, const ExpertConfig& expert,
                         const DynamicsConfig& dyn, std::uint64_t seed, const LogFn& log = {});

}  // namespace pmpc
