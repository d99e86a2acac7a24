#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "pmpc/cost.hpp"
#include "pmpc/dynamics.hpp"
#include "pmpc/gridworld.hpp"
#include "pmpc/ilqr.hpp"
#include "pmpc/imitation.hpp"
#include "pmpc/performer.hpp"

namespace pmpc {

enum class PolicyKind { Rmpc, Ep, Pmpc };

const char* policy_name(PolicyKind kind);
PolicyKind parse_policy(const std::string& name);

/// Settings shared by the reference planner, the tracking MPC and training.
struct PlannerSettings {
  DynamicsConfig dynamics;
  StaticCostConfig cost;          ///< weights; goal fields are set per problem
  SolverConfig solver;            ///< reference planner and training solves
  SolverConfig tracking_solver;   ///< tracking MPC
  int horizon = 20;
};

/// MPC in the robot frame of a context: x0 is the origin, `goal` (position
/// and heading) is expressed in the same frame.
MPCProblem make_context_problem(const PlannerSettings& settings,
                                std::shared_ptr<const DistanceField> field, const State& goal,
                                const ResidualQuadratic* residual = nullptr);

struct Policy {
  PolicyKind kind = PolicyKind::Rmpc;
  PlannerSettings settings;
  std::shared_ptr<const Performer> model;  ///< EP (3-dim head) and Performer-MPC (embedding head)
  std::vector<double> params;

  void validate() const;
};

/// Either a planned trajectory or, for EP, a single goal state; context frame.
struct Reference {
  std::vector<State> states;
  std::vector<Control> controls;
  bool goal_only = false;
  bool failed = false;
};

/// `warm` holds the planner's previous controls (shifted by the caller) and
/// receives the new solution.
Reference plan_reference(const Policy& policy, const Context& ctx,
                         std::shared_ptr<const DistanceField> ctx_field, const State& goal,
                         std::vector<Control>* warm = nullptr);

struct TrackingResult {
  Control u;
  bool failed = false;
  std::vector<Control> controls;  ///< full solution, for warm starting
};

/// Static-cost MPC towards reference[min(T, len-1)] (or the EP goal); returns
/// the first control, clamped to the limits.
TrackingResult tracking_mpc(const Reference& ref, std::shared_ptr<const DistanceField> ctx_field,
                            const PlannerSettings& settings, std::span<const Control> warm = {});

enum class Termination { GoalReached, Collision, Timeout, SolverFailure };
const char* termination_name(Termination t);

struct EpisodeConfig {
  double success_radius = 0.3;
  int max_steps = 600;
};

struct EpisodeResult {
  bool success = false;
  Termination reason = Termination::Timeout;
  Trajectory trajectory;  ///< executed, world frame
  int steps = 0;
  double min_clearance = 0.0;  ///< smallest collision-point distance along the run [m]
};

/// Minimum distance over the collision points at pose x.
double pose_clearance(const DistanceField& field, const State& x, const StaticCostConfig& cost);

EpisodeResult run_episode(const OccupancyGrid& world, const Policy& policy, const State& start,
                          const State& goal, const EpisodeConfig& cfg);

struct TrialSummary {
  int index = 0;
  State start, goal;
  EpisodeResult result;
  double hausdorff = -1.0;  ///< negative when no expert is available
  Trajectory expert;
};

struct EvalOptions {
  int trials = 100;
  std::uint64_t seed = 0;
  DoorwaySpec world;
  EpisodeConfig episode;
  bool with_expert = true;
  ExpertConfig expert;
  bool same_side = false;
};

struct EvalReport {
  PolicyKind kind = PolicyKind::Rmpc;
  int trials = 0;
  int successes = 0;
  std::vector<TrialSummary> rows;
  double mean_hausdorff = -1.0;
};

/// Trial i uses world seed and start/goal seed `seed + i`, so every policy
/// sees the same pairs. Trials may run in parallel; results are ordered by
/// index.
EvalReport eval_doorway(const Policy& policy, const EvalOptions& opts);

/// Delimited table (one row per trial) followed by a summary block.
void write_eval_report(std::ostream& out, const EvalReport& report);
/// Trajectory records: label,t,px,py,phi,u_v,u_omega (controls empty on the
/// last state).
void write_trajectory(std::ostream& out, const std::string& label, const Trajectory& traj);
void write_trajectory_header(std::ostream& out);

}  // namespace pmpc
