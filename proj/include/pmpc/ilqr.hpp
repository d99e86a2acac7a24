#pragma once

#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "pmpc/cost.hpp"
#include "pmpc/dynamics.hpp"

namespace pmpc {

/// Dynamics callbacks. `curvature` is optional; it is only needed to form the
/// exact Hessian used when differentiating a solution.
struct DynamicsModel {
  std::function<State(const State&, const Control&)> step;
  std::function<std::pair<StateJacobian, ControlJacobian>(const State&, const Control&)> linearize;
  std::function<DynamicsCurvature(const State&, const Control&, const Eigen::Vector3d&)> curvature;

  static DynamicsModel differential_drive(const DynamicsConfig& cfg);
};

struct MPCProblem {
  int horizon = 20;
  State x0;
  double dt = 0.1;
  DynamicsModel dynamics;
  std::shared_ptr<const CostModel> cost;

  void validate() const;
};

struct SolverConfig {
  int max_iterations = 20;
  double tolerance = 1e-6;           ///< on max |k_t|
  double rel_cost_tolerance = 1e-9;
  double lambda_init = 1e-6;         ///< first nonzero regularization
  double lambda_max = 1e6;
  double lambda_factor = 10.0;
  double ls_shrink = 0.5;
  double ls_min_step = 1.0 / 1024.0;
  double armijo = 1e-4;

  void validate() const;
};

struct Linearization {
  StateJacobian A;
  ControlJacobian B;
};

using FeedbackGain = Eigen::Matrix<double, 2, 3>;

struct TVLQRPolicy {
  std::vector<FeedbackGain> K;
  std::vector<Eigen::Vector2d> k;
  double d1 = 0.0;  ///< sum k_tᵀ Q_u,t
  double d2 = 0.0;  ///< sum k_tᵀ Q_uu,t k_t

  /// Predicted cost reduction of a step of size alpha.
  double expected_reduction(double alpha) const { return -(alpha * d1 + 0.5 * alpha * alpha * d2); }
};

struct NonPSDError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class SolveStatus { Converged, MaxIterations, NumericalFailure };

struct MPCSolution {
  Trajectory trajectory;
  double cost = 0.0;
  int iterations = 0;          ///< backward passes performed
  int accepted_steps = 0;
  bool converged = false;
  SolveStatus status = SolveStatus::MaxIterations;
  double gradient_norm = 0.0;  ///< ||∇_u J_c|| at the returned iterate
  double lambda = 0.0;         ///< regularization in effect at exit
  std::vector<double> cost_history;  ///< cost after each accepted step, starting with the initial cost
  std::vector<StageQuadratization> quadratizations;  ///< T stages + terminal, at the returned iterate
  std::vector<Linearization> linearizations;
};

/// Riccati backward recursion; `quads` has horizon+1 entries (last terminal),
/// `lins` has horizon entries. λ is added to each stage's Q_uu.
TVLQRPolicy tvlqr_backward(std::span<const StageQuadratization> quads,
                           std::span<const Linearization> lins, double lambda);

double trajectory_cost(const MPCProblem& problem, const Trajectory& traj);

Trajectory rollout(const MPCProblem& problem, std::span<const Control> controls);

/// Closed-loop rollout u_t = ū_t + α k_t + K_t (x_t - x̄_t); returns the
/// candidate and its cost.
std::pair<Trajectory, double> forward_pass(const MPCProblem& problem, const Trajectory& nominal,
                                           const TVLQRPolicy& policy, double alpha);

/// ∇_u J_c along a trajectory via the adjoint recursion.
std::vector<Eigen::Vector2d> cost_gradient(const MPCProblem& problem, const Trajectory& traj);

std::vector<StageQuadratization> quadratize_trajectory(const MPCProblem& problem,
                                                       const Trajectory& traj);
std::vector<Linearization> linearize_trajectory(const MPCProblem& problem, const Trajectory& traj);

/// Gauss-Newton iLQR with Levenberg regularization on Q_uu and backtracking
/// line search. Never throws on numerical trouble; check `status`.
MPCSolution solve(const MPCProblem& problem, std::span<const Control> u_init,
                  const SolverConfig& cfg);

/// Maps a gradient with respect to the cost parameters to a gradient with
/// respect to upstream parameters (e.g. a network's weights).
using ParameterBackward = std::function<std::vector<double>(std::span<const double>)>;

struct SolutionVJP {
  std::vector<double> cost_parameter_grad;  ///< d J_l / d (cost parameters)
  std::vector<double> theta_grad;           ///< after theta_backward (or equal to the above)
  std::vector<Eigen::Vector2d> direction;   ///< δv = -H⁻¹ ∇_u J_l
  bool regularized = false;                 ///< Hessian needed regularization
  double lambda = 0.0;
};

/// Implicit-function-theorem VJP through the optimum: solves one TVLQR for
/// δv = -[∇²_u J_c]⁻¹ ∇_u J_l using the exact Hessian (cost quadratizations
/// plus costate-weighted dynamics curvature when available), then contracts
/// δv with the mixed derivative ∇²_{θu} J_c via the cost's parameter VJP.
SolutionVJP solution_vjp(const MPCProblem& problem, const MPCSolution& solution,
                         std::span<const Eigen::Vector2d> grad_u,
                         const ParameterBackward& theta_backward = {});

}  // namespace pmpc
