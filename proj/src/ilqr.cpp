#include "pmpc/ilqr.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace pmpc {

DynamicsModel DynamicsModel::differential_drive(const DynamicsConfig& cfg) {
  cfg.validate();
  DynamicsModel m;
  m.step = [cfg](const State& x, const Control& u) { return pmpc::step(x, u, cfg); };
  m.linearize = [cfg](const State& x, const Control& u) { return pmpc::linearize(x, u, cfg); };
  m.curvature = [cfg](const State& x, const Control& u, const Eigen::Vector3d& lam) {
    return pmpc::curvature(x, u, lam, cfg);
  };
  return m;
}

void MPCProblem::validate() const {
  if (horizon < 1) throw std::invalid_argument("mpc: horizon must be >= 1");
  if (!(dt > 0.0)) throw std::invalid_argument("mpc: dt must be positive");
  if (!dynamics.step || !dynamics.linearize) throw std::invalid_argument("mpc: dynamics callbacks missing");
  if (!cost) throw std::invalid_argument("mpc: cost missing");
}

void SolverConfig::validate() const {
  if (max_iterations < 1) throw std::invalid_argument("solver: max_iterations must be >= 1");
  if (!(lambda_init > 0.0) || !(lambda_max >= lambda_init) || !(lambda_factor > 1.0))
    throw std::invalid_argument("solver: bad regularization schedule");
  if (!(ls_shrink > 0.0 && ls_shrink < 1.0) || !(ls_min_step > 0.0 && ls_min_step <= 1.0))
    throw std::invalid_argument("solver: bad line search settings");
}

TVLQRPolicy tvlqr_backward(std::span<const StageQuadratization> quads,
                           std::span<const Linearization> lins, double lambda) {
  const std::size_t T = lins.size();
  if (quads.size() != T + 1) throw std::invalid_argument("tvlqr_backward: size mismatch");
  TVLQRPolicy pol;
  pol.K.resize(T);
  pol.k.resize(T);
  Eigen::Vector3d Vx = quads[T].q_x;
  Eigen::Matrix3d Vxx = quads[T].Q_xx;
  for (std::size_t s = T; s-- > 0;) {
    const auto& q = quads[s];
    const auto& A = lins[s].A;
    const auto& B = lins[s].B;
    const Eigen::Vector3d Qx = q.q_x + A.transpose() * Vx;
    const Eigen::Vector2d Qu = q.q_u + B.transpose() * Vx;
    const Eigen::Matrix3d Qxx = q.Q_xx + A.transpose() * Vxx * A;
    const Eigen::Matrix2d Quu = q.Q_uu + B.transpose() * Vxx * B;
    const Eigen::Matrix<double, 2, 3> Qux = q.Q_ux + B.transpose() * Vxx * A;

    Eigen::Matrix2d Qreg = Quu;
    Qreg.diagonal().array() += lambda;
    Eigen::LLT<Eigen::Matrix2d> llt(Qreg);
    if (llt.info() != Eigen::Success || !(Qreg.determinant() > 0.0) || !(Qreg(0, 0) > 0.0))
      throw NonPSDError("tvlqr_backward: Q_uu not positive definite at stage " + std::to_string(s));
    const Eigen::Vector2d k = -llt.solve(Qu);
    const Eigen::Matrix<double, 2, 3> K = -llt.solve(Qux);
    if (!k.allFinite() || !K.allFinite()) throw NonPSDError("tvlqr_backward: non-finite gains");
    pol.k[s] = k;
    pol.K[s] = K;
    pol.d1 += k.dot(Qu);
    pol.d2 += k.dot(Quu * k);

    Vx = Qx + K.transpose() * Quu * k + K.transpose() * Qu + Qux.transpose() * k;
    Vxx = Qxx + K.transpose() * Quu * K + K.transpose() * Qux + Qux.transpose() * K;
    Vxx = 0.5 * (Vxx + Vxx.transpose()).eval();
  }
  return pol;
}

double trajectory_cost(const MPCProblem& problem, const Trajectory& traj) {
  double total = 0.0;
  for (int t = 0; t < traj.horizon(); ++t)
    total += problem.cost->stage(traj.states[t], traj.controls[t], t);
  return total + problem.cost->terminal(traj.states.back());
}

Trajectory rollout(const MPCProblem& problem, std::span<const Control> controls) {
  Trajectory traj;
  traj.dt = problem.dt;
  traj.controls.assign(controls.begin(), controls.end());
  traj.states.reserve(controls.size() + 1);
  traj.states.push_back(problem.x0);
  for (const auto& u : controls) traj.states.push_back(problem.dynamics.step(traj.states.back(), u));
  return traj;
}

std::pair<Trajectory, double> forward_pass(const MPCProblem& problem, const Trajectory& nominal,
                                           const TVLQRPolicy& policy, double alpha) {
  const int T = nominal.horizon();
  Trajectory cand;
  cand.dt = nominal.dt;
  cand.states.resize(T + 1);
  cand.controls.resize(T);
  cand.states[0] = nominal.states[0];
  double cost = 0.0;
  for (int t = 0; t < T; ++t) {
    const Eigen::Vector3d dx = cand.states[t].vec() - nominal.states[t].vec();
    const Eigen::Vector2d u = nominal.controls[t].vec() + alpha * policy.k[t] + policy.K[t] * dx;
    cand.controls[t] = Control::from(u);
    cost += problem.cost->stage(cand.states[t], cand.controls[t], t);
    cand.states[t + 1] = problem.dynamics.step(cand.states[t], cand.controls[t]);
  }
  cost += problem.cost->terminal(cand.states[T]);
  return {std::move(cand), cost};
}

std::vector<StageQuadratization> quadratize_trajectory(const MPCProblem& problem,
                                                       const Trajectory& traj) {
  const int T = traj.horizon();
  std::vector<StageQuadratization> quads(T + 1);
  for (int t = 0; t < T; ++t)
    quads[t] = problem.cost->quadratize_stage(traj.states[t], traj.controls[t], t);
  quads[T] = problem.cost->quadratize_terminal(traj.states[T]);
  return quads;
}

std::vector<Linearization> linearize_trajectory(const MPCProblem& problem, const Trajectory& traj) {
  std::vector<Linearization> lins(traj.horizon());
  for (int t = 0; t < traj.horizon(); ++t) {
    auto [A, B] = problem.dynamics.linearize(traj.states[t], traj.controls[t]);
    lins[t] = {A, B};
  }
  return lins;
}

namespace {

// Costates μ_t = ∂J/∂x_t along the trajectory (μ_T from the terminal cost).
std::vector<Eigen::Vector3d> costates(std::span<const StageQuadratization> quads,
                                      std::span<const Linearization> lins) {
  const std::size_t T = lins.size();
  std::vector<Eigen::Vector3d> mu(T + 1);
  mu[T] = quads[T].q_x;
  for (std::size_t s = T; s-- > 0;) mu[s] = quads[s].q_x + lins[s].A.transpose() * mu[s + 1];
  return mu;
}

std::vector<Eigen::Vector2d> gradient_from(std::span<const StageQuadratization> quads,
                                           std::span<const Linearization> lins) {
  const auto mu = costates(quads, lins);
  std::vector<Eigen::Vector2d> g(lins.size());
  for (std::size_t t = 0; t < lins.size(); ++t) g[t] = quads[t].q_u + lins[t].B.transpose() * mu[t + 1];
  return g;
}

double norm_of(const std::vector<Eigen::Vector2d>& g) {
  double s = 0.0;
  for (const auto& v : g) s += v.squaredNorm();
  return std::sqrt(s);
}

double max_abs(const std::vector<Eigen::Vector2d>& k) {
  double m = 0.0;
  for (const auto& v : k) m = std::max(m, v.cwiseAbs().maxCoeff());
  return m;
}

}  // namespace

std::vector<Eigen::Vector2d> cost_gradient(const MPCProblem& problem, const Trajectory& traj) {
  const auto quads = quadratize_trajectory(problem, traj);
  const auto lins = linearize_trajectory(problem, traj);
  return gradient_from(quads, lins);
}

MPCSolution solve(const MPCProblem& problem, std::span<const Control> u_init,
                  const SolverConfig& cfg) {
  problem.validate();
  cfg.validate();
  if (u_init.size() != static_cast<std::size_t>(problem.horizon))
    throw std::invalid_argument("solve: initial controls must have horizon entries");

  MPCSolution sol;
  Trajectory traj = rollout(problem, u_init);
  double cost = trajectory_cost(problem, traj);
  if (!std::isfinite(cost)) throw std::invalid_argument("solve: initial cost is not finite");
  sol.cost_history.push_back(cost);

  double lambda = 0.0;
  auto quads = quadratize_trajectory(problem, traj);
  auto lins = linearize_trajectory(problem, traj);
  sol.status = SolveStatus::MaxIterations;

  for (int it = 0; it < cfg.max_iterations; ++it) {
    ++sol.iterations;
    bool accepted = false;
    bool done = false;
    while (!accepted) {
      TVLQRPolicy pol;
      try {
        pol = tvlqr_backward(quads, lins, lambda);
      } catch (const NonPSDError&) {
        lambda = lambda == 0.0 ? cfg.lambda_init : lambda * cfg.lambda_factor;
        if (lambda > cfg.lambda_max) break;
        continue;
      }
      // Nothing left to gain: either the step is tiny or the model predicts
      // a decrease below round-off of the current cost.
      if (max_abs(pol.k) < cfg.tolerance ||
          pol.expected_reduction(1.0) < cfg.rel_cost_tolerance * std::max(std::abs(cost), 1e-12)) {
        done = true;
        break;
      }
      for (double alpha = 1.0; alpha >= cfg.ls_min_step; alpha *= cfg.ls_shrink) {
        auto [cand, cand_cost] = forward_pass(problem, traj, pol, alpha);
        const double actual = cost - cand_cost;
        const double expected = pol.expected_reduction(alpha);
        if (std::isfinite(cand_cost) && actual > 0.0 && actual >= cfg.armijo * expected) {
          traj = std::move(cand);
          accepted = true;
          break;
        }
      }
      if (!accepted) {
        lambda = lambda == 0.0 ? cfg.lambda_init : lambda * cfg.lambda_factor;
        if (lambda > cfg.lambda_max) break;
      }
    }
    if (done) {
      sol.converged = true;
      sol.status = SolveStatus::Converged;
      break;
    }
    if (!accepted) {
      sol.status = SolveStatus::NumericalFailure;
      break;
    }
    const double new_cost = trajectory_cost(problem, traj);
    const double rel = (cost - new_cost) / std::max(std::abs(cost), 1e-12);
    cost = new_cost;
    ++sol.accepted_steps;
    sol.cost_history.push_back(cost);
    lambda /= cfg.lambda_factor;
    if (lambda < cfg.lambda_init) lambda = 0.0;
    quads = quadratize_trajectory(problem, traj);
    lins = linearize_trajectory(problem, traj);
    if (rel < cfg.rel_cost_tolerance) {
      sol.converged = true;
      sol.status = SolveStatus::Converged;
      break;
    }
  }

  sol.trajectory = std::move(traj);
  sol.cost = cost;
  sol.lambda = lambda;
  sol.gradient_norm = norm_of(gradient_from(quads, lins));
  sol.quadratizations = std::move(quads);
  sol.linearizations = std::move(lins);
  return sol;
}

SolutionVJP solution_vjp(const MPCProblem& problem, const MPCSolution& solution,
                         std::span<const Eigen::Vector2d> grad_u,
                         const ParameterBackward& theta_backward) {
  const Trajectory& traj = solution.trajectory;
  const int T = traj.horizon();
  if (grad_u.size() != static_cast<std::size_t>(T))
    throw std::invalid_argument("solution_vjp: gradient must have horizon entries");
  auto quads = solution.quadratizations;
  auto lins = solution.linearizations;
  if (quads.size() != static_cast<std::size_t>(T + 1) || lins.size() != static_cast<std::size_t>(T)) {
    quads = quadratize_trajectory(problem, traj);
    lins = linearize_trajectory(problem, traj);
  }

  // Exact Hessian of the reduced objective: add costate-weighted dynamics
  // curvature. The linear term is replaced by the upstream gradient.
  const auto mu = costates(quads, lins);
  std::vector<StageQuadratization> H(T + 1);
  for (int t = 0; t < T; ++t) {
    H[t].Q_xx = quads[t].Q_xx;
    H[t].Q_uu = quads[t].Q_uu;
    H[t].Q_ux = quads[t].Q_ux;
    if (problem.dynamics.curvature) {
      const auto c = problem.dynamics.curvature(traj.states[t], traj.controls[t], mu[t + 1]);
      H[t].Q_xx += c.xx;
      H[t].Q_uu += c.uu;
      H[t].Q_ux += c.ux;
    }
    H[t].Q_xx += problem.cost->state_curvature(traj.states[t]);
    H[t].q_u = grad_u[t];
  }
  H[T].Q_xx = quads[T].Q_xx + problem.cost->state_curvature(traj.states[T]);

  SolutionVJP out;
  double lambda = 0.0;
  TVLQRPolicy pol;
  for (;;) {
    try {
      pol = tvlqr_backward(H, lins, lambda);
      break;
    } catch (const NonPSDError&) {
      out.regularized = true;
      if (lambda == 0.0)
        lambda = std::max(solution.lambda, 1e-6);
      else
        lambda *= 10.0;
      if (lambda > 1e12) throw NonPSDError("solution_vjp: Hessian could not be regularized");
    }
  }
  out.lambda = lambda;

  // δv rollout through the linearized dynamics from δx_0 = 0.
  const int n = problem.cost->parameter_dim();
  out.cost_parameter_grad.assign(static_cast<std::size_t>(n), 0.0);
  out.direction.resize(T);
  Eigen::Vector3d dx = Eigen::Vector3d::Zero();
  for (int t = 0; t < T; ++t) {
    const Eigen::Vector2d du = pol.k[t] + pol.K[t] * dx;
    out.direction[t] = du;
    if (n > 0)
      problem.cost->accumulate_parameter_vjp(traj.states[t], traj.controls[t], t, dx, du,
                                             out.cost_parameter_grad);
    dx = lins[t].A * dx + lins[t].B * du;
  }
  if (n > 0) problem.cost->accumulate_terminal_parameter_vjp(traj.states[T], dx, out.cost_parameter_grad);

  out.theta_grad = theta_backward ? theta_backward(out.cost_parameter_grad) : out.cost_parameter_grad;
  return out;
}

}  // namespace pmpc
