#include <cmath>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "pmpc/ilqr.hpp"
#include "pmpc/policy.hpp"

using namespace pmpc;

namespace {

class ZeroCost final : public CostModel {
 public:
  double stage(const State&, const Control&, int) const override { return 0.0; }
  double terminal(const State&) const override { return 0.0; }
  StageQuadratization quadratize_stage(const State&, const Control&, int) const override { return {}; }
  StageQuadratization quadratize_terminal(const State&) const override { return {}; }
};

MPCProblem nav_problem(int T, const StaticCostConfig& cost, std::shared_ptr<const DistanceField> field,
                       std::optional<ResidualQuadratic> res = std::nullopt) {
  MPCProblem p;
  p.horizon = T;
  p.dynamics = DynamicsModel::differential_drive(DynamicsConfig{});
  p.cost = std::make_shared<NavigationCost>(cost, std::move(field), T, std::move(res));
  return p;
}

// c_t = ½|u|² + θᵀu with static state; u* = -θ.
class TiltedCost final : public CostModel {
 public:
  explicit TiltedCost(Eigen::Vector2d theta) : theta_(std::move(theta)) {}
  double stage(const State&, const Control& u, int) const override {
    return 0.5 * u.vec().squaredNorm() + theta_.dot(u.vec());
  }
  double terminal(const State&) const override { return 0.0; }
  StageQuadratization quadratize_stage(const State&, const Control& u, int) const override {
    StageQuadratization q;
    q.value = stage({}, u, 0);
    q.q_u = u.vec() + theta_;
    q.Q_uu = Eigen::Matrix2d::Identity();
    return q;
  }
  StageQuadratization quadratize_terminal(const State&) const override { return {}; }
  int parameter_dim() const override { return 2; }
  void accumulate_parameter_vjp(const State&, const Control&, int, const Eigen::Vector3d&,
                                const Eigen::Vector2d& du, std::span<double> grad) const override {
    grad[0] += du[0];
    grad[1] += du[1];
  }

 private:
  Eigen::Vector2d theta_;
};

DynamicsModel frozen() {
  DynamicsModel d;
  d.step = [](const State& x, const Control&) { return x; };
  d.linearize = [](const State&, const Control&) {
    return std::pair{StateJacobian(StateJacobian::Identity()), ControlJacobian(ControlJacobian::Zero())};
  };
  d.curvature = [](const State&, const Control&, const Eigen::Vector3d&) {
    return DynamicsCurvature{Eigen::Matrix3d::Zero(), Eigen::Matrix2d::Zero(), Eigen::Matrix<double, 2, 3>::Zero()};
  };
  return d;
}

}  // namespace

TEST_SUITE("ilqr") {
  TEST_CASE("Riccati and dense oracles agree") {
    std::mt19937_64 rng(30);
    for (int k = 0; k < 10; ++k) {
      const auto lq = oracle::random_lq(3 + k, rng);
      const auto a = oracle::riccati_controls(lq);
      const auto b = oracle::dense_controls(lq);
      for (std::size_t t = 0; t < a.size(); ++t) CHECK((a[t] - b[t]).norm() < 1e-9);
    }
  }

  TEST_CASE("one iteration solves LQ problems exactly") {
    std::mt19937_64 rng(31);
    SolverConfig cfg;
    for (int k = 0; k < 10; ++k) {
      const auto lq = oracle::random_lq(4 + 3 * k, rng);
      const auto p = oracle::lq_problem(lq);
      std::vector<Control> u0(static_cast<std::size_t>(lq.horizon), Control{0.3, -0.1});
      const auto sol = solve(p, u0, cfg);
      const auto ref = oracle::dense_controls(lq);
      for (int t = 0; t < lq.horizon; ++t)
        CHECK((sol.trajectory.controls[static_cast<std::size_t>(t)].vec() - ref[static_cast<std::size_t>(t)]).norm() < 1e-8);
      CHECK(sol.accepted_steps >= 1);
      CHECK(sol.converged);
      CHECK(sol.cost == doctest::Approx(trajectory_cost(p, sol.trajectory)));
    }
  }

  TEST_CASE("zero cost leaves the initial controls unchanged") {
    MPCProblem p;
    p.horizon = 6;
    p.dynamics = DynamicsModel::differential_drive(DynamicsConfig{});
    p.cost = std::make_shared<ZeroCost>();
    const std::vector<Control> u0{{0.1, 0.2}, {0.3, 0.4}, {0.5, 0.6}, {0.7, 0.8}, {0.1, 0.0}, {0.0, 0.1}};
    const auto sol = solve(p, u0, SolverConfig{});
    CHECK(sol.converged);
    CHECK(sol.accepted_steps <= 1);
    CHECK(sol.trajectory.controls == u0);
  }

  TEST_CASE("accepted steps strictly decrease the cost") {
    const auto field = std::make_shared<const DistanceField>(distance_field(
        crop_context(make_doorway_world(DoorwaySpec{}, 0), State{-1.0, 0.8, 0.3}).grid));
    std::mt19937_64 rng(32);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (int k = 0; k < 20; ++k) {
      StaticCostConfig c;
      c.goal = {u(rng), u(rng)};
      c.goal_heading = u(rng);
      const auto p = nav_problem(20, c, field);
      const auto sol = solve(p, std::vector<Control>(20), SolverConfig{});
      REQUIRE(sol.cost_history.size() == static_cast<std::size_t>(sol.accepted_steps + 1));
      for (std::size_t i = 1; i < sol.cost_history.size(); ++i) CHECK(sol.cost_history[i] < sol.cost_history[i - 1]);
      CHECK(sol.quadratizations.size() == 21);
      CHECK(sol.linearizations.size() == 20);
    }
  }

  TEST_CASE("adjoint cost gradient matches central differences") {
    std::mt19937_64 rng(33);
    std::normal_distribution<double> n(0.0, 0.5);
    const auto field = std::make_shared<const DistanceField>(distance_field(
        crop_context(make_doorway_world(DoorwaySpec{}, 0), State{-0.6, 0.2, 0.0}).grid));
    StaticCostConfig c;
    c.goal = {1.0, -0.5};
    std::vector<double> e(kEmbeddingDim);
    for (auto& v : e) v = n(rng);
    const auto p = nav_problem(10, c, field, embed_to_quadratic(e));
    std::vector<double> flat(20);
    for (auto& v : flat) v = n(rng);
    auto J = [&](std::span<const double> v) {
      std::vector<Control> u;
      for (int t = 0; t < 10; ++t) u.push_back({v[2 * t], v[2 * t + 1]});
      return trajectory_cost(p, rollout(p, u));
    };
    std::vector<Control> u;
    for (int t = 0; t < 10; ++t) u.push_back({flat[2 * t], flat[2 * t + 1]});
    const auto g = cost_gradient(p, rollout(p, u));
    std::vector<double> mine;
    for (const auto& v : g) {
      mine.push_back(v[0]);
      mine.push_back(v[1]);
    }
    CHECK(oracle::max_rel_error(mine, oracle::numeric_gradient(J, flat, 1e-7), 1e-4) < 1e-4);
  }

  TEST_CASE("TVLQR expected reduction is the quadratic model") {
    std::mt19937_64 rng(34);
    const auto lq = oracle::random_lq(8, rng);
    const auto p = oracle::lq_problem(lq);
    const auto nominal = rollout(p, std::vector<Control>(8));
    const auto pol = tvlqr_backward(quadratize_trajectory(p, nominal), linearize_trajectory(p, nominal), 0.0);
    const double J0 = trajectory_cost(p, nominal);
    for (double a : {1.0, 0.5, 0.25}) {
      const auto [cand, cost] = forward_pass(p, nominal, pol, a);
      // Exact for an LQ problem.
      CHECK(J0 - cost == doctest::Approx(pol.expected_reduction(a)).epsilon(1e-8));
    }
  }

  TEST_CASE("regularization makes an indefinite problem solvable") {
    std::mt19937_64 rng(35);
    auto lq = oracle::random_lq(5, rng);
    for (auto& H : lq.H) H.bottomRightCorner<2, 2>() -= 5.0 * Eigen::Matrix2d::Identity();
    const auto p = oracle::lq_problem(lq);
    const auto quads = quadratize_trajectory(p, rollout(p, std::vector<Control>(5)));
    const auto lins = linearize_trajectory(p, rollout(p, std::vector<Control>(5)));
    CHECK_THROWS_AS(tvlqr_backward(quads, lins, 0.0), NonPSDError);
    CHECK_NOTHROW(tvlqr_backward(quads, lins, 1e3));
  }

  TEST_CASE("VJP matches re-solved finite differences without obstacles") {
    std::mt19937_64 rng(36);
    std::normal_distribution<double> n(0.0, 0.3);
    StaticCostConfig c;
    c.w_collision = 0.0;
    c.goal = {0.8, 0.2};
    std::vector<double> e(kEmbeddingDim);
    for (auto& v : e) v = n(rng);
    const int T = 6;
    auto build = [&](std::span<const double> th) { return nav_problem(T, c, nullptr, embed_to_quadratic(th)); };
    SolverConfig tight;
    tight.max_iterations = 300;
    tight.tolerance = 1e-12;
    tight.rel_cost_tolerance = 1e-15;
    const auto base = build(e);
    const auto sol = solve(base, std::vector<Control>(T), tight);
    std::vector<Eigen::Vector2d> g(T);
    for (auto& v : g) v = {n(rng), n(rng)};
    const auto vjp = solution_vjp(base, sol, g);
    auto L = [&](std::span<const double> th) {
      const auto s = solve(build(th), sol.trajectory.controls, tight);
      double l = 0.0;
      for (int t = 0; t < T; ++t) l += g[static_cast<std::size_t>(t)].dot(s.trajectory.controls[static_cast<std::size_t>(t)].vec());
      return l;
    };
    const auto fd = oracle::numeric_gradient(L, e, 1e-3);
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < fd.size(); ++k) {
      num += std::pow(vjp.theta_grad[k] - fd[k], 2);
      den += fd[k] * fd[k];
    }
    CHECK(std::sqrt(num / den) < 1e-4);
    CHECK(vjp.direction.size() == static_cast<std::size_t>(T));
  }

  TEST_CASE("theta_backward composes with the cost-parameter gradient") {
    StaticCostConfig c;
    c.goal = {1.0, 0.0};
    std::vector<double> e(kEmbeddingDim, 0.05);
    const auto p = nav_problem(5, c, nullptr, embed_to_quadratic(e));
    const auto sol = solve(p, std::vector<Control>(5), SolverConfig{});
    const std::vector<Eigen::Vector2d> g(5, Eigen::Vector2d(1.0, -1.0));
    const auto vjp = solution_vjp(p, sol, g, [](std::span<const double> gc) {
      return std::vector<double>{2.0 * gc[0], gc[29]};
    });
    REQUIRE(vjp.theta_grad.size() == 2);
    CHECK(vjp.theta_grad[0] == doctest::Approx(2.0 * vjp.cost_parameter_grad[0]));
    CHECK(vjp.theta_grad[1] == doctest::Approx(vjp.cost_parameter_grad[29]));
  }

  TEST_CASE("greedy RMPC facing a wall across from the goal stays on its side") {
    const auto world = make_doorway_world(DoorwaySpec{}, 0);
    const State pose{-0.7, 1.8, 0.0};
    const auto ctx = crop_context(world, pose);
    const auto field = std::make_shared<const DistanceField>(distance_field(ctx.grid));
    const State goal = to_local(State{1.5, 1.8, 0.0}, pose);
    PlannerSettings s;
    const auto p = make_context_problem(s, field, goal);
    const auto sol = solve(p, std::vector<Control>(20), s.solver);
    for (const auto& x : sol.trajectory.states) CHECK(to_world(x, pose).px < -0.05);
    const auto& last = to_world(sol.trajectory.states.back(), pose);
    CHECK(last.px > -0.8);
  }

  TEST_CASE("problem validation") {
    MPCProblem p;
    CHECK_THROWS(p.validate());
    p.dynamics = DynamicsModel::differential_drive(DynamicsConfig{});
    p.cost = std::make_shared<ZeroCost>();
    CHECK_NOTHROW(p.validate());
    CHECK_THROWS(solve(p, std::vector<Control>(3), SolverConfig{}));
  }

  TEST_CASE("one-step Newton without dynamics coupling") {
    StageQuadratization s;
    s.Q_uu = Eigen::Matrix2d::Identity() * 2.0;
    s.q_u = {2.0, 2.0};
    const std::vector<StageQuadratization> quads{s, StageQuadratization{}};
    const std::vector<Linearization> lins{{StateJacobian::Identity(), ControlJacobian::Zero()}};
    const auto pol = tvlqr_backward(quads, lins, 0.0);
    CHECK(pol.k[0].isApprox(Eigen::Vector2d(-1.0, -1.0)));
    CHECK(pol.K[0].isZero());
    const auto damped = tvlqr_backward(quads, lins, 1e12);
    CHECK(damped.k[0].norm() < 1e-10);
  }

  TEST_CASE("long-horizon gains approach the DARE gain") {
    Eigen::Matrix3d A;
    A << 1.0, 0.1, 0.0, 0.0, 1.0, 0.1, 0.0, 0.0, 0.95;
    ControlJacobian B;
    B << 0.0, 0.1, 0.1, 0.0, 0.05, 0.1;
    const Eigen::Matrix3d Q = Eigen::Vector3d(1.0, 0.5, 0.2).asDiagonal();
    const Eigen::Matrix2d R = Eigen::Vector2d(0.3, 0.7).asDiagonal();
    // Fixed-point iteration of the algebraic Riccati equation.
    Eigen::Matrix3d P = Q;
    for (int k = 0; k < 20000; ++k)
      P = Q + A.transpose() * P * A -
          A.transpose() * P * B * (R + B.transpose() * P * B).inverse() * B.transpose() * P * A;
    const FeedbackGain K_dare = -(R + B.transpose() * P * B).inverse() * B.transpose() * P * A;
    const int T = 3000;
    StageQuadratization s;
    s.Q_xx = Q;
    s.Q_uu = R;
    std::vector<StageQuadratization> quads(T + 1, s);
    quads.back() = StageQuadratization{};
    quads.back().Q_xx = Q;
    const std::vector<Linearization> lins(T, Linearization{A, B});
    const auto pol = tvlqr_backward(quads, lins, 0.0);
    CHECK((pol.K[0] - K_dare).norm() < 1e-8);
  }

  TEST_CASE("forward pass with a zero step returns the nominal") {
    std::mt19937_64 rng(37);
    const auto lq = oracle::random_lq(7, rng);
    const auto p = oracle::lq_problem(lq);
    const auto nominal = rollout(p, std::vector<Control>(7, Control{0.2, -0.3}));
    const auto pol = tvlqr_backward(quadratize_trajectory(p, nominal), linearize_trajectory(p, nominal), 0.0);
    const auto [cand, cost] = forward_pass(p, nominal, pol, 0.0);
    CHECK(cand.states == nominal.states);
    CHECK(cand.controls == nominal.controls);
    CHECK(cost == trajectory_cost(p, nominal));
    const auto [full, c1] = forward_pass(p, nominal, pol, 1.0);
    CHECK(trajectory_cost(p, nominal) - c1 == doctest::Approx(pol.expected_reduction(1.0)).epsilon(1e-10));
    const auto replay = rollout(p, full.controls);
    CHECK(replay.states == full.states);
  }

  TEST_CASE("VJP closed form for a tilted quadratic") {
    const Eigen::Vector2d theta(0.4, -0.9), target(1.0, 0.5);
    MPCProblem p;
    p.horizon = 1;
    p.dynamics = frozen();
    p.cost = std::make_shared<TiltedCost>(theta);
    const auto sol = solve(p, std::vector<Control>(1), SolverConfig{});
    REQUIRE(sol.trajectory.controls[0].vec().isApprox(-theta));
    const Eigen::Vector2d gu = sol.trajectory.controls[0].vec() - target;
    const auto vjp = solution_vjp(p, sol, std::vector<Eigen::Vector2d>{gu});
    CHECK(vjp.theta_grad[0] == doctest::Approx(-gu[0]));
    CHECK(vjp.theta_grad[1] == doctest::Approx(-gu[1]));
    const auto zero = solution_vjp(p, sol, std::vector<Eigen::Vector2d>{Eigen::Vector2d::Zero()});
    CHECK(zero.theta_grad[0] == 0.0);
    CHECK(zero.theta_grad[1] == 0.0);
  }

  TEST_CASE("solve is deterministic") {
    StaticCostConfig c;
    c.goal = {1.2, -0.7};
    const auto field = std::make_shared<const DistanceField>(distance_field(
        crop_context(make_doorway_world(DoorwaySpec{}, 0), State{-0.8, 0.5, 0.1}).grid));
    const auto p = nav_problem(20, c, field);
    const auto a = solve(p, std::vector<Control>(20), SolverConfig{});
    const auto b = solve(p, std::vector<Control>(20), SolverConfig{});
    CHECK(a.trajectory.controls == b.trajectory.controls);
    CHECK(a.cost == b.cost);
  }

  TEST_CASE("non-finite candidates are rejected and the best iterate returned") {
    class Blowup final : public CostModel {
     public:
      double stage(const State&, const Control& u, int) const override {
        return u.v > 0.05 ? std::nan("") : (u.v - 1.0) * (u.v - 1.0);
      }
      double terminal(const State&) const override { return 0.0; }
      StageQuadratization quadratize_stage(const State& x, const Control& u, int t) const override {
        StageQuadratization q;
        q.value = stage(x, u, t);
        q.q_u = {2.0 * (u.v - 1.0), 0.0};
        q.Q_uu = Eigen::Vector2d(2.0, 1.0).asDiagonal();
        return q;
      }
      StageQuadratization quadratize_terminal(const State&) const override { return {}; }
    };
    MPCProblem p;
    p.horizon = 3;
    p.dynamics = frozen();
    p.cost = std::make_shared<Blowup>();
    const auto sol = solve(p, std::vector<Control>(3), SolverConfig{});
    CHECK_FALSE(sol.converged);
    CHECK(std::isfinite(sol.cost));
    CHECK(sol.cost <= 3.0);
    for (const auto& u : sol.trajectory.controls) CHECK(u.v <= 0.05);
  }
}
