#include <cmath>
#include <sstream>

#include "doctest.h"
#include "pmpc/policy.hpp"

using namespace pmpc;

namespace {

Reference straight_to(const State& goal) {
  Reference r;
  r.goal_only = true;
  r.states.push_back(goal);
  return r;
}

Policy rmpc() {
  Policy p;
  p.kind = PolicyKind::Rmpc;
  return p;
}

Policy zero_pmpc() {
  Policy p;
  p.kind = PolicyKind::Pmpc;
  auto model = std::make_shared<const Performer>(PerformerConfig::desk(), 9);
  p.params = model->init_params();
  p.model = model;
  return p;
}

bool same(const EpisodeResult& a, const EpisodeResult& b) {
  return a.reason == b.reason && a.steps == b.steps && a.trajectory.states == b.trajectory.states &&
         a.trajectory.controls == b.trajectory.controls;
}

}  // namespace

TEST_SUITE("policy") {
  TEST_CASE("tracking drives towards the reference") {
    const PlannerSettings s;
    const auto ahead = tracking_mpc(straight_to({1.0, 0.0, 0.0}), nullptr, s);
    CHECK_FALSE(ahead.failed);
    CHECK(ahead.u.v > 0.0);
    CHECK(std::abs(ahead.u.omega) < 1e-6);
    const auto left = tracking_mpc(straight_to({0.5, 0.5, M_PI / 2}), nullptr, s);
    CHECK(left.u.omega > 0.0);
    const auto right = tracking_mpc(straight_to({0.5, -0.5, -M_PI / 2}), nullptr, s);
    CHECK(right.u.omega < 0.0);
    CHECK(left.controls.size() == 20);
  }

  TEST_CASE("tracking commands respect the limits") {
    PlannerSettings s;
    s.cost.w_goal = 1e4;
    for (const State g : {State{50.0, 0.0, 0.0}, State{0.0, 50.0, 3.0}, State{-50.0, -50.0, 0.0}}) {
      const auto r = tracking_mpc(straight_to(g), nullptr, s);
      CHECK(std::abs(r.u.v) <= 0.8);
      CHECK(std::abs(r.u.omega) <= 1.2);
    }
  }

  TEST_CASE("reference plan is dynamically consistent") {
    const auto world = make_doorway_world(DoorwaySpec{}, 0);
    const State pose{-1.5, -1.0, 0.4};
    const auto ctx = crop_context(world, pose);
    const auto field = std::make_shared<const DistanceField>(distance_field(ctx.grid));
    const auto ref = plan_reference(rmpc(), ctx, field, to_local(State{-0.5, -0.5, 0.0}, pose));
    REQUIRE_FALSE(ref.failed);
    REQUIRE(ref.states.size() == 21);
    CHECK(ref.states[0] == State{});
    const auto tr = rollout(State{}, ref.controls, DynamicsConfig{});
    for (std::size_t t = 0; t < ref.states.size(); ++t) CHECK((tr.states[t].vec() - ref.states[t].vec()).norm() < 1e-12);
  }

  TEST_CASE("an episode starting at the goal ends immediately") {
    const auto world = make_doorway_world(DoorwaySpec{}, 0);
    const State s{-1.0, 1.0, 0.0};
    const auto r = run_episode(world, rmpc(), s, {-0.9, 1.0, 0.0}, EpisodeConfig{});
    CHECK(r.success);
    CHECK(r.reason == Termination::GoalReached);
    CHECK(r.steps == 0);
    CHECK(r.trajectory.states.size() == 1);
  }

  TEST_CASE("same-side episode reaches its goal with clearance") {
    const auto world = make_doorway_world(DoorwaySpec{}, 0);
    const auto r = run_episode(world, rmpc(), {-2.0, -1.5, 0.0}, {-1.0, 1.0, 1.0}, EpisodeConfig{});
    CHECK(r.reason == Termination::GoalReached);
    CHECK(r.min_clearance > 0.0);
    CHECK(r.trajectory.states.size() == r.trajectory.controls.size() + 1);
    for (const auto& u : r.trajectory.controls) {
      CHECK(std::abs(u.v) <= 0.8);
      CHECK(std::abs(u.omega) <= 1.2);
    }
  }

  TEST_CASE("timeout after the step budget") {
    const auto world = make_doorway_world(DoorwaySpec{}, 0);
    EpisodeConfig cfg;
    cfg.max_steps = 3;
    const auto r = run_episode(world, rmpc(), {-2.0, -1.5, 0.0}, {2.0, 1.5, 0.0}, cfg);
    CHECK(r.reason == Termination::Timeout);
    CHECK(r.steps == 3);
  }

  TEST_CASE("zero-readout Performer-MPC reproduces RMPC") {
    EvalOptions o;
    o.trials = 3;
    o.seed = 77;
    o.with_expert = false;
    const auto a = eval_doorway(rmpc(), o);
    const auto b = eval_doorway(zero_pmpc(), o);
    REQUIRE(a.rows.size() == 3);
    for (std::size_t i = 0; i < a.rows.size(); ++i) {
      CHECK(a.rows[i].index == static_cast<int>(i));
      CHECK(same(a.rows[i].result, b.rows[i].result));
    }
    CHECK(a.successes == b.successes);
  }

  TEST_CASE("evaluation pairs depend only on seed plus index") {
    EvalOptions o;
    o.trials = 2;
    o.seed = 500;
    o.with_expert = false;
    o.episode.max_steps = 2;
    const auto a = eval_doorway(rmpc(), o);
    o.seed = 501;
    o.trials = 1;
    const auto b = eval_doorway(rmpc(), o);
    CHECK(a.rows[1].start == b.rows[0].start);
    CHECK(a.rows[1].goal == b.rows[0].goal);
    CHECK(same(a.rows[1].result, b.rows[0].result));
  }

  TEST_CASE("report and trajectory output") {
    EvalReport rep;
    rep.trials = 1;
    rep.successes = 1;
    TrialSummary row;
    row.result.success = true;
    row.result.reason = Termination::GoalReached;
    row.result.trajectory = rollout(State{}, std::vector<Control>{{0.5, 0.0}}, DynamicsConfig{});
    rep.rows.push_back(row);
    std::ostringstream os;
    write_eval_report(os, rep);
    const auto text = os.str();
    CHECK(text.starts_with("trial,start_x,"));
    CHECK(text.find("successes=1\n") != std::string::npos);
    CHECK(text.find("policy=rmpc") != std::string::npos);

    std::ostringstream tr;
    write_trajectory_header(tr);
    write_trajectory(tr, "x", row.result.trajectory);
    CHECK(tr.str() == "label,t,px,py,phi,u_v,u_omega\nx,0,0,0,0,0.5,0\nx,1,0.05,0,0,,\n");
  }

  TEST_CASE("policy names round-trip") {
    for (auto k : {PolicyKind::Rmpc, PolicyKind::Ep, PolicyKind::Pmpc}) CHECK(parse_policy(policy_name(k)) == k);
    CHECK_THROWS(parse_policy("mpc"));
    Policy p;
    p.kind = PolicyKind::Pmpc;
    CHECK_THROWS(p.validate());
  }

  TEST_CASE("holding at the origin gives a near-zero command") {
    const auto r = tracking_mpc(straight_to(State{}), nullptr, PlannerSettings{});
    CHECK(r.u.vec().norm() < 1e-3);
  }

  TEST_CASE("RMPC in free space plans onto a goal ahead") {
    const OccupancyGrid open(200, 200, 0.05, Eigen::Vector2d(-5.0, -5.0));
    const State pose{0.3, -0.2, 0.5};
    const auto ctx = crop_context(open, pose);
    const auto field = std::make_shared<const DistanceField>(distance_field(ctx.grid));
    const auto ref = plan_reference(rmpc(), ctx, field, State{1.0, 0.0, 0.0});
    REQUIRE_FALSE(ref.failed);
    CHECK(std::hypot(ref.states.back().px - 1.0, ref.states.back().py) < 0.1);
  }

  TEST_CASE("EP with zero parameters targets the context origin") {
    Policy ep;
    ep.kind = PolicyKind::Ep;
    auto cfg = PerformerConfig::desk();
    cfg.output_dim = 3;
    auto model = std::make_shared<const Performer>(cfg, 2);
    ep.params = model->init_params();
    ep.model = model;
    const auto world = make_doorway_world(DoorwaySpec{}, 0);
    const auto ctx = crop_context(world, State{-1.0, 0.0, 0.0});
    const auto ref = plan_reference(ep, ctx, nullptr, State{2.0, 0.0, 0.0});
    REQUIRE(ref.goal_only);
    CHECK(ref.states[0] == State{});
  }

  TEST_CASE("tracking towards a point behind the wall stays clear of it") {
    const auto world = make_doorway_world(DoorwaySpec{}, 0);
    const State pose{-0.6, 1.5, 0.0};
    const auto ctx = crop_context(world, pose);
    const auto field = std::make_shared<const DistanceField>(distance_field(ctx.grid));
    const PlannerSettings s;
    const auto r = tracking_mpc(straight_to({1.2, 0.0, 0.0}), field, s);
    REQUIRE_FALSE(r.failed);
    const auto plan = rollout(State{}, r.controls, s.dynamics);
    for (const auto& x : plan.states) CHECK(pose_clearance(*field, x, s.cost) > 0.0);
  }

  TEST_CASE("RMPC across the wall away from the gap times out at the wall") {
    const auto world = make_doorway_world(DoorwaySpec{}, 0);
    const auto r = run_episode(world, rmpc(), {-1.5, 1.8, 0.0}, {1.5, 1.8, 0.0}, EpisodeConfig{});
    CHECK(r.reason == Termination::Timeout);
    CHECK(r.steps == 600);
    const auto& last = r.trajectory.states.back();
    CHECK(last.px < 0.0);
    CHECK(last.px > -0.6);
    CHECK(r.min_clearance > 0.0);
  }

  TEST_CASE("RMPC succeeds on same-side pairs") {
    EvalOptions o;
    o.trials = 40;
    o.seed = 3000;
    o.with_expert = false;
    o.same_side = true;
    const auto rep = eval_doorway(rmpc(), o);
    CHECK(rep.successes >= 38);
    for (const auto& row : rep.rows) {
      if (row.result.reason == Termination::GoalReached) CHECK(row.result.min_clearance >= 0.0);
      for (const auto& u : row.result.trajectory.controls) {
        CHECK(std::abs(u.v) <= 0.8);
        CHECK(std::abs(u.omega) <= 1.2);
      }
      const auto replay = rollout(row.result.trajectory.states[0], row.result.trajectory.controls, DynamicsConfig{});
      CHECK(replay.states == row.result.trajectory.states);
    }
  }

  TEST_CASE("evaluation is deterministic") {
    EvalOptions o;
    o.trials = 3;
    o.seed = 41;
    o.with_expert = false;
    o.episode.max_steps = 30;
    const auto a = eval_doorway(rmpc(), o);
    const auto b = eval_doorway(rmpc(), o);
    std::ostringstream sa, sb;
    write_eval_report(sa, a);
    write_eval_report(sb, b);
    CHECK(sa.str() == sb.str());
    for (std::size_t i = 0; i < a.rows.size(); ++i) CHECK(same(a.rows[i].result, b.rows[i].result));
  }
}
