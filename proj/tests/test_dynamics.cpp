#include <cmath>
#include <random>

#include "doctest.h"
#include "pmpc/dynamics.hpp"

using namespace pmpc;

TEST_SUITE("dynamics") {
  TEST_CASE("Euler step matches the unicycle update") {
    const DynamicsConfig cfg;
    const State x{1.0, -2.0, 0.3};
    const Control u{0.5, -0.4};
    const State y = step(x, u, cfg);
    CHECK(y.px == doctest::Approx(1.0 + 0.1 * 0.5 * std::cos(0.3)).epsilon(1e-15));
    CHECK(y.py == doctest::Approx(-2.0 + 0.1 * 0.5 * std::sin(0.3)).epsilon(1e-15));
    CHECK(y.phi == doctest::Approx(0.3 - 0.04).epsilon(1e-15));
  }

  TEST_CASE("heading is not wrapped") {
    const DynamicsConfig cfg;
    State x{0.0, 0.0, 3.1};
    for (int k = 0; k < 10; ++k) x = step(x, {0.0, 1.0}, cfg);
    CHECK(x.phi == doctest::Approx(4.1));
  }

  TEST_CASE("Jacobians match central differences") {
    const DynamicsConfig cfg;
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (int trial = 0; trial < 50; ++trial) {
      const State x{u(rng), u(rng), u(rng)};
      const Control c{u(rng), u(rng)};
      const auto [A, B] = linearize(x, c, cfg);
      const double h = 1e-6;
      for (int k = 0; k < 3; ++k) {
        Eigen::Vector3d e = Eigen::Vector3d::Zero();
        e[k] = h;
        const Eigen::Vector3d col =
            (step(State::from(x.vec() + e), c, cfg).vec() - step(State::from(x.vec() - e), c, cfg).vec()) / (2 * h);
        CHECK((col - A.col(k)).norm() < 1e-8);
      }
      for (int k = 0; k < 2; ++k) {
        Eigen::Vector2d e = Eigen::Vector2d::Zero();
        e[k] = h;
        const Eigen::Vector3d col =
            (step(x, Control::from(c.vec() + e), cfg).vec() - step(x, Control::from(c.vec() - e), cfg).vec()) / (2 * h);
        CHECK((col - B.col(k)).norm() < 1e-8);
      }
    }
  }

  TEST_CASE("costate-contracted curvature matches differences of the Jacobians") {
    const DynamicsConfig cfg;
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (int trial = 0; trial < 30; ++trial) {
      const State x{u(rng), u(rng), u(rng)};
      const Control c{u(rng), u(rng)};
      const Eigen::Vector3d lam(u(rng), u(rng), u(rng));
      const auto curv = curvature(x, c, lam, cfg);
      const double h = 1e-6;
      // d/dz of (Aᵀλ, Bᵀλ) gives the Hessian blocks of λ·f.
      for (int k = 0; k < 3; ++k) {
        Eigen::Vector3d e = Eigen::Vector3d::Zero();
        e[k] = h;
        const auto [Ap, Bp] = linearize(State::from(x.vec() + e), c, cfg);
        const auto [Am, Bm] = linearize(State::from(x.vec() - e), c, cfg);
        const Eigen::Vector3d dxx = (Ap.transpose() * lam - Am.transpose() * lam) / (2 * h);
        const Eigen::Vector2d dux = (Bp.transpose() * lam - Bm.transpose() * lam) / (2 * h);
        CHECK((dxx - curv.xx.col(k)).norm() < 1e-7);
        CHECK((dux - curv.ux.col(k)).norm() < 1e-7);
      }
      for (int k = 0; k < 2; ++k) {
        Eigen::Vector2d e = Eigen::Vector2d::Zero();
        e[k] = h;
        const auto [Ap, Bp] = linearize(x, Control::from(c.vec() + e), cfg);
        const auto [Am, Bm] = linearize(x, Control::from(c.vec() - e), cfg);
        const Eigen::Vector2d duu = (Bp.transpose() * lam - Bm.transpose() * lam) / (2 * h);
        CHECK((duu - curv.uu.col(k)).norm() < 1e-7);
      }
    }
  }

  TEST_CASE("rollout has one more state than controls") {
    const std::vector<Control> u(7, Control{0.3, 0.1});
    const Trajectory tr = rollout(State{}, u, DynamicsConfig{});
    CHECK(tr.states.size() == 8);
    CHECK(tr.controls.size() == 7);
    CHECK(tr.states[3] == step(step(step(State{}, u[0], {}), u[1], {}), u[2], {}));
  }

  TEST_CASE("clamp respects the configured limits") {
    const DynamicsConfig cfg;
    CHECK(clamp_control({2.0, -5.0}, cfg) == Control{0.8, -1.2});
    CHECK(clamp_control({-2.0, 5.0}, cfg) == Control{-0.8, 1.2});
    CHECK(clamp_control({0.1, 0.2}, cfg) == Control{0.1, 0.2});
  }

  TEST_CASE("frame transforms round-trip") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    for (int trial = 0; trial < 100; ++trial) {
      const State origin{u(rng), u(rng), u(rng)};
      const State w{u(rng), u(rng), u(rng)};
      const State back = to_world(to_local(w, origin), origin);
      CHECK(std::abs(back.px - w.px) < 1e-12);
      CHECK(std::abs(back.py - w.py) < 1e-12);
      CHECK(std::abs(back.phi - w.phi) < 1e-12);
    }
    const State origin{1.0, 2.0, M_PI / 2};
    const State local = to_local(State{1.0, 3.0, M_PI / 2}, origin);
    CHECK(local.px == doctest::Approx(1.0));
    CHECK(std::abs(local.py) < 1e-12);
    CHECK(std::abs(local.phi) < 1e-12);
  }

  TEST_CASE("config validation rejects inverted limits") {
    DynamicsConfig cfg;
    cfg.v_min = 1.0;
    CHECK_THROWS(cfg.validate());
    cfg = DynamicsConfig{};
    cfg.dt = 0.0;
    CHECK_THROWS(cfg.validate());
  }

  TEST_CASE("rollout examples") {
    const DynamicsConfig cfg;
    const auto still = rollout(State{}, std::vector<Control>(20), cfg);
    for (const auto& s : still.states) CHECK(s == State{});
    const auto line = rollout(State{}, std::vector<Control>(10, Control{1.0, 0.0}), cfg);
    CHECK(line.states.back().px == doctest::Approx(1.0));
    CHECK(line.states.back().py == 0.0);
    // Independent iteration of the Euler recurrence.
    double x = 0.0, y = 0.0, phi = 0.0;
    for (int k = 0; k < 10; ++k) {
      x += 0.1 * 0.5 * std::cos(phi);
      y += 0.1 * 0.5 * std::sin(phi);
      phi += 0.1 * 0.5;
    }
    const auto arc = rollout(State{}, std::vector<Control>(10, Control{0.5, 0.5}), cfg);
    CHECK(arc.states.back().px == doctest::Approx(x).epsilon(1e-14));
    CHECK(arc.states.back().py == doctest::Approx(y).epsilon(1e-14));
    CHECK(arc.states.back().phi == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(x == doctest::Approx(0.4823860900744734).epsilon(1e-12));
    CHECK(y == doctest::Approx(0.11040629494886808).epsilon(1e-12));
  }

  TEST_CASE("Jacobian examples") {
    const DynamicsConfig cfg;
    const auto [A0, B0] = linearize(State{1.0, 2.0, 0.0}, Control{0.0, 0.7}, cfg);
    CHECK(A0 == Eigen::Matrix3d::Identity());
    const auto [A1, B1] = linearize(State{1.0, 2.0, 0.0}, Control{1.0, 0.7}, cfg);
    CHECK(A1(0, 2) == 0.0);
    CHECK(A1(1, 2) == doctest::Approx(0.1));
    CHECK(B1(0, 0) == doctest::Approx(0.1));
    CHECK(B1(2, 1) == doctest::Approx(0.1));
  }
}
