#pragma once

#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace pmpc {

/// Planar pose of a differential-drive robot. Heading is unwrapped.
struct State {
  double px = 0.0;   ///< x position [m]
  double py = 0.0;   ///< y position [m]
  double phi = 0.0;  ///< heading [rad]

  Eigen::Vector3d vec() const { return {px, py, phi}; }
  static State from(const Eigen::Vector3d& v) { return {v[0], v[1], v[2]}; }

  bool operator==(const State&) const = default;
};

/// Body-frame command.
struct Control {
  double v = 0.0;      ///< forward speed [m/s]
  double omega = 0.0;  ///< turn rate [rad/s]

  Eigen::Vector2d vec() const { return {v, omega}; }
  static Control from(const Eigen::Vector2d& u) { return {u[0], u[1]}; }

  bool operator==(const Control&) const = default;
};

struct DynamicsConfig {
  double dt = 0.1;
  double v_min = -0.8;
  double v_max = 0.8;
  double omega_min = -1.2;
  double omega_max = 1.2;

  void validate() const;
};

/// states.size() == controls.size() + 1.
struct Trajectory {
  std::vector<State> states;
  std::vector<Control> controls;
  double dt = 0.1;

  int horizon() const { return static_cast<int>(controls.size()); }
};

using StateJacobian = Eigen::Matrix3d;
using ControlJacobian = Eigen::Matrix<double, 3, 2>;

/// Explicit Euler step of the unicycle model.
State step(const State& x, const Control& u, const DynamicsConfig& cfg);

Trajectory rollout(const State& x0, std::span<const Control> controls,
                   const DynamicsConfig& cfg);

/// Analytic Jacobians (A = df/dx, B = df/du) of step().
std::pair<StateJacobian, ControlJacobian> linearize(const State& x,
                                                    const Control& u,
                                                    const DynamicsConfig& cfg);

/// Second-order term of step() contracted with a costate:
/// returns (sum_i lam_i d2f_i/dx2, sum_i lam_i d2f_i/du2, sum_i lam_i d2f_i/dudx).
struct DynamicsCurvature {
  Eigen::Matrix3d xx;
  Eigen::Matrix2d uu;
  Eigen::Matrix<double, 2, 3> ux;
};
DynamicsCurvature curvature(const State& x, const Control& u,
                            const Eigen::Vector3d& costate,
                            const DynamicsConfig& cfg);

Control clamp_control(const Control& u, const DynamicsConfig& cfg);

/// Rigid transform helpers between the world and a local frame anchored at
/// `origin` (position + heading).
State to_local(const State& world, const State& origin);
State to_world(const State& local, const State& origin);
Eigen::Vector2d to_local(const Eigen::Vector2d& world_point,
                         const State& origin);
Eigen::Vector2d to_world(const Eigen::Vector2d& local_point,
                         const State& origin);

}  // namespace pmpc
