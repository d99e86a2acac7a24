#include "pmpc/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace pmpc {

void DynamicsConfig::validate() const {
  if (!(dt > 0.0)) throw std::invalid_argument("dynamics: dt must be positive");
  if (!(v_min < v_max) || !(omega_min < omega_max))
    throw std::invalid_argument("dynamics: limits must satisfy min < max");
}

State step(const State& x, const Control& u, const DynamicsConfig& cfg) {
  return {x.px + cfg.dt * u.v * std::cos(x.phi),
          x.py + cfg.dt * u.v * std::sin(x.phi),
          x.phi + cfg.dt * u.omega};
}

Trajectory rollout(const State& x0, std::span<const Control> controls,
                   const DynamicsConfig& cfg) {
  Trajectory traj;
  traj.dt = cfg.dt;
  traj.controls.assign(controls.begin(), controls.end());
  traj.states.reserve(controls.size() + 1);
  traj.states.push_back(x0);
  for (const auto& u : controls) traj.states.push_back(step(traj.states.back(), u, cfg));
  return traj;
}

std::pair<StateJacobian, ControlJacobian> linearize(const State& x,
                                                    const Control& u,
                                                    const DynamicsConfig& cfg) {
  const double c = std::cos(x.phi);
  const double s = std::sin(x.phi);
  StateJacobian A = StateJacobian::Identity();
  A(0, 2) = -cfg.dt * u.v * s;
  A(1, 2) = cfg.dt * u.v * c;
  ControlJacobian B = ControlJacobian::Zero();
  B(0, 0) = cfg.dt * c;
  B(1, 0) = cfg.dt * s;
  B(2, 1) = cfg.dt;
  return {A, B};
}

DynamicsCurvature curvature(const State& x, const Control& u,
                            const Eigen::Vector3d& costate,
                            const DynamicsConfig& cfg) {
  const double c = std::cos(x.phi);
  const double s = std::sin(x.phi);
  DynamicsCurvature out{Eigen::Matrix3d::Zero(), Eigen::Matrix2d::Zero(),
                        Eigen::Matrix<double, 2, 3>::Zero()};
  // f0 = px + dt v cos(phi), f1 = py + dt v sin(phi); f2 is linear.
  out.xx(2, 2) = cfg.dt * u.v * (-c * costate[0] - s * costate[1]);
  out.ux(0, 2) = cfg.dt * (-s * costate[0] + c * costate[1]);
  return out;
}

Control clamp_control(const Control& u, const DynamicsConfig& cfg) {
  return {std::clamp(u.v, cfg.v_min, cfg.v_max),
          std::clamp(u.omega, cfg.omega_min, cfg.omega_max)};
}

Eigen::Vector2d to_local(const Eigen::Vector2d& world_point,
                         const State& origin) {
  const double c = std::cos(origin.phi);
  const double s = std::sin(origin.phi);
  const double dx = world_point[0] - origin.px;
  const double dy = world_point[1] - origin.py;
  return {c * dx + s * dy, -s * dx + c * dy};
}

Eigen::Vector2d to_world(const Eigen::Vector2d& local_point,
                         const State& origin) {
  const double c = std::cos(origin.phi);
  const double s = std::sin(origin.phi);
  return {origin.px + c * local_point[0] - s * local_point[1],
          origin.py + s * local_point[0] + c * local_point[1]};
}

State to_local(const State& world, const State& origin) {
  const auto p = to_local(Eigen::Vector2d(world.px, world.py), origin);
  return {p[0], p[1], world.phi - origin.phi};
}

State to_world(const State& local, const State& origin) {
  const auto p = to_world(Eigen::Vector2d(local.px, local.py), origin);
  return {p[0], p[1], local.phi + origin.phi};
}

}  // namespace pmpc
