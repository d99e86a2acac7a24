#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "pmpc/dynamics.hpp"
#include "pmpc/gridworld.hpp"

namespace pmpc {

struct LabeledTrajectory {
  std::string label;
  Trajectory traj;
};

/// Parses label,t,px,py,phi,u_v,u_omega records (header line optional),
/// grouping consecutive rows by label.
std::vector<LabeledTrajectory> read_trajectories(std::istream& in);

/// Occupied cells as filled squares; labels ending in "_expert" are drawn
/// dashed, "_goal" as a circle marker, everything else as a solid policy
/// stroke. Only labels starting with `prefix` are drawn.
void render_svg(std::ostream& out, const OccupancyGrid& grid,
                const std::vector<LabeledTrajectory>& trajs, const std::string& prefix = "");

}  // namespace pmpc
