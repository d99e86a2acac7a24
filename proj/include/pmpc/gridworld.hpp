#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "pmpc/dynamics.hpp"

namespace pmpc {

/// Boolean occupancy raster. Cell (i, j) has its center at
/// origin + (i, j) * resolution; i indexes x (columns), j indexes y (rows).
/// Storage is row-major: cells[j * width + i].
struct OccupancyGrid {
  double resolution = 0.05;
  Eigen::Vector2d origin = Eigen::Vector2d::Zero();
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> cells;

  OccupancyGrid() = default;
  OccupancyGrid(int w, int h, double res, Eigen::Vector2d org);

  void validate() const;
  bool in_bounds(int i, int j) const { return i >= 0 && j >= 0 && i < width && j < height; }
  bool occupied(int i, int j) const { return cells[index(i, j)] != 0; }
  void set(int i, int j, bool occ) { cells[index(i, j)] = occ ? 1 : 0; }
  std::size_t index(int i, int j) const {
    return static_cast<std::size_t>(j) * static_cast<std::size_t>(width) +
           static_cast<std::size_t>(i);
  }
  Eigen::Vector2d cell_center(int i, int j) const {
    return origin + resolution * Eigen::Vector2d(i, j);
  }
  /// Nearest cell to a world point (may be out of bounds).
  std::pair<int, int> nearest_cell(const Eigen::Vector2d& p) const;
  bool operator==(const OccupancyGrid&) const = default;
};

/// Value returned in every cell when the grid holds no obstacles.
inline constexpr double kUnreachableDistance = 1e6;

/// Signed Euclidean distance per cell [m]: positive in free cells (distance to
/// the nearest occupied cell center), and resolution minus the distance to the
/// nearest free cell center inside obstacles, so boundary obstacle cells read
/// zero and the field stays 1-Lipschitz across the boundary.
struct DistanceField {
  double resolution = 0.05;
  Eigen::Vector2d origin = Eigen::Vector2d::Zero();
  int width = 0;
  int height = 0;
  std::vector<double> values;

  double at(int i, int j) const {
    return values[static_cast<std::size_t>(j) * static_cast<std::size_t>(width) +
                  static_cast<std::size_t>(i)];
  }
};

/// Exact Euclidean distance transform (separable lower-envelope algorithm).
DistanceField distance_field(const OccupancyGrid& grid);

struct DistanceSample {
  double distance = 0.0;            ///< [m]
  Eigen::Vector2d gradient = Eigen::Vector2d::Zero();  ///< d distance / d point
  double cross = 0.0;               ///< d² distance / dx dy; the pure second derivatives vanish
};

/// Bilinear interpolation of the field; points outside the field extent are
/// clamped to the border.
DistanceSample signed_distance(const DistanceField& field,
                               const Eigen::Vector2d& point);

struct DoorwaySpec {
  double extent = 6.0;            ///< square room side [m]
  double resolution = 0.05;
  double wall_x = 0.0;            ///< wall centerline, room-centered coords [m]
  double doorway_width = 0.8;
  double wall_thickness = 0.1;
  double door_offset_range = 0.0; ///< door center drawn from U[-r, r] along the wall
  double clearance = 0.5;         ///< start/goal distance from any obstacle [m]
  double inflation = 0.3;         ///< planner inflation radius [m]

  void validate() const;
};

/// Square room centered on the world origin, bounded by one-cell walls and
/// bisected by a wall at x = wall_x with a single gap.
OccupancyGrid make_doorway_world(const DoorwaySpec& spec, std::uint64_t seed);

/// Door center along y for the given world seed.
double door_center(const DoorwaySpec& spec, std::uint64_t seed);

struct PlannerPath {
  std::vector<Eigen::Vector2d> waypoints;
  double length = 0.0;
};

struct NoPathError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// 8-connected Dijkstra on the grid inflated by `inflation` meters. Ties are
/// broken by cell index.
PlannerPath dijkstra_plan(const OccupancyGrid& grid, const Eigen::Vector2d& start,
                          const Eigen::Vector2d& goal, double inflation);

/// Same as above, reusing a precomputed distance field of `grid`.
PlannerPath dijkstra_plan(const OccupancyGrid& grid, const DistanceField& field,
                          const Eigen::Vector2d& start,
                          const Eigen::Vector2d& goal, double inflation);

struct StartGoal {
  State start;
  State goal;  ///< goal position and heading
  int start_side = 0;  ///< -1 west of the wall, +1 east
  int goal_side = 0;
};

/// Start and goal on opposite sides of the wall, both at least
/// `spec.clearance` from any obstacle.
StartGoal sample_start_goal(const DoorwaySpec& spec, std::uint64_t seed);

/// Variant with both samples on one side (control experiments).
StartGoal sample_start_goal_same_side(const DoorwaySpec& spec, std::uint64_t seed);

inline constexpr int kContextSide = 100;
inline constexpr double kContextResolution = 0.05;

/// Robot-frame occupancy window of kContextSide^2 cells covering
/// [-2.5, 2.5] m on both axes; +x is the robot heading.
struct Context {
  OccupancyGrid grid;
  State pose;  ///< world pose the crop was taken at
};

Context crop_context(const OccupancyGrid& world, const State& pose);

/// Grid in the robot frame with the given side, used for contexts of other
/// sizes in tests.
Context crop_context(const OccupancyGrid& world, const State& pose, int side,
                     double resolution);

}  // namespace pmpc
