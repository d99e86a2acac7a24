#include "pmpc/gridworld.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <queue>
#include <random>

namespace pmpc {

OccupancyGrid::OccupancyGrid(int w, int h, double res, Eigen::Vector2d org)
    : resolution(res), origin(std::move(org)), width(w), height(h),
      cells(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), 0) {
  validate();
}

void OccupancyGrid::validate() const {
  if (!(resolution > 0.0)) throw std::invalid_argument("grid: resolution must be positive");
  if (width < 0 || height < 0 ||
      cells.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height))
    throw std::invalid_argument("grid: width * height must equal the cell count");
}

std::pair<int, int> OccupancyGrid::nearest_cell(const Eigen::Vector2d& p) const {
  const Eigen::Vector2d f = (p - origin) / resolution;
  return {static_cast<int>(std::lround(f[0])), static_cast<int>(std::lround(f[1]))};
}

namespace {

constexpr double kInf = 1e20;

// Squared distance transform of a sampled function along one line
// (lower envelope of parabolas). `f` and `d` are strided views.
void edt_1d(const double* f, double* d, int n, std::size_t stride,
            std::vector<int>& v, std::vector<double>& z) {
  v.resize(static_cast<std::size_t>(n));
  z.resize(static_cast<std::size_t>(n) + 1);
  int k = 0;
  v[0] = 0;
  z[0] = -kInf;
  z[1] = kInf;
  auto fv = [&](int q) { return f[static_cast<std::size_t>(q) * stride]; };
  auto intersect = [&](int q, int p) {
    return ((fv(q) + double(q) * q) - (fv(p) + double(p) * p)) / (2.0 * q - 2.0 * p);
  };
  for (int q = 1; q < n; ++q) {
    double s = intersect(q, v[static_cast<std::size_t>(k)]);
    while (s <= z[static_cast<std::size_t>(k)]) {
      --k;
      s = intersect(q, v[static_cast<std::size_t>(k)]);
    }
    ++k;
    v[static_cast<std::size_t>(k)] = q;
    z[static_cast<std::size_t>(k)] = s;
    z[static_cast<std::size_t>(k) + 1] = kInf;
  }
  k = 0;
  for (int q = 0; q < n; ++q) {
    while (z[static_cast<std::size_t>(k) + 1] < q) ++k;
    const int p = v[static_cast<std::size_t>(k)];
    d[static_cast<std::size_t>(q) * stride] = double(q - p) * double(q - p) + fv(p);
  }
}

// Squared cell distance from every cell to the nearest cell where
// `is_feature` holds.
std::vector<double> squared_edt(const OccupancyGrid& grid, bool feature_value) {
  const int w = grid.width;
  const int h = grid.height;
  std::vector<double> f(grid.cells.size());
  for (std::size_t i = 0; i < f.size(); ++i)
    f[i] = ((grid.cells[i] != 0) == feature_value) ? 0.0 : kInf;
  std::vector<double> tmp(f.size());

#pragma omp parallel
  {
    std::vector<int> v;
    std::vector<double> z;
#pragma omp for schedule(static)
    for (int j = 0; j < h; ++j) {
      const std::size_t off = static_cast<std::size_t>(j) * static_cast<std::size_t>(w);
      edt_1d(f.data() + off, tmp.data() + off, w, 1, v, z);
    }
#pragma omp for schedule(static)
    for (int i = 0; i < w; ++i) {
      edt_1d(tmp.data() + i, f.data() + i, h, static_cast<std::size_t>(w), v, z);
    }
  }
  return f;
}

}  // namespace

DistanceField distance_field(const OccupancyGrid& grid) {
  grid.validate();
  DistanceField field;
  field.resolution = grid.resolution;
  field.origin = grid.origin;
  field.width = grid.width;
  field.height = grid.height;
  field.values.assign(grid.cells.size(), kUnreachableDistance);
  if (grid.cells.empty()) return field;

  const bool any_occupied = std::any_of(grid.cells.begin(), grid.cells.end(),
                                        [](std::uint8_t c) { return c != 0; });
  const bool any_free = std::any_of(grid.cells.begin(), grid.cells.end(),
                                    [](std::uint8_t c) { return c == 0; });
  if (!any_occupied) return field;
  if (!any_free) {
    std::fill(field.values.begin(), field.values.end(), -kUnreachableDistance);
    return field;
  }

  const auto to_occupied = squared_edt(grid, true);
  const auto to_free = squared_edt(grid, false);
  const double res = grid.resolution;
  for (std::size_t k = 0; k < grid.cells.size(); ++k) {
    field.values[k] = grid.cells[k] != 0 ? res - std::sqrt(to_free[k]) * res
                                         : std::sqrt(to_occupied[k]) * res;
  }
  return field;
}

DistanceSample signed_distance(const DistanceField& field,
                               const Eigen::Vector2d& point) {
  DistanceSample out;
  if (field.width == 0 || field.height == 0) {
    out.distance = kUnreachableDistance;
    return out;
  }
  const double fx_raw = (point[0] - field.origin[0]) / field.resolution;
  const double fy_raw = (point[1] - field.origin[1]) / field.resolution;
  const double max_x = field.width - 1;
  const double max_y = field.height - 1;
  const double fx = std::clamp(fx_raw, 0.0, max_x);
  const double fy = std::clamp(fy_raw, 0.0, max_y);
  int i0 = static_cast<int>(std::floor(fx));
  int j0 = static_cast<int>(std::floor(fy));
  i0 = std::min(i0, std::max(field.width - 2, 0));
  j0 = std::min(j0, std::max(field.height - 2, 0));
  const int i1 = std::min(i0 + 1, field.width - 1);
  const int j1 = std::min(j0 + 1, field.height - 1);
  const double tx = fx - i0;
  const double ty = fy - j0;

  const double f00 = field.at(i0, j0);
  const double f10 = field.at(i1, j0);
  const double f01 = field.at(i0, j1);
  const double f11 = field.at(i1, j1);

  out.distance = (1 - tx) * (1 - ty) * f00 + tx * (1 - ty) * f10 +
                 (1 - tx) * ty * f01 + tx * ty * f11;
  const bool clamped_x = fx_raw < 0.0 || fx_raw > max_x || i1 == i0;
  const bool clamped_y = fy_raw < 0.0 || fy_raw > max_y || j1 == j0;
  out.gradient[0] = clamped_x ? 0.0
                              : ((1 - ty) * (f10 - f00) + ty * (f11 - f01)) / field.resolution;
  out.gradient[1] = clamped_y ? 0.0
                              : ((1 - tx) * (f01 - f00) + tx * (f11 - f10)) / field.resolution;
  if (!clamped_x && !clamped_y) out.cross = (f11 - f10 - f01 + f00) / (field.resolution * field.resolution);
  return out;
}

void DoorwaySpec::validate() const {
  if (!(extent > 0.0) || !(resolution > 0.0))
    throw std::invalid_argument("doorway: extent and resolution must be positive");
  if (!(doorway_width > 0.0) || doorway_width > extent)
    throw std::invalid_argument("doorway: width must lie in (0, extent]");
  if (!(wall_thickness > 0.0)) throw std::invalid_argument("doorway: wall thickness must be positive");
  if (door_offset_range < 0.0 || clearance < 0.0 || inflation < 0.0)
    throw std::invalid_argument("doorway: ranges must be non-negative");
  if (std::abs(wall_x) + wall_thickness / 2 >= extent / 2)
    throw std::invalid_argument("doorway: wall must lie inside the room");
}

double door_center(const DoorwaySpec& spec, std::uint64_t seed) {
  if (spec.door_offset_range == 0.0) return 0.0;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-spec.door_offset_range, spec.door_offset_range);
  return dist(rng);
}

OccupancyGrid make_doorway_world(const DoorwaySpec& spec, std::uint64_t seed) {
  spec.validate();
  const int n = static_cast<int>(std::lround(spec.extent / spec.resolution));
  const double half = spec.extent / 2.0;
  OccupancyGrid grid(n, n, spec.resolution,
                     Eigen::Vector2d(-half + spec.resolution / 2, -half + spec.resolution / 2));
  const double door_y = door_center(spec, seed);
  constexpr double kEps = 1e-9;
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      const Eigen::Vector2d c = grid.cell_center(i, j);
      const bool border = i == 0 || j == 0 || i == n - 1 || j == n - 1;
      const bool in_wall = std::abs(c[0] - spec.wall_x) <= spec.wall_thickness / 2 + kEps;
      const bool in_gap = std::abs(c[1] - door_y) < spec.doorway_width / 2;
      if (border || (in_wall && !in_gap)) grid.set(i, j, true);
    }
  }
  return grid;
}

namespace {

std::vector<std::uint8_t> inflated_blocked(const OccupancyGrid& grid,
                                           const DistanceField& field,
                                           double inflation) {
  std::vector<std::uint8_t> blocked(grid.cells.size());
  for (std::size_t k = 0; k < blocked.size(); ++k)
    blocked[k] = (grid.cells[k] != 0 || field.values[k] < inflation) ? 1 : 0;
  return blocked;
}

}  // namespace

PlannerPath dijkstra_plan(const OccupancyGrid& grid, const Eigen::Vector2d& start,
                          const Eigen::Vector2d& goal, double inflation) {
  return dijkstra_plan(grid, distance_field(grid), start, goal, inflation);
}

PlannerPath dijkstra_plan(const OccupancyGrid& grid, const DistanceField& field,
                          const Eigen::Vector2d& start,
                          const Eigen::Vector2d& goal, double inflation) {
  const auto blocked = inflated_blocked(grid, field, inflation);
  const auto [si, sj] = grid.nearest_cell(start);
  const auto [gi, gj] = grid.nearest_cell(goal);
  if (!grid.in_bounds(si, sj) || blocked[grid.index(si, sj)])
    throw NoPathError("dijkstra: start is outside free space");
  if (!grid.in_bounds(gi, gj) || blocked[grid.index(gi, gj)])
    throw NoPathError("dijkstra: goal is outside free space");

  const std::size_t n = grid.cells.size();
  const double res = grid.resolution;
  const double diag = std::numbers::sqrt2 * res;
  std::vector<double> dist(n, std::numeric_limits<double>::infinity());
  std::vector<std::int64_t> parent(n, -1);
  std::vector<std::uint8_t> done(n, 0);
  using Entry = std::pair<double, std::size_t>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> open;

  const std::size_t s = grid.index(si, sj);
  const std::size_t g = grid.index(gi, gj);
  dist[s] = 0.0;
  open.emplace(0.0, s);
  static constexpr int kDi[8] = {1, -1, 0, 0, 1, 1, -1, -1};
  static constexpr int kDj[8] = {0, 0, 1, -1, 1, -1, 1, -1};

  while (!open.empty()) {
    const auto [d, k] = open.top();
    open.pop();
    if (done[k]) continue;
    done[k] = 1;
    if (k == g) break;
    const int i = static_cast<int>(k % static_cast<std::size_t>(grid.width));
    const int j = static_cast<int>(k / static_cast<std::size_t>(grid.width));
    for (int m = 0; m < 8; ++m) {
      const int ni = i + kDi[m];
      const int nj = j + kDj[m];
      if (!grid.in_bounds(ni, nj)) continue;
      const std::size_t nk = grid.index(ni, nj);
      if (blocked[nk] || done[nk]) continue;
      const double nd = d + (m < 4 ? res : diag);
      if (nd < dist[nk]) {
        dist[nk] = nd;
        parent[nk] = static_cast<std::int64_t>(k);
        open.emplace(nd, nk);
      }
    }
  }
  if (!done[g]) throw NoPathError("dijkstra: goal unreachable");

  PlannerPath path;
  for (std::int64_t k = static_cast<std::int64_t>(g); k >= 0; k = parent[static_cast<std::size_t>(k)]) {
    const auto kk = static_cast<std::size_t>(k);
    path.waypoints.push_back(grid.cell_center(static_cast<int>(kk % static_cast<std::size_t>(grid.width)),
                                              static_cast<int>(kk / static_cast<std::size_t>(grid.width))));
  }
  std::reverse(path.waypoints.begin(), path.waypoints.end());
  path.length = dist[g];
  return path;
}

namespace {

constexpr int kMaxRejections = 10000;

State sample_on_side(const DoorwaySpec& spec, const DistanceField& field, int side,
                     std::mt19937_64& rng) {
  const double half_free = spec.extent / 2 - spec.resolution;  // inner edge of the border ring
  const double lo = side < 0 ? -half_free : spec.wall_x;
  const double hi = side < 0 ? spec.wall_x : half_free;
  std::uniform_real_distribution<double> ux(lo, hi);
  std::uniform_real_distribution<double> uy(-half_free, half_free);
  std::uniform_real_distribution<double> uh(-std::numbers::pi, std::numbers::pi);
  for (int attempt = 0; attempt < kMaxRejections; ++attempt) {
    const Eigen::Vector2d p(ux(rng), uy(rng));
    const double heading = uh(rng);
    if (signed_distance(field, p).distance >= spec.clearance) return {p[0], p[1], heading};
  }
  throw std::runtime_error("sample_start_goal: rejection limit reached");
}

StartGoal sample_pair(const DoorwaySpec& spec, std::uint64_t seed, bool same_side) {
  spec.validate();
  // Clearance is checked against a door-less wall, so the samples are valid
  // for every door placement.
  DoorwaySpec solid = spec;
  solid.door_offset_range = 0.0;
  solid.doorway_width = std::min(spec.resolution, spec.doorway_width);
  const auto field = distance_field(make_doorway_world(solid, 0));

  std::mt19937_64 rng(seed);
  std::bernoulli_distribution coin(0.5);
  StartGoal out;
  out.start_side = coin(rng) ? 1 : -1;
  out.goal_side = same_side ? out.start_side : -out.start_side;
  out.start = sample_on_side(spec, field, out.start_side, rng);
  out.goal = sample_on_side(spec, field, out.goal_side, rng);
  return out;
}

}  // namespace

StartGoal sample_start_goal(const DoorwaySpec& spec, std::uint64_t seed) {
  return sample_pair(spec, seed, false);
}

StartGoal sample_start_goal_same_side(const DoorwaySpec& spec, std::uint64_t seed) {
  return sample_pair(spec, seed, true);
}

Context crop_context(const OccupancyGrid& world, const State& pose) {
  return crop_context(world, pose, kContextSide, kContextResolution);
}

Context crop_context(const OccupancyGrid& world, const State& pose, int side,
                     double resolution) {
  const double half = side * resolution / 2.0;
  Context ctx;
  ctx.pose = pose;
  ctx.grid = OccupancyGrid(side, side, resolution,
                           Eigen::Vector2d(-half + resolution / 2, -half + resolution / 2));
  const double c = std::cos(pose.phi);
  const double s = std::sin(pose.phi);
  for (int j = 0; j < side; ++j) {
    for (int i = 0; i < side; ++i) {
      const Eigen::Vector2d local = ctx.grid.cell_center(i, j);
      const Eigen::Vector2d wp(pose.px + c * local[0] - s * local[1],
                               pose.py + s * local[0] + c * local[1]);
      const auto [wi, wj] = world.nearest_cell(wp);
      ctx.grid.set(i, j, !world.in_bounds(wi, wj) || world.occupied(wi, wj));
    }
  }
  return ctx;
}

}  // namespace pmpc
