#include "pmpc/render.hpp"

#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace pmpc {

namespace {

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(item);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

std::vector<LabeledTrajectory> read_trajectories(std::istream& in) {
  std::vector<LabeledTrajectory> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line.rfind("label,", 0) == 0) continue;
    const auto f = split(line);
    if (f.size() != 7) throw std::runtime_error("trajectory file: bad record on line " + std::to_string(lineno));
    if (out.empty() || out.back().label != f[0]) out.push_back({f[0], {}});
    auto& tr = out.back().traj;
    try {
      tr.states.push_back(State{std::stod(f[2]), std::stod(f[3]), std::stod(f[4])});
      if (!f[5].empty()) tr.controls.push_back(Control{std::stod(f[5]), std::stod(f[6])});
    } catch (const std::exception&) {
      throw std::runtime_error("trajectory file: bad number on line " + std::to_string(lineno));
    }
  }
  return out;
}

void render_svg(std::ostream& out, const OccupancyGrid& grid, const std::vector<LabeledTrajectory>& trajs,
                const std::string& prefix) {
  const double scale = 100.0;  // pixels per meter
  const double res = grid.resolution;
  const double x0 = grid.origin[0] - res / 2;
  const double y0 = grid.origin[1] - res / 2;
  const double w = grid.width * res;
  const double h = grid.height * res;
  auto px = [&](double x) { return (x - x0) * scale; };
  auto py = [&](double y) { return (y0 + h - y) * scale; };
  char buf[256];

  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w * scale << "\" height=\"" << h * scale
      << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n<g fill=\"#333\">\n";
  for (int j = 0; j < grid.height; ++j)
    for (int i = 0; i < grid.width; ++i) {
      if (!grid.occupied(i, j)) continue;
      const auto c = grid.cell_center(i, j);
      std::snprintf(buf, sizeof(buf), "<rect x=\"%.1f\" y=\"%.1f\" width=\"%.1f\" height=\"%.1f\"/>\n",
                    px(c[0] - res / 2), py(c[1] + res / 2), res * scale, res * scale);
      out << buf;
    }
  out << "</g>\n";
  for (const auto& lt : trajs) {
    if (lt.label.rfind(prefix, 0) != 0 || lt.traj.states.empty()) continue;
    if (ends_with(lt.label, "_goal")) {
      const auto& s = lt.traj.states.front();
      std::snprintf(buf, sizeof(buf), "<circle cx=\"%.1f\" cy=\"%.1f\" r=\"8\" fill=\"#2a2\"/>\n", px(s.px), py(s.py));
      out << buf;
      continue;
    }
    const bool expert = ends_with(lt.label, "_expert");
    out << "<polyline fill=\"none\" stroke=\"" << (expert ? "#36c" : "#c33") << "\" stroke-width=\"3\""
        << (expert ? " stroke-dasharray=\"8,6\"" : "") << " points=\"";
    for (const auto& s : lt.traj.states) {
      std::snprintf(buf, sizeof(buf), "%.1f,%.1f ", px(s.px), py(s.py));
      out << buf;
    }
    out << "\"><title>" << lt.label << "</title></polyline>\n";
  }
  out << "</svg>\n";
}

}  // namespace pmpc
