#include "pmpc/dataset_io.hpp"

#include <fstream>
#include <iomanip>

#include "pmpc/binary_io.hpp"

namespace pmpc {

namespace {
constexpr char kMagic[9] = "PMPCDATA";
constexpr std::uint32_t kVersion = 1;

void put_state(std::ostream& out, const State& s) {
  io::put(out, s.px);
  io::put(out, s.py);
  io::put(out, s.phi);
}

State get_state(std::istream& in) {
  State s;
  s.px = io::get<double>(in);
  s.py = io::get<double>(in);
  s.phi = io::get<double>(in);
  return s;
}
}  // namespace

void write_dataset(std::ostream& out, const Dataset& ds) {
  io::put_magic(out, kMagic);
  io::put<std::uint32_t>(out, kVersion);
  io::put<std::uint64_t>(out, ds.world_hash);
  io::put<std::uint64_t>(out, ds.seed);
  io::put<std::uint32_t>(out, static_cast<std::uint32_t>(ds.num_demos));
  io::put<std::uint32_t>(out, static_cast<std::uint32_t>(ds.num_eval_demos));
  io::put<std::uint32_t>(out, static_cast<std::uint32_t>(ds.horizon));
  io::put<std::uint32_t>(out, static_cast<std::uint32_t>(ds.context_side));
  io::put<double>(out, kContextResolution);
  io::put<std::uint64_t>(out, ds.snippets.size());
  for (const auto& d : ds.snippets) {
    if (d.horizon() != ds.horizon || d.context.grid.width != ds.context_side ||
        d.context.grid.height != ds.context_side)
      throw std::invalid_argument("dataset: snippet shape does not match header");
    io::put<std::uint32_t>(out, static_cast<std::uint32_t>(d.demo_id));
    put_state(out, d.context.pose);
    const auto bytes = io::pack_bits(d.context.grid.cells);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    for (const auto& s : d.states) put_state(out, s);
    for (const auto& u : d.controls) {
      io::put(out, u.v);
      io::put(out, u.omega);
    }
    put_state(out, d.goal);
  }
}

Dataset read_dataset(std::istream& in) {
  io::expect_magic(in, kMagic);
  if (io::get<std::uint32_t>(in) != kVersion) throw std::runtime_error("dataset: unsupported version");
  Dataset ds;
  ds.world_hash = io::get<std::uint64_t>(in);
  ds.seed = io::get<std::uint64_t>(in);
  ds.num_demos = static_cast<int>(io::get<std::uint32_t>(in));
  ds.num_eval_demos = static_cast<int>(io::get<std::uint32_t>(in));
  ds.horizon = static_cast<int>(io::get<std::uint32_t>(in));
  ds.context_side = static_cast<int>(io::get<std::uint32_t>(in));
  const double res = io::get<double>(in);
  const auto count = io::get<std::uint64_t>(in);
  if (ds.horizon < 1 || ds.context_side < 1 || !(res > 0.0)) throw std::runtime_error("dataset: bad header");
  const std::size_t cells = static_cast<std::size_t>(ds.context_side) * static_cast<std::size_t>(ds.context_side);
  const double half = ds.context_side * res / 2.0;
  ds.snippets.reserve(count);
  for (std::uint64_t k = 0; k < count; ++k) {
    Demonstration d;
    d.demo_id = static_cast<int>(io::get<std::uint32_t>(in));
    d.context.pose = get_state(in);
    d.context.grid = OccupancyGrid(ds.context_side, ds.context_side, res,
                                   Eigen::Vector2d(-half + res / 2, -half + res / 2));
    std::vector<std::uint8_t> bytes((cells + 7) / 8);
    in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!in) throw std::runtime_error("dataset: truncated context");
    d.context.grid.cells = io::unpack_bits(bytes, cells);
    for (int t = 0; t <= ds.horizon; ++t) d.states.push_back(get_state(in));
    for (int t = 0; t < ds.horizon; ++t) {
      Control u;
      u.v = io::get<double>(in);
      u.omega = io::get<double>(in);
      d.controls.push_back(u);
    }
    d.goal = get_state(in);
    ds.snippets.push_back(std::move(d));
  }
  return ds;
}

void save_dataset(const std::filesystem::path& path, const Dataset& ds) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  write_dataset(out, ds);
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return read_dataset(in);
}

void export_dataset_text(std::ostream& out, const Dataset& ds) {
  out << "snippet,demo,t,px,py,phi,u_v,u_omega\n";
  out << std::setprecision(17);
  for (std::size_t k = 0; k < ds.snippets.size(); ++k) {
    const auto& d = ds.snippets[k];
    for (std::size_t t = 0; t < d.states.size(); ++t) {
      const auto& s = d.states[t];
      out << k << ',' << d.demo_id << ',' << t << ',' << s.px << ',' << s.py << ',' << s.phi << ',';
      if (t < d.controls.size()) out << d.controls[t].v << ',' << d.controls[t].omega;
      else out << ',';
      out << '\n';
    }
  }
}

}  // namespace pmpc
