#include "pmpc/grid_io.hpp"

#include <fstream>

#include "pmpc/binary_io.hpp"

namespace pmpc {

namespace {
constexpr char kGridMagic[9] = "PMPCGRID";
constexpr std::uint32_t kGridVersion = 1;
}  // namespace

void write_grid(std::ostream& out, const OccupancyGrid& grid) {
  grid.validate();
  io::put_magic(out, kGridMagic);
  io::put<std::uint32_t>(out, kGridVersion);
  io::put<double>(out, grid.resolution);
  io::put<double>(out, grid.origin[0]);
  io::put<double>(out, grid.origin[1]);
  io::put<std::uint32_t>(out, static_cast<std::uint32_t>(grid.width));
  io::put<std::uint32_t>(out, static_cast<std::uint32_t>(grid.height));
  const auto bytes = io::pack_bits(grid.cells);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

OccupancyGrid read_grid(std::istream& in) {
  io::expect_magic(in, kGridMagic);
  if (io::get<std::uint32_t>(in) != kGridVersion) throw std::runtime_error("grid: unsupported version");
  OccupancyGrid grid;
  grid.resolution = io::get<double>(in);
  grid.origin[0] = io::get<double>(in);
  grid.origin[1] = io::get<double>(in);
  grid.width = static_cast<int>(io::get<std::uint32_t>(in));
  grid.height = static_cast<int>(io::get<std::uint32_t>(in));
  const std::size_t count = static_cast<std::size_t>(grid.width) * static_cast<std::size_t>(grid.height);
  std::vector<std::uint8_t> bytes((count + 7) / 8);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!in) throw std::runtime_error("grid: truncated cell data");
  grid.cells = io::unpack_bits(bytes, count);
  grid.validate();
  return grid;
}

void save_grid(const std::filesystem::path& path, const OccupancyGrid& grid) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  write_grid(out, grid);
}

OccupancyGrid load_grid(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return read_grid(in);
}

void save_pgm(const std::filesystem::path& path, const OccupancyGrid& grid) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  out << "P5\n" << grid.width << ' ' << grid.height << "\n255\n";
  for (int j = grid.height - 1; j >= 0; --j)
    for (int i = 0; i < grid.width; ++i) out.put(grid.occupied(i, j) ? char(0) : char(255));
}

}  // namespace pmpc
