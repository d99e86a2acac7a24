#pragma once

#include <filesystem>
#include <iosfwd>

#include "pmpc/gridworld.hpp"

namespace pmpc {

/// Binary grid file, little-endian:
///   bytes 0..7   magic "PMPCGRID"
///   u32          version (1)
///   f64          resolution [m]
///   f64 f64      origin x, y [m] (center of cell (0,0))
///   u32 u32      width, height
///   then ceil(width*height/8) bytes of row-major cell bits, bit k of the
///   stream stored in byte k/8 at position k%8 (LSB first); 1 = occupied.
void write_grid(std::ostream& out, const OccupancyGrid& grid);
OccupancyGrid read_grid(std::istream& in);
void save_grid(const std::filesystem::path& path, const OccupancyGrid& grid);
OccupancyGrid load_grid(const std::filesystem::path& path);

/// Binary PGM (P5); occupied cells black, +y up.
void save_pgm(const std::filesystem::path& path, const OccupancyGrid& grid);

}  // namespace pmpc
