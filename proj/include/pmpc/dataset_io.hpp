#pragma once

#include <filesystem>
#include <iosfwd>

#include "pmpc/imitation.hpp"

namespace pmpc {

/// Binary layout (little-endian):
///   char[8]  "PMPCDATA"
///   u32      version (1)
///   u64      world spec hash
///   u64      generation seed
///   u32      demos, eval demos, horizon T, context side S
///   f64      context resolution [m]
///   u64      snippet count
/// then per snippet:
///   u32      demo id
///   f64[3]   context pose (world frame)
///   u8[ceil(S*S/8)]  context cells, row-major, LSB first
///   f64[(T+1)*3]     states (px, py, phi), context frame
///   f64[T*2]         controls (v, omega)
///   f64[3]           goal, context frame
void write_dataset(std::ostream& out, const Dataset& ds);
Dataset read_dataset(std::istream& in);
void save_dataset(const std::filesystem::path& path, const Dataset& ds);
Dataset load_dataset(const std::filesystem::path& path);

/// One line per (snippet, step): snippet,demo,t,px,py,phi,u_v,u_omega
/// (controls empty on the last step).
void export_dataset_text(std::ostream& out, const Dataset& ds);

}  // namespace pmpc
