#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <vector>

#include "pmpc/performer.hpp"

namespace pmpc {

/// Binary layout (little-endian):
///   char[8]  "PMPCCKPT"
///   u32      version (1)
///   i32 x 11 layers, heads, embed_dim, mlp_dim, patch, image_side, feature
///            (0 relu, 1 exp, 2 softmax), num_features, redraw, readout_token,
///            output_dim
///   u64      seed
///   u64      step
///   u64      parameter count
///   f64[n]   parameters in param_layout() order
struct Checkpoint {
  PerformerConfig cfg;
  std::uint64_t seed = 0;
  std::uint64_t step = 0;
  std::vector<double> params;
};

struct CheckpointMismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt);
Checkpoint read_checkpoint(std::istream& in);

/// Writes to a sibling temporary file and renames it into place.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);
/// Rejects files whose embedded config differs from `expected`.
Checkpoint load_checkpoint(const std::filesystem::path& path, const PerformerConfig& expected);

}  // namespace pmpc
