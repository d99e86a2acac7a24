#include "pmpc/checkpoint.hpp"

#include <fstream>

#include "pmpc/binary_io.hpp"

namespace pmpc {

namespace {
constexpr char kMagic[9] = "PMPCCKPT";
constexpr std::uint32_t kVersion = 1;
}  // namespace

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt) {
  const auto& c = ckpt.cfg;
  if (ckpt.params.size() != param_count(c))
    throw std::invalid_argument("checkpoint: parameter count does not match config");
  io::put_magic(out, kMagic);
  io::put<std::uint32_t>(out, kVersion);
  for (int v : {c.layers, c.heads, c.embed_dim, c.mlp_dim, c.patch, c.image_side,
                static_cast<int>(c.feature), c.num_features, c.redraw ? 1 : 0, c.readout_token,
                c.output_dim})
    io::put<std::int32_t>(out, v);
  io::put<std::uint64_t>(out, ckpt.seed);
  io::put<std::uint64_t>(out, ckpt.step);
  io::put<std::uint64_t>(out, ckpt.params.size());
  out.write(reinterpret_cast<const char*>(ckpt.params.data()),
            static_cast<std::streamsize>(ckpt.params.size() * sizeof(double)));
}

Checkpoint read_checkpoint(std::istream& in) {
  io::expect_magic(in, kMagic);
  if (io::get<std::uint32_t>(in) != kVersion) throw std::runtime_error("checkpoint: unsupported version");
  Checkpoint ckpt;
  auto& c = ckpt.cfg;
  c.layers = io::get<std::int32_t>(in);
  c.heads = io::get<std::int32_t>(in);
  c.embed_dim = io::get<std::int32_t>(in);
  c.mlp_dim = io::get<std::int32_t>(in);
  c.patch = io::get<std::int32_t>(in);
  c.image_side = io::get<std::int32_t>(in);
  const int feature = io::get<std::int32_t>(in);
  if (feature < 0 || feature > 2) throw std::runtime_error("checkpoint: bad feature type");
  c.feature = static_cast<FeatureKind>(feature);
  c.num_features = io::get<std::int32_t>(in);
  c.redraw = io::get<std::int32_t>(in) != 0;
  c.readout_token = io::get<std::int32_t>(in);
  c.output_dim = io::get<std::int32_t>(in);
  c.validate();
  ckpt.seed = io::get<std::uint64_t>(in);
  ckpt.step = io::get<std::uint64_t>(in);
  const auto n = io::get<std::uint64_t>(in);
  if (n != param_count(c)) throw std::runtime_error("checkpoint: parameter count does not match config");
  ckpt.params.resize(n);
  in.read(reinterpret_cast<char*>(ckpt.params.data()), static_cast<std::streamsize>(n * sizeof(double)));
  if (!in) throw std::runtime_error("checkpoint: truncated parameters");
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string());
    write_checkpoint(out, ckpt);
    out.flush();
    if (!out) throw std::runtime_error("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return read_checkpoint(in);
}

Checkpoint load_checkpoint(const std::filesystem::path& path, const PerformerConfig& expected) {
  Checkpoint ckpt = load_checkpoint(path);
  if (!(ckpt.cfg == expected))
    throw CheckpointMismatch("checkpoint config does not match run config: " + path.string());
  return ckpt;
}

}  // namespace pmpc
