#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pmpc/attention.hpp"
#include "pmpc/cost.hpp"
#include "pmpc/gridworld.hpp"

namespace pmpc {

struct PerformerConfig {
  int layers = 2;
  int heads = 1;
  int embed_dim = 32;
  int mlp_dim = 64;
  int patch = 5;
  int image_side = kContextSide;
  FeatureKind feature = FeatureKind::Relu;
  int num_features = 64;    ///< m, Exp only
  bool redraw = false;      ///< Exp only: draw a fresh Ω on every forward
  int readout_token = -1;   ///< -1 selects the token whose patch holds the image center
  int output_dim = kEmbeddingDim;

  void validate() const;
  int tokens_per_side() const { return image_side / patch; }
  int num_tokens() const { return tokens_per_side() * tokens_per_side(); }
  int head_dim() const { return embed_dim / heads; }
  int resolved_readout() const;
  bool operator==(const PerformerConfig&) const = default;

  /// Small model used for training runs.
  static PerformerConfig desk();
  /// Latency benchmark targets.
  static PerformerConfig medium();
  static PerformerConfig large();
};

const char* feature_name(FeatureKind kind);
FeatureKind parse_feature(const std::string& name);

/// Offsets of every parameter block inside the flat vector. Matrices are
/// stored row-major with shape (inputs x outputs).
struct LayerOffsets {
  std::size_t ln1_g, ln1_b, wq, bq, wk, bk, wv, bv, wo, bo, ln2_g, ln2_b, w1, b1, w2, b2;
};

struct ParamLayout {
  std::size_t patch_w = 0, patch_b = 0, pos = 0;
  std::vector<LayerOffsets> layers;
  std::size_t lnf_g = 0, lnf_b = 0, readout_w = 0, readout_b = 0;
  std::size_t total = 0;
};

ParamLayout param_layout(const PerformerConfig& cfg);
std::size_t param_count(const PerformerConfig& cfg);

/// Truncated-normal (std 0.02, cut at 2 std) projections, zero biases and
/// positional encodings, unit norm scales, and a zero readout projection.
std::vector<double> init_params(const PerformerConfig& cfg, std::uint64_t seed);

/// Square single-channel image, pixels[j * side + i].
struct Image {
  int side = 0;
  std::vector<double> pixels;
};

/// Occupied cells read +1 and free cells -1, so a free patch still embeds to
/// a nonzero token under zero-initialized biases.
Image image_from_grid(const OccupancyGrid& grid);

/// L x patch² matrix of flattened non-overlapping patches; token index is
/// pj * (side / patch) + pi.
RowMatrix extract_patches(const Image& image, int patch);

/// Patch projection plus positional encodings (L x d).
RowMatrix patchify(const Image& image, std::span<const double> params, const PerformerConfig& cfg);

/// One projection matrix per (layer, head); empty unless the feature map is Exp.
using FeatureBank = std::vector<RowMatrix>;
FeatureBank draw_features(const PerformerConfig& cfg, std::uint64_t seed);

struct HeadTape {
  RowMatrix q_scaled, k_scaled, qf, kf;  ///< FAVOR
  FavorState favor;
  RowMatrix weights;                     ///< exact softmax
};

struct LayerTape {
  RowMatrix x_in, xhat1, y1, q, k, v;
  Eigen::VectorXd inv_std1;
  std::vector<HeadTape> heads;
  RowMatrix concat, x_mid, xhat2, y2, pre_act, act;
  Eigen::VectorXd inv_std2;
};

/// Activations recorded by forward() for the reverse pass.
struct Tape {
  PerformerConfig cfg;
  RowMatrix patches;
  std::vector<LayerTape> layers;
  FeatureBank omegas;
  Eigen::RowVectorXd xhat_f;  ///< normalized readout row
  double inv_std_f = 0.0;
  Eigen::RowVectorXd z;       ///< readout row after the final norm
  Eigen::VectorXd output;
};

class Performer {
 public:
  Performer(PerformerConfig cfg, std::uint64_t seed);

  const PerformerConfig& config() const { return cfg_; }
  std::uint64_t seed() const { return seed_; }
  std::size_t param_count() const { return layout_.total; }
  const ParamLayout& layout() const { return layout_; }
  std::vector<double> init_params() const { return pmpc::init_params(cfg_, seed_); }

  /// With redraw enabled, Ω is drawn from `projection_seed` on every call;
  /// otherwise the projections fixed at construction are used.
  Eigen::VectorXd forward(const Image& image, std::span<const double> params, Tape* tape = nullptr,
                          std::uint64_t projection_seed = 0) const;

  /// Gradient of output·grad_out with respect to all parameters.
  std::vector<double> backward(const Tape& tape, std::span<const double> params,
                               const Eigen::VectorXd& grad_out) const;

 private:
  PerformerConfig cfg_;
  std::uint64_t seed_;
  ParamLayout layout_;
  FeatureBank fixed_;
};

}  // namespace pmpc
