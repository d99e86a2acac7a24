#include "pmpc/performer.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

#include "pmpc/seed.hpp"

namespace pmpc {

namespace {

constexpr double kNormEps = 1e-5;
constexpr double kInitStd = 0.02;
constexpr std::uint64_t kFeatureStream = 0xFEA7;

using ConstMat = Eigen::Map<const RowMatrix>;
using Mat = Eigen::Map<RowMatrix>;
using ConstRow = Eigen::Map<const Eigen::RowVectorXd>;
using Row = Eigen::Map<Eigen::RowVectorXd>;

ConstMat cmat(std::span<const double> p, std::size_t off, Eigen::Index r, Eigen::Index c) {
  return ConstMat(p.data() + off, r, c);
}
ConstRow crow(std::span<const double> p, std::size_t off, Eigen::Index n) {
  return ConstRow(p.data() + off, n);
}
Mat gmat(std::vector<double>& g, std::size_t off, Eigen::Index r, Eigen::Index c) {
  return Mat(g.data() + off, r, c);
}
Row grow(std::vector<double>& g, std::size_t off, Eigen::Index n) { return Row(g.data() + off, n); }

void layer_norm(const RowMatrix& X, const ConstRow& g, const ConstRow& b, RowMatrix& xhat,
                Eigen::VectorXd& inv_std, RowMatrix& Y) {
  const Eigen::Index n = X.cols();
  xhat.resize(X.rows(), n);
  inv_std.resize(X.rows());
  Y.resize(X.rows(), n);
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    const double mean = X.row(i).mean();
    const double var = (X.row(i).array() - mean).square().sum() / static_cast<double>(n);
    inv_std[i] = 1.0 / std::sqrt(var + kNormEps);
    xhat.row(i) = (X.row(i).array() - mean) * inv_std[i];
    Y.row(i) = xhat.row(i).cwiseProduct(g) + b;
  }
}

// dX for y = g ⊙ x̂ + b; accumulates dg and db.
RowMatrix layer_norm_backward(const RowMatrix& dY, const RowMatrix& xhat,
                              const Eigen::VectorXd& inv_std, const ConstRow& g, Row dg, Row db) {
  const double n = static_cast<double>(dY.cols());
  RowMatrix dX(dY.rows(), dY.cols());
  for (Eigen::Index i = 0; i < dY.rows(); ++i) {
    dg += dY.row(i).cwiseProduct(xhat.row(i));
    db += dY.row(i);
    const Eigen::RowVectorXd dxhat = dY.row(i).cwiseProduct(g);
    const double m1 = dxhat.sum() / n;
    const double m2 = dxhat.dot(xhat.row(i)) / n;
    dX.row(i) = inv_std[i] * (dxhat.array() - m1 - xhat.row(i).array() * m2);
  }
  return dX;
}

double gelu(double a) { return 0.5 * a * (1.0 + std::erf(a / std::numbers::sqrt2)); }

double gelu_grad(double a) {
  const double cdf = 0.5 * (1.0 + std::erf(a / std::numbers::sqrt2));
  const double pdf = std::exp(-0.5 * a * a) / std::sqrt(2.0 * std::numbers::pi);
  return cdf + a * pdf;
}

RowMatrix affine(const RowMatrix& X, const ConstMat& W, const ConstRow& b) {
  RowMatrix Y = X * W;
  Y.rowwise() += b;
  return Y;
}

}  // namespace

void PerformerConfig::validate() const {
  if (layers < 0 || heads < 1 || embed_dim < 1 || mlp_dim < 1 || patch < 1 || image_side < 1 ||
      output_dim < 1)
    throw std::invalid_argument("performer: sizes must be positive");
  if (image_side % patch != 0) throw std::invalid_argument("performer: image side not divisible by patch");
  if (embed_dim % heads != 0) throw std::invalid_argument("performer: embed dim not divisible by heads");
  if (feature == FeatureKind::Exp && num_features < 1)
    throw std::invalid_argument("performer: Exp features need m >= 1");
  if (readout_token < -1 || readout_token >= num_tokens())
    throw std::invalid_argument("performer: readout token out of range");
}

int PerformerConfig::resolved_readout() const {
  if (readout_token >= 0) return readout_token;
  const int c = (image_side / 2) / patch;
  return c * tokens_per_side() + c;
}

PerformerConfig PerformerConfig::desk() { return PerformerConfig{}; }

PerformerConfig PerformerConfig::medium() {
  PerformerConfig c;
  c.layers = 3;
  c.heads = 1;
  c.embed_dim = 64;
  c.mlp_dim = 64;
  return c;
}

PerformerConfig PerformerConfig::large() {
  PerformerConfig c;
  c.layers = 6;
  c.heads = 3;
  c.embed_dim = 192;
  c.mlp_dim = 1024;
  return c;
}

const char* feature_name(FeatureKind kind) {
  switch (kind) {
    case FeatureKind::Relu: return "relu";
    case FeatureKind::Exp: return "exp";
    case FeatureKind::Softmax: return "softmax";
  }
  return "?";
}

FeatureKind parse_feature(const std::string& name) {
  if (name == "relu") return FeatureKind::Relu;
  if (name == "exp") return FeatureKind::Exp;
  if (name == "softmax") return FeatureKind::Softmax;
  throw std::invalid_argument("unknown feature type: " + name);
}

ParamLayout param_layout(const PerformerConfig& cfg) {
  cfg.validate();
  ParamLayout lay;
  std::size_t off = 0;
  auto take = [&off](std::size_t n) {
    const std::size_t at = off;
    off += n;
    return at;
  };
  const std::size_t d = static_cast<std::size_t>(cfg.embed_dim);
  const std::size_t mlp = static_cast<std::size_t>(cfg.mlp_dim);
  const std::size_t pp = static_cast<std::size_t>(cfg.patch * cfg.patch);
  lay.patch_w = take(pp * d);
  lay.patch_b = take(d);
  lay.pos = take(static_cast<std::size_t>(cfg.num_tokens()) * d);
  for (int l = 0; l < cfg.layers; ++l) {
    LayerOffsets o{};
    o.ln1_g = take(d);
    o.ln1_b = take(d);
    o.wq = take(d * d);
    o.bq = take(d);
    o.wk = take(d * d);
    o.bk = take(d);
    o.wv = take(d * d);
    o.bv = take(d);
    o.wo = take(d * d);
    o.bo = take(d);
    o.ln2_g = take(d);
    o.ln2_b = take(d);
    o.w1 = take(d * mlp);
    o.b1 = take(mlp);
    o.w2 = take(mlp * d);
    o.b2 = take(d);
    lay.layers.push_back(o);
  }
  lay.lnf_g = take(d);
  lay.lnf_b = take(d);
  lay.readout_w = take(d * static_cast<std::size_t>(cfg.output_dim));
  lay.readout_b = take(static_cast<std::size_t>(cfg.output_dim));
  lay.total = off;
  return lay;
}

std::size_t param_count(const PerformerConfig& cfg) { return param_layout(cfg).total; }

std::vector<double> init_params(const PerformerConfig& cfg, std::uint64_t seed) {
  const ParamLayout lay = param_layout(cfg);
  std::vector<double> p(lay.total, 0.0);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, kInitStd);
  auto fill = [&](std::size_t off, std::size_t n) {
    for (std::size_t k = 0; k < n; ++k) {
      double v;
      do v = normal(rng);
      while (std::abs(v) > 2.0 * kInitStd);
      p[off + k] = v;
    }
  };
  auto ones = [&](std::size_t off, std::size_t n) {
    for (std::size_t k = 0; k < n; ++k) p[off + k] = 1.0;
  };
  const std::size_t d = static_cast<std::size_t>(cfg.embed_dim);
  const std::size_t mlp = static_cast<std::size_t>(cfg.mlp_dim);
  fill(lay.patch_w, static_cast<std::size_t>(cfg.patch * cfg.patch) * d);
  for (const auto& o : lay.layers) {
    ones(o.ln1_g, d);
    fill(o.wq, d * d);
    fill(o.wk, d * d);
    fill(o.wv, d * d);
    fill(o.wo, d * d);
    ones(o.ln2_g, d);
    fill(o.w1, d * mlp);
    fill(o.w2, mlp * d);
  }
  ones(lay.lnf_g, d);
  return p;
}

Image image_from_grid(const OccupancyGrid& grid) {
  if (grid.width != grid.height) throw std::invalid_argument("image_from_grid: grid must be square");
  Image img;
  img.side = grid.width;
  img.pixels.resize(grid.cells.size());
  for (std::size_t k = 0; k < grid.cells.size(); ++k) img.pixels[k] = grid.cells[k] ? 1.0 : -1.0;
  return img;
}

RowMatrix extract_patches(const Image& image, int patch) {
  if (patch < 1 || image.side % patch != 0 ||
      image.pixels.size() != static_cast<std::size_t>(image.side) * static_cast<std::size_t>(image.side))
    throw std::invalid_argument("extract_patches: shape mismatch");
  const int P = image.side / patch;
  RowMatrix out(P * P, patch * patch);
  for (int pj = 0; pj < P; ++pj)
    for (int pi = 0; pi < P; ++pi)
      for (int dj = 0; dj < patch; ++dj)
        for (int di = 0; di < patch; ++di) {
          const int i = pi * patch + di;
          const int j = pj * patch + dj;
          out(pj * P + pi, dj * patch + di) = image.pixels[static_cast<std::size_t>(j * image.side + i)];
        }
  return out;
}

RowMatrix patchify(const Image& image, std::span<const double> params, const PerformerConfig& cfg) {
  const ParamLayout lay = param_layout(cfg);
  if (image.side != cfg.image_side || params.size() != lay.total)
    throw std::invalid_argument("patchify: shape mismatch");
  const int d = cfg.embed_dim;
  const int pp = cfg.patch * cfg.patch;
  RowMatrix X = extract_patches(image, cfg.patch) * cmat(params, lay.patch_w, pp, d);
  X.rowwise() += crow(params, lay.patch_b, d);
  X += cmat(params, lay.pos, cfg.num_tokens(), d);
  return X;
}

FeatureBank draw_features(const PerformerConfig& cfg, std::uint64_t seed) {
  FeatureBank bank;
  if (cfg.feature != FeatureKind::Exp) return bank;
  for (int k = 0; k < cfg.layers * cfg.heads; ++k)
    bank.push_back(draw_projection(cfg.num_features, cfg.head_dim(), derive_seed(seed, k)));
  return bank;
}

Performer::Performer(PerformerConfig cfg, std::uint64_t seed)
    : cfg_(cfg), seed_(seed), layout_(param_layout(cfg)),
      fixed_(draw_features(cfg, derive_seed(seed, kFeatureStream))) {}

Eigen::VectorXd Performer::forward(const Image& image, std::span<const double> params, Tape* tape,
                                   std::uint64_t projection_seed) const {
  if (params.size() != layout_.total) throw std::invalid_argument("performer: parameter count mismatch");
  if (image.side != cfg_.image_side) throw std::invalid_argument("performer: image size mismatch");
  const int d = cfg_.embed_dim;
  const int dh = cfg_.head_dim();
  const int mlp = cfg_.mlp_dim;
  const int L = cfg_.num_tokens();

  FeatureBank redrawn;
  if (cfg_.feature == FeatureKind::Exp && cfg_.redraw) redrawn = draw_features(cfg_, projection_seed);
  const FeatureBank& omegas = cfg_.redraw ? redrawn : fixed_;

  Tape local;
  Tape& tp = tape != nullptr ? *tape : local;
  tp.cfg = cfg_;
  tp.patches = extract_patches(image, cfg_.patch);
  tp.layers.assign(static_cast<std::size_t>(cfg_.layers), LayerTape{});
  tp.omegas = omegas;

  RowMatrix X = tp.patches * cmat(params, layout_.patch_w, cfg_.patch * cfg_.patch, d);
  X.rowwise() += crow(params, layout_.patch_b, d);
  X += cmat(params, layout_.pos, L, d);

  const double c = std::pow(static_cast<double>(dh), -0.25);
  for (int l = 0; l < cfg_.layers; ++l) {
    const LayerOffsets& o = layout_.layers[l];
    LayerTape& lt = tp.layers[l];
    lt.x_in = X;
    layer_norm(X, crow(params, o.ln1_g, d), crow(params, o.ln1_b, d), lt.xhat1, lt.inv_std1, lt.y1);
    lt.q = affine(lt.y1, cmat(params, o.wq, d, d), crow(params, o.bq, d));
    lt.k = affine(lt.y1, cmat(params, o.wk, d, d), crow(params, o.bk, d));
    lt.v = affine(lt.y1, cmat(params, o.wv, d, d), crow(params, o.bv, d));
    lt.concat.resize(L, d);
    lt.heads.assign(static_cast<std::size_t>(cfg_.heads), HeadTape{});
    for (int h = 0; h < cfg_.heads; ++h) {
      HeadTape& ht = lt.heads[h];
      const RowMatrix Qh = lt.q.middleCols(h * dh, dh);
      const RowMatrix Kh = lt.k.middleCols(h * dh, dh);
      const RowMatrix Vh = lt.v.middleCols(h * dh, dh);
      if (cfg_.feature == FeatureKind::Softmax) {
        lt.concat.middleCols(h * dh, dh) = attention_exact(Qh, Kh, Vh, &ht.weights);
      } else {
        const RowMatrix* omega =
            cfg_.feature == FeatureKind::Exp ? &omegas[static_cast<std::size_t>(l * cfg_.heads + h)] : nullptr;
        ht.q_scaled = c * Qh;
        ht.k_scaled = c * Kh;
        ht.qf = feature_map(ht.q_scaled, cfg_.feature, omega);
        ht.kf = feature_map(ht.k_scaled, cfg_.feature, omega);
        lt.concat.middleCols(h * dh, dh) = favor_from_features(ht.qf, ht.kf, Vh, &ht.favor);
      }
    }
    lt.x_mid = X + affine(lt.concat, cmat(params, o.wo, d, d), crow(params, o.bo, d));
    layer_norm(lt.x_mid, crow(params, o.ln2_g, d), crow(params, o.ln2_b, d), lt.xhat2, lt.inv_std2, lt.y2);
    lt.pre_act = affine(lt.y2, cmat(params, o.w1, d, mlp), crow(params, o.b1, mlp));
    lt.act = lt.pre_act.unaryExpr([](double a) { return gelu(a); });
    X = lt.x_mid + affine(lt.act, cmat(params, o.w2, mlp, d), crow(params, o.b2, d));
  }

  const int r = cfg_.resolved_readout();
  const Eigen::RowVectorXd xr = X.row(r);
  const double mean = xr.mean();
  const double var = (xr.array() - mean).square().sum() / static_cast<double>(d);
  tp.inv_std_f = 1.0 / std::sqrt(var + kNormEps);
  tp.xhat_f = (xr.array() - mean) * tp.inv_std_f;
  tp.z = tp.xhat_f.cwiseProduct(crow(params, layout_.lnf_g, d)) + crow(params, layout_.lnf_b, d);
  Eigen::RowVectorXd out = tp.z * cmat(params, layout_.readout_w, d, cfg_.output_dim);
  out += crow(params, layout_.readout_b, cfg_.output_dim);
  tp.output = out.transpose();
  return tp.output;
}

std::vector<double> Performer::backward(const Tape& tape, std::span<const double> params,
                                        const Eigen::VectorXd& grad_out) const {
  if (!(tape.cfg == cfg_) || tape.layers.size() != static_cast<std::size_t>(cfg_.layers))
    throw std::invalid_argument("performer: tape does not match this model");
  if (params.size() != layout_.total) throw std::invalid_argument("performer: parameter count mismatch");
  if (grad_out.size() != cfg_.output_dim) throw std::invalid_argument("performer: grad_out size mismatch");
  const int d = cfg_.embed_dim;
  const int dh = cfg_.head_dim();
  const int mlp = cfg_.mlp_dim;
  const int L = cfg_.num_tokens();
  std::vector<double> g(layout_.total, 0.0);

  // Readout and final norm (only the readout row carries gradient).
  const Eigen::RowVectorXd go = grad_out.transpose();
  gmat(g, layout_.readout_w, d, cfg_.output_dim) += tape.z.transpose() * go;
  grow(g, layout_.readout_b, cfg_.output_dim) += go;
  const Eigen::RowVectorXd dz = go * cmat(params, layout_.readout_w, d, cfg_.output_dim).transpose();
  RowMatrix dzm = dz;
  RowMatrix xhat_f = tape.xhat_f;
  Eigen::VectorXd inv_f(1);
  inv_f[0] = tape.inv_std_f;
  const RowMatrix dxr = layer_norm_backward(dzm, xhat_f, inv_f, crow(params, layout_.lnf_g, d),
                                            grow(g, layout_.lnf_g, d), grow(g, layout_.lnf_b, d));
  RowMatrix dX = RowMatrix::Zero(L, d);
  dX.row(cfg_.resolved_readout()) = dxr.row(0);

  const double c = std::pow(static_cast<double>(dh), -0.25);
  const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));
  for (int l = cfg_.layers - 1; l >= 0; --l) {
    const LayerOffsets& o = layout_.layers[l];
    const LayerTape& lt = tape.layers[l];

    // MLP block.
    gmat(g, o.w2, mlp, d) += lt.act.transpose() * dX;
    grow(g, o.b2, d) += dX.colwise().sum();
    RowMatrix dpre = dX * cmat(params, o.w2, mlp, d).transpose();
    dpre.array() *= lt.pre_act.unaryExpr([](double a) { return gelu_grad(a); }).array();
    gmat(g, o.w1, d, mlp) += lt.y2.transpose() * dpre;
    grow(g, o.b1, mlp) += dpre.colwise().sum();
    const RowMatrix dy2 = dpre * cmat(params, o.w1, d, mlp).transpose();
    const RowMatrix dx_mid = dX + layer_norm_backward(dy2, lt.xhat2, lt.inv_std2, crow(params, o.ln2_g, d),
                                                      grow(g, o.ln2_g, d), grow(g, o.ln2_b, d));

    // Attention block.
    gmat(g, o.wo, d, d) += lt.concat.transpose() * dx_mid;
    grow(g, o.bo, d) += dx_mid.colwise().sum();
    const RowMatrix dconcat = dx_mid * cmat(params, o.wo, d, d).transpose();
    RowMatrix dq(L, d), dk(L, d), dv(L, d);
    for (int h = 0; h < cfg_.heads; ++h) {
      const HeadTape& ht = lt.heads[h];
      const RowMatrix dO = dconcat.middleCols(h * dh, dh);
      const RowMatrix Vh = lt.v.middleCols(h * dh, dh);
      if (cfg_.feature == FeatureKind::Softmax) {
        const RowMatrix Qh = lt.q.middleCols(h * dh, dh);
        const RowMatrix Kh = lt.k.middleCols(h * dh, dh);
        const RowMatrix& A = ht.weights;
        dv.middleCols(h * dh, dh) = A.transpose() * dO;
        const RowMatrix dA = dO * Vh.transpose();
        const Eigen::VectorXd rs = (dA.cwiseProduct(A)).rowwise().sum();
        RowMatrix dS = A.cwiseProduct((dA.colwise() - rs));
        dS *= inv_sqrt_dh;
        dq.middleCols(h * dh, dh) = dS * Kh;
        dk.middleCols(h * dh, dh) = dS.transpose() * Qh;
        continue;
      }
      const FavorState& fs = ht.favor;
      const RowMatrix out = lt.concat.middleCols(h * dh, dh);
      RowMatrix dnum = dO;
      Eigen::VectorXd dden(L);
      for (int i = 0; i < L; ++i) {
        dnum.row(i) /= fs.denom[i];
        dden[i] = -dO.row(i).dot(out.row(i)) / fs.denom[i];
      }
      RowMatrix dqf = dnum * fs.kv.transpose() + dden * fs.ksum.transpose();
      const RowMatrix dkv = ht.qf.transpose() * dnum;
      const Eigen::VectorXd dksum = ht.qf.transpose() * dden;
      RowMatrix dkf = Vh * dkv.transpose();
      dkf.rowwise() += dksum.transpose();
      dv.middleCols(h * dh, dh) = ht.kf * dkv;

      auto feature_backward = [&](const RowMatrix& dF, const RowMatrix& F, const RowMatrix& Xs) {
        if (cfg_.feature == FeatureKind::Relu) {
          RowMatrix dXs = dF * inv_sqrt_dh;
          dXs.array() *= (Xs.array() > 0.0).cast<double>();
          return RowMatrix(c * dXs);
        }
        const RowMatrix& omega = tape.omegas[static_cast<std::size_t>(l * cfg_.heads + h)];
        const RowMatrix G = dF.cwiseProduct(F);
        RowMatrix dXs = G * omega;
        const Eigen::VectorXd gs = G.rowwise().sum();
        for (int i = 0; i < Xs.rows(); ++i) dXs.row(i) -= gs[i] * Xs.row(i);
        return RowMatrix(c * dXs);
      };
      dq.middleCols(h * dh, dh) = feature_backward(dqf, ht.qf, ht.q_scaled);
      dk.middleCols(h * dh, dh) = feature_backward(dkf, ht.kf, ht.k_scaled);
    }
    gmat(g, o.wq, d, d) += lt.y1.transpose() * dq;
    grow(g, o.bq, d) += dq.colwise().sum();
    gmat(g, o.wk, d, d) += lt.y1.transpose() * dk;
    grow(g, o.bk, d) += dk.colwise().sum();
    gmat(g, o.wv, d, d) += lt.y1.transpose() * dv;
    grow(g, o.bv, d) += dv.colwise().sum();
    const RowMatrix dy1 = dq * cmat(params, o.wq, d, d).transpose() +
                          dk * cmat(params, o.wk, d, d).transpose() +
                          dv * cmat(params, o.wv, d, d).transpose();
    dX = dx_mid + layer_norm_backward(dy1, lt.xhat1, lt.inv_std1, crow(params, o.ln1_g, d),
                                      grow(g, o.ln1_g, d), grow(g, o.ln1_b, d));
  }

  const int pp = cfg_.patch * cfg_.patch;
  gmat(g, layout_.patch_w, pp, d) += tape.patches.transpose() * dX;
  grow(g, layout_.patch_b, d) += dX.colwise().sum();
  gmat(g, layout_.pos, L, d) += dX;
  return g;
}

}  // namespace pmpc
