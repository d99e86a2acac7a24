#pragma once

#include <cstdint>

#include <Eigen/Dense>

namespace pmpc {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class FeatureKind { Relu, Exp, Softmax };

inline constexpr double kFavorEpsilon = 1e-6;

/// (1/√d) ReLU(x), applied to each row of X.
RowMatrix phi_relu(const RowMatrix& X);
Eigen::VectorXd phi_relu(const Eigen::VectorXd& x);

/// (1/√m) exp(-|x|²/2) (exp(ω_1ᵀx), ..., exp(ω_mᵀx)) per row; Ω is m x d.
RowMatrix phi_exp(const RowMatrix& X, const RowMatrix& omega);
Eigen::VectorXd phi_exp(const Eigen::VectorXd& x, const RowMatrix& omega);

/// m x d matrix of i.i.d. standard normal entries.
RowMatrix draw_projection(int m, int d, std::uint64_t seed);

/// Softmax attention D⁻¹ exp(QKᵀ/√d) V with the explicit L x L matrix.
/// If `weights` is given it receives the normalized attention matrix.
RowMatrix attention_exact(const RowMatrix& Q, const RowMatrix& K, const RowMatrix& V,
                          RowMatrix* weights = nullptr);
/// Plain-loop reference of attention_exact.
RowMatrix attention_exact_serial(const RowMatrix& Q, const RowMatrix& K, const RowMatrix& V);

struct FavorState {
  RowMatrix kv;             ///< K'ᵀV, m x d
  Eigen::VectorXd ksum;     ///< K'ᵀ1, m
  Eigen::VectorXd denom;    ///< per row, including ε
};

/// Linear attention from precomputed features: row i is
/// q'_i (K'ᵀV) / (q'_i K'ᵀ1 + ε). No L x L matrix is formed.
RowMatrix favor_from_features(const RowMatrix& Qf, const RowMatrix& Kf, const RowMatrix& V,
                              FavorState* state = nullptr);
/// Plain-loop reference of favor_from_features.
RowMatrix favor_from_features_serial(const RowMatrix& Qf, const RowMatrix& Kf,
                                     const RowMatrix& V);

/// Queries and keys are scaled by d^(-1/4) before the feature map so that the
/// Exp features estimate the kernel exp(qᵀk/√d) used by attention_exact.
/// `omega` is required for FeatureKind::Exp. FeatureKind::Softmax falls back
/// to attention_exact.
RowMatrix attention_favor(const RowMatrix& Q, const RowMatrix& K, const RowMatrix& V,
                          FeatureKind kind, const RowMatrix* omega = nullptr);

/// Applies the feature map of `kind` to already-scaled inputs.
RowMatrix feature_map(const RowMatrix& X, FeatureKind kind, const RowMatrix* omega);

}  // namespace pmpc
