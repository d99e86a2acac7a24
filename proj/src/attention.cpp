#include "pmpc/attention.hpp"

#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

namespace pmpc {

namespace {

void check_shapes(const RowMatrix& Q, const RowMatrix& K, const RowMatrix& V) {
  if (Q.cols() != K.cols() || K.rows() != V.rows() || Q.rows() < 1 || K.rows() < 1)
    throw std::invalid_argument("attention: inconsistent shapes");
}

}  // namespace

RowMatrix phi_relu(const RowMatrix& X) {
  return X.cwiseMax(0.0) / std::sqrt(static_cast<double>(X.cols()));
}

Eigen::VectorXd phi_relu(const Eigen::VectorXd& x) {
  return x.cwiseMax(0.0) / std::sqrt(static_cast<double>(x.size()));
}

RowMatrix phi_exp(const RowMatrix& X, const RowMatrix& omega) {
  if (omega.cols() != X.cols()) throw std::invalid_argument("phi_exp: projection width mismatch");
  const double scale = 1.0 / std::sqrt(static_cast<double>(omega.rows()));
  RowMatrix out = X * omega.transpose();
  const Eigen::VectorXd half_norm = 0.5 * X.rowwise().squaredNorm();
  for (Eigen::Index i = 0; i < out.rows(); ++i)
    out.row(i) = scale * (out.row(i).array() - half_norm[i]).exp();
  return out;
}

Eigen::VectorXd phi_exp(const Eigen::VectorXd& x, const RowMatrix& omega) {
  RowMatrix X = x.transpose();
  return phi_exp(X, omega).row(0).transpose();
}

RowMatrix draw_projection(int m, int d, std::uint64_t seed) {
  if (m < 1 || d < 1) throw std::invalid_argument("draw_projection: sizes must be positive");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  RowMatrix omega(m, d);
  for (Eigen::Index k = 0; k < omega.size(); ++k) omega.data()[k] = normal(rng);
  return omega;
}

RowMatrix attention_exact(const RowMatrix& Q, const RowMatrix& K, const RowMatrix& V,
                          RowMatrix* weights) {
  check_shapes(Q, K, V);
  const Eigen::Index L = Q.rows();
  const Eigen::Index N = K.rows();
  const double scale = 1.0 / std::sqrt(static_cast<double>(Q.cols()));
  RowMatrix A(L, N);
  RowMatrix out(L, V.cols());
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < L; ++i) {
    A.row(i).noalias() = scale * Q.row(i) * K.transpose();
    const double mx = A.row(i).maxCoeff();
    A.row(i) = (A.row(i).array() - mx).exp();
    A.row(i) /= A.row(i).sum();
    out.row(i).noalias() = A.row(i) * V;
  }
  if (weights != nullptr) *weights = std::move(A);
  return out;
}

RowMatrix attention_exact_serial(const RowMatrix& Q, const RowMatrix& K, const RowMatrix& V) {
  check_shapes(Q, K, V);
  const Eigen::Index L = Q.rows(), N = K.rows(), d = Q.cols(), dv = V.cols();
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  std::vector<double> A(static_cast<std::size_t>(L * N));
  for (Eigen::Index i = 0; i < L; ++i) {
    double mx = -INFINITY;
    for (Eigen::Index j = 0; j < N; ++j) {
      double s = 0.0;
      for (Eigen::Index c = 0; c < d; ++c) s += Q(i, c) * K(j, c);
      A[i * N + j] = scale * s;
      mx = std::max(mx, A[i * N + j]);
    }
    double total = 0.0;
    for (Eigen::Index j = 0; j < N; ++j) {
      A[i * N + j] = std::exp(A[i * N + j] - mx);
      total += A[i * N + j];
    }
    for (Eigen::Index j = 0; j < N; ++j) A[i * N + j] /= total;
  }
  RowMatrix out = RowMatrix::Zero(L, dv);
  for (Eigen::Index i = 0; i < L; ++i)
    for (Eigen::Index j = 0; j < N; ++j)
      for (Eigen::Index c = 0; c < dv; ++c) out(i, c) += A[i * N + j] * V(j, c);
  return out;
}

RowMatrix favor_from_features(const RowMatrix& Qf, const RowMatrix& Kf, const RowMatrix& V,
                              FavorState* state) {
  if (Qf.cols() != Kf.cols() || Kf.rows() != V.rows())
    throw std::invalid_argument("favor: inconsistent shapes");
  const Eigen::Index m = Kf.cols();
  const Eigen::Index L = Qf.rows();
  RowMatrix kv(m, V.cols());
  Eigen::VectorXd ksum(m);
  // Parallel over feature rows so every reduction keeps a fixed order.
#pragma omp parallel for schedule(static)
  for (Eigen::Index r = 0; r < m; ++r) {
    kv.row(r).noalias() = Kf.col(r).transpose() * V;
    ksum[r] = Kf.col(r).sum();
  }
  RowMatrix out(L, V.cols());
  Eigen::VectorXd denom(L);
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < L; ++i) {
    denom[i] = Qf.row(i).dot(ksum) + kFavorEpsilon;
    out.row(i).noalias() = (Qf.row(i) * kv) / denom[i];
  }
  if (state != nullptr) {
    state->kv = std::move(kv);
    state->ksum = std::move(ksum);
    state->denom = std::move(denom);
  }
  return out;
}

RowMatrix favor_from_features_serial(const RowMatrix& Qf, const RowMatrix& Kf,
                                     const RowMatrix& V) {
  if (Qf.cols() != Kf.cols() || Kf.rows() != V.rows())
    throw std::invalid_argument("favor: inconsistent shapes");
  const Eigen::Index m = Kf.cols(), L = Qf.rows(), N = Kf.rows(), dv = V.cols();
  std::vector<double> kv(static_cast<std::size_t>(m * dv), 0.0);
  std::vector<double> ksum(static_cast<std::size_t>(m), 0.0);
  for (Eigen::Index j = 0; j < N; ++j)
    for (Eigen::Index r = 0; r < m; ++r) {
      ksum[r] += Kf(j, r);
      for (Eigen::Index c = 0; c < dv; ++c) kv[r * dv + c] += Kf(j, r) * V(j, c);
    }
  RowMatrix out(L, dv);
  for (Eigen::Index i = 0; i < L; ++i) {
    double den = kFavorEpsilon;
    for (Eigen::Index r = 0; r < m; ++r) den += Qf(i, r) * ksum[r];
    for (Eigen::Index c = 0; c < dv; ++c) {
      double num = 0.0;
      for (Eigen::Index r = 0; r < m; ++r) num += Qf(i, r) * kv[r * dv + c];
      out(i, c) = num / den;
    }
  }
  return out;
}

RowMatrix feature_map(const RowMatrix& X, FeatureKind kind, const RowMatrix* omega) {
  switch (kind) {
    case FeatureKind::Relu:
      return phi_relu(X);
    case FeatureKind::Exp:
      if (omega == nullptr) throw std::invalid_argument("feature_map: Exp needs a projection");
      return phi_exp(X, *omega);
    case FeatureKind::Softmax:
      break;
  }
  throw std::invalid_argument("feature_map: softmax has no finite feature map");
}

RowMatrix attention_favor(const RowMatrix& Q, const RowMatrix& K, const RowMatrix& V,
                          FeatureKind kind, const RowMatrix* omega) {
  check_shapes(Q, K, V);
  if (kind == FeatureKind::Softmax) return attention_exact(Q, K, V);
  const double c = std::pow(static_cast<double>(Q.cols()), -0.25);
  const RowMatrix Qs = c * Q;
  const RowMatrix Ks = c * K;
  return favor_from_features(feature_map(Qs, kind, omega), feature_map(Ks, kind, omega), V);
}

}  // namespace pmpc
