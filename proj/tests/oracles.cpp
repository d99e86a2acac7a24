#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace oracle {

pmpc::DistanceField brute_distance_field(const pmpc::OccupancyGrid& grid) {
  pmpc::DistanceField f;
  f.resolution = grid.resolution;
  f.origin = grid.origin;
  f.width = grid.width;
  f.height = grid.height;
  f.values.assign(grid.cells.size(), 0.0);
  bool any = false;
  for (auto c : grid.cells) any = any || c != 0;
  for (int j = 0; j < grid.height; ++j)
    for (int i = 0; i < grid.width; ++i) {
      double& out = f.values[grid.index(i, j)];
      if (!any) {
        out = pmpc::kUnreachableDistance;
        continue;
      }
      const bool occ = grid.occupied(i, j);
      double best = std::numeric_limits<double>::infinity();
      for (int b = 0; b < grid.height; ++b)
        for (int a = 0; a < grid.width; ++a)
          if (grid.occupied(a, b) != occ) best = std::min(best, std::hypot(a - i, b - j) * grid.resolution);
      out = occ ? grid.resolution - best : best;
    }
  return f;
}

double bellman_ford_cost(const pmpc::OccupancyGrid& grid, double inflation, int si, int sj, int gi,
                         int gj) {
  const auto field = brute_distance_field(grid);
  const int n = grid.width * grid.height;
  auto blocked = [&](int i, int j) {
    return grid.occupied(i, j) || field.values[grid.index(i, j)] < inflation;
  };
  if (blocked(si, sj) || blocked(gi, gj)) return std::numeric_limits<double>::infinity();
  std::vector<double> d(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
  d[grid.index(si, sj)] = 0.0;
  for (int round = 0; round < n; ++round) {
    bool changed = false;
    for (int j = 0; j < grid.height; ++j)
      for (int i = 0; i < grid.width; ++i) {
        if (blocked(i, j)) continue;
        const double here = d[grid.index(i, j)];
        if (!std::isfinite(here)) continue;
        for (int dj = -1; dj <= 1; ++dj)
          for (int di = -1; di <= 1; ++di) {
            if (di == 0 && dj == 0) continue;
            const int a = i + di, b = j + dj;
            if (!grid.in_bounds(a, b) || blocked(a, b)) continue;
            const double w = grid.resolution * std::sqrt(static_cast<double>(di * di + dj * dj));
            if (here + w < d[grid.index(a, b)] - 1e-12) {
              d[grid.index(a, b)] = here + w;
              changed = true;
            }
          }
      }
    if (!changed) break;
  }
  return d[grid.index(gi, gj)];
}

RowMatrix kernel_attention(const RowMatrix& Q, const RowMatrix& K, const RowMatrix& V,
                           const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& phi) {
  const double c = std::pow(static_cast<double>(Q.cols()), -0.25);
  const Eigen::Index L = Q.rows(), N = K.rows();
  RowMatrix A(L, N);
  for (Eigen::Index i = 0; i < L; ++i) {
    const Eigen::VectorXd qi = phi(c * Q.row(i).transpose());
    for (Eigen::Index j = 0; j < N; ++j) A(i, j) = qi.dot(phi(c * K.row(j).transpose()));
  }
  RowMatrix out(L, V.cols());
  for (Eigen::Index i = 0; i < L; ++i) {
    double norm = pmpc::kFavorEpsilon;
    for (Eigen::Index j = 0; j < N; ++j) norm += A(i, j);
    for (Eigen::Index col = 0; col < V.cols(); ++col) {
      double s = 0.0;
      for (Eigen::Index j = 0; j < N; ++j) s += A(i, j) * V(j, col);
      out(i, col) = s / norm;
    }
  }
  return out;
}

RowMatrix softmax_attention(const RowMatrix& Q, const RowMatrix& K, const RowMatrix& V) {
  const double scale = 1.0 / std::sqrt(static_cast<double>(Q.cols()));
  RowMatrix out = RowMatrix::Zero(Q.rows(), V.cols());
  for (Eigen::Index i = 0; i < Q.rows(); ++i) {
    std::vector<double> w(static_cast<std::size_t>(K.rows()));
    double total = 0.0;
    for (Eigen::Index j = 0; j < K.rows(); ++j) {
      w[static_cast<std::size_t>(j)] = std::exp(scale * Q.row(i).dot(K.row(j)));
      total += w[static_cast<std::size_t>(j)];
    }
    for (Eigen::Index j = 0; j < K.rows(); ++j) out.row(i) += (w[static_cast<std::size_t>(j)] / total) * V.row(j);
  }
  return out;
}

double hausdorff(const std::vector<Eigen::Vector2d>& a, const std::vector<Eigen::Vector2d>& b) {
  auto directed = [](const auto& from, const auto& to) {
    double worst = 0.0;
    for (const auto& p : from) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& q : to) best = std::min(best, (p - q).norm());
      worst = std::max(worst, best);
    }
    return worst;
  };
  return std::max(directed(a, b), directed(b, a));
}

namespace {

template <int R, int C>
Eigen::Matrix<double, R, C> gaussian(std::mt19937_64& rng, double scale) {
  std::normal_distribution<double> n(0.0, scale);
  Eigen::Matrix<double, R, C> m;
  for (int k = 0; k < m.size(); ++k) m.data()[k] = n(rng);
  return m;
}

class LQCost final : public pmpc::CostModel {
 public:
  explicit LQCost(const LQInstance& lq) : lq_(lq) {}

  double stage(const pmpc::State& x, const pmpc::Control& u, int t) const override {
    const auto z = pmpc::stack_state_control(x, u);
    const auto& H = lq_.H[static_cast<std::size_t>(t)];
    return 0.5 * z.dot(H * z) + lq_.h[static_cast<std::size_t>(t)].dot(z);
  }
  double terminal(const pmpc::State& x) const override {
    const Eigen::Vector3d v = x.vec();
    return 0.5 * v.dot(lq_.HT * v) + lq_.hT.dot(v);
  }
  pmpc::StageQuadratization quadratize_stage(const pmpc::State& x, const pmpc::Control& u,
                                             int t) const override {
    const auto z = pmpc::stack_state_control(x, u);
    const auto& H = lq_.H[static_cast<std::size_t>(t)];
    const Eigen::Matrix<double, 5, 1> g = H * z + lq_.h[static_cast<std::size_t>(t)];
    pmpc::StageQuadratization q;
    q.value = stage(x, u, t);
    q.q_x = g.head<3>();
    q.q_u = g.tail<2>();
    q.Q_xx = H.topLeftCorner<3, 3>();
    q.Q_uu = H.bottomRightCorner<2, 2>();
    q.Q_ux = H.bottomLeftCorner<2, 3>();
    return q;
  }
  pmpc::StageQuadratization quadratize_terminal(const pmpc::State& x) const override {
    pmpc::StageQuadratization q;
    q.value = terminal(x);
    q.q_x = lq_.HT * x.vec() + lq_.hT;
    q.Q_xx = lq_.HT;
    return q;
  }

 private:
  LQInstance lq_;
};

}  // namespace

LQInstance random_lq(int horizon, std::mt19937_64& rng) {
  LQInstance lq;
  lq.horizon = horizon;
  lq.A = Eigen::Matrix3d::Identity() + gaussian<3, 3>(rng, 0.2);
  lq.B = gaussian<3, 2>(rng, 0.5);
  lq.c = gaussian<3, 1>(rng, 0.1);
  for (int t = 0; t < horizon; ++t) {
    const auto M = gaussian<5, 5>(rng, 0.5);
    lq.H.push_back(M.transpose() * M + 0.1 * Eigen::Matrix<double, 5, 5>::Identity());
    lq.h.push_back(gaussian<5, 1>(rng, 1.0));
  }
  const auto M = gaussian<3, 3>(rng, 0.5);
  lq.HT = M.transpose() * M + 0.1 * Eigen::Matrix3d::Identity();
  lq.hT = gaussian<3, 1>(rng, 1.0);
  lq.x0 = gaussian<3, 1>(rng, 1.0);
  return lq;
}

std::vector<Eigen::Vector2d> riccati_controls(const LQInstance& lq) {
  const int T = lq.horizon;
  std::vector<Eigen::Matrix<double, 2, 3>> Ks(static_cast<std::size_t>(T));
  std::vector<Eigen::Vector2d> ks(static_cast<std::size_t>(T));
  Eigen::Matrix3d V = lq.HT;
  Eigen::Vector3d v = lq.hT;
  for (int t = T - 1; t >= 0; --t) {
    const auto& H = lq.H[static_cast<std::size_t>(t)];
    const auto& h = lq.h[static_cast<std::size_t>(t)];
    const Eigen::Vector3d vn = v + V * lq.c;
    const Eigen::Matrix3d Qxx = H.topLeftCorner<3, 3>() + lq.A.transpose() * V * lq.A;
    const Eigen::Matrix2d Quu = H.bottomRightCorner<2, 2>() + lq.B.transpose() * V * lq.B;
    const Eigen::Matrix<double, 2, 3> Qux = H.bottomLeftCorner<2, 3>() + lq.B.transpose() * V * lq.A;
    const Eigen::Vector3d qx = h.head<3>() + lq.A.transpose() * vn;
    const Eigen::Vector2d qu = h.tail<2>() + lq.B.transpose() * vn;
    const Eigen::Matrix2d Quu_inv = Quu.inverse();
    Ks[static_cast<std::size_t>(t)] = -Quu_inv * Qux;
    ks[static_cast<std::size_t>(t)] = -Quu_inv * qu;
    V = Qxx - Qux.transpose() * Quu_inv * Qux;
    V = 0.5 * (V + V.transpose());
    v = qx - Qux.transpose() * Quu_inv * qu;
  }
  std::vector<Eigen::Vector2d> u;
  Eigen::Vector3d x = lq.x0;
  for (int t = 0; t < T; ++t) {
    u.push_back(Ks[static_cast<std::size_t>(t)] * x + ks[static_cast<std::size_t>(t)]);
    x = lq.A * x + lq.B * u.back() + lq.c;
  }
  return u;
}

std::vector<Eigen::Vector2d> dense_controls(const LQInstance& lq) {
  const int T = lq.horizon;
  const int n = 2 * T;
  // x_t = S_t U + s_t
  std::vector<Eigen::MatrixXd> S(static_cast<std::size_t>(T + 1), Eigen::MatrixXd::Zero(3, n));
  std::vector<Eigen::Vector3d> s(static_cast<std::size_t>(T + 1));
  s[0] = lq.x0;
  for (int t = 0; t < T; ++t) {
    S[static_cast<std::size_t>(t + 1)] = lq.A * S[static_cast<std::size_t>(t)];
    S[static_cast<std::size_t>(t + 1)].block(0, 2 * t, 3, 2) += lq.B;
    s[static_cast<std::size_t>(t + 1)] = lq.A * s[static_cast<std::size_t>(t)] + lq.c;
  }
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd g = Eigen::VectorXd::Zero(n);
  for (int t = 0; t < T; ++t) {
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(5, n);
    M.topRows(3) = S[static_cast<std::size_t>(t)];
    M(3, 2 * t) = 1.0;
    M(4, 2 * t + 1) = 1.0;
    Eigen::Matrix<double, 5, 1> m = Eigen::Matrix<double, 5, 1>::Zero();
    m.head<3>() = s[static_cast<std::size_t>(t)];
    const auto& H = lq.H[static_cast<std::size_t>(t)];
    G += M.transpose() * H * M;
    g += M.transpose() * (H * m + lq.h[static_cast<std::size_t>(t)]);
  }
  const auto& ST = S[static_cast<std::size_t>(T)];
  G += ST.transpose() * lq.HT * ST;
  g += ST.transpose() * (lq.HT * s[static_cast<std::size_t>(T)] + lq.hT);
  const Eigen::VectorXd U = -G.ldlt().solve(g);
  std::vector<Eigen::Vector2d> out;
  for (int t = 0; t < T; ++t) out.emplace_back(U[2 * t], U[2 * t + 1]);
  return out;
}

pmpc::MPCProblem lq_problem(const LQInstance& lq) {
  pmpc::MPCProblem p;
  p.horizon = lq.horizon;
  p.x0 = pmpc::State::from(lq.x0);
  const Eigen::Matrix3d A = lq.A;
  const Eigen::Matrix<double, 3, 2> B = lq.B;
  const Eigen::Vector3d c = lq.c;
  p.dynamics.step = [A, B, c](const pmpc::State& x, const pmpc::Control& u) {
    return pmpc::State::from(A * x.vec() + B * u.vec() + c);
  };
  p.dynamics.linearize = [A, B](const pmpc::State&, const pmpc::Control&) { return std::make_pair(A, B); };
  p.dynamics.curvature = [](const pmpc::State&, const pmpc::Control&, const Eigen::Vector3d&) {
    return pmpc::DynamicsCurvature{Eigen::Matrix3d::Zero(), Eigen::Matrix2d::Zero(),
                                   Eigen::Matrix<double, 2, 3>::Zero()};
  };
  p.cost = std::make_shared<LQCost>(lq);
  return p;
}

std::vector<double> numeric_gradient(const std::function<double(std::span<const double>)>& f,
                                     std::vector<double> x, double eps) {
  std::vector<double> g(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double keep = x[k];
    x[k] = keep + eps;
    const double fp = f(x);
    x[k] = keep - eps;
    const double fm = f(x);
    x[k] = keep;
    g[k] = (fp - fm) / (2 * eps);
  }
  return g;
}

double max_rel_error(std::span<const double> a, std::span<const double> b, double floor) {
  double worst = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k)
    worst = std::max(worst, std::abs(a[k] - b[k]) / std::max({std::abs(a[k]), std::abs(b[k]), floor}));
  return worst;
}

}  // namespace oracle
