#include "pmpc/cost.hpp"

#include <cmath>
#include <stdexcept>

namespace pmpc {

void StaticCostConfig::validate() const {
  for (double w : {w_forward, w_reverse, w_turn, w_collision, w_goal, w_heading, w_terminal}) {
    if (!std::isfinite(w) || w < 0.0)
      throw std::invalid_argument("cost: weights must be finite and non-negative");
  }
  if (collision_points.empty()) throw std::invalid_argument("cost: need at least one collision point");
}

double time_weight(int t, int horizon, double w_terminal) {
  const double T = horizon;
  const double denom = T * (1.0 + w_terminal);
  return t < horizon ? 1.0 / denom : (T * w_terminal + 1.0) / denom;
}

namespace {

double quartic_control_cost(const Control& u, const StaticCostConfig& cfg) {
  const double v2 = u.v * u.v;
  const double w2 = u.omega * u.omega;
  const double wv = u.v >= 0.0 ? cfg.w_forward : cfg.w_reverse;
  return wv * v2 * v2 + cfg.w_turn * w2 * w2;
}

Eigen::Vector2d rotate(const Eigen::Vector2d& v, double phi) {
  const double c = std::cos(phi);
  const double s = std::sin(phi);
  return {c * v[0] - s * v[1], s * v[0] + c * v[1]};
}

// d/dphi of rotate(v, phi)
Eigen::Vector2d rotate_derivative(const Eigen::Vector2d& v, double phi) {
  const double c = std::cos(phi);
  const double s = std::sin(phi);
  return {-s * v[0] - c * v[1], c * v[0] - s * v[1]};
}

double collision_cost(const State& x, const StaticCostConfig& cfg, const DistanceField* field) {
  if (field == nullptr || cfg.w_collision == 0.0) return 0.0;
  double total = 0.0;
  const Eigen::Vector2d p(x.px, x.py);
  for (const auto& offset : cfg.collision_points) {
    const double d = signed_distance(*field, p + rotate(offset, x.phi)).distance;
    const double r = cfg.margin - d;
    if (r > 0.0) total += r * r;
  }
  return cfg.w_collision * total;
}

double goal_cost(const State& x, int t, int horizon, const StaticCostConfig& cfg) {
  const double wt = time_weight(t, horizon, cfg.w_terminal);
  const double dx = x.px - cfg.goal[0];
  const double dy = x.py - cfg.goal[1];
  return wt * (cfg.w_goal * (dx * dx + dy * dy) +
               cfg.w_heading * (1.0 - std::cos(x.phi - cfg.goal_heading)));
}

void add_state_terms(StageQuadratization& q, const State& x, int t, int horizon,
                     const StaticCostConfig& cfg, const DistanceField* field) {
  const double wt = time_weight(t, horizon, cfg.w_terminal);
  const double dx = x.px - cfg.goal[0];
  const double dy = x.py - cfg.goal[1];
  const double dphi = x.phi - cfg.goal_heading;
  q.value += goal_cost(x, t, horizon, cfg);
  q.q_x[0] += 2.0 * cfg.w_goal * wt * dx;
  q.q_x[1] += 2.0 * cfg.w_goal * wt * dy;
  q.q_x[2] += cfg.w_heading * wt * std::sin(dphi);
  q.Q_xx(0, 0) += 2.0 * cfg.w_goal * wt;
  q.Q_xx(1, 1) += 2.0 * cfg.w_goal * wt;
  q.Q_xx(2, 2) += cfg.w_heading * wt * std::cos(dphi);

  if (field == nullptr || cfg.w_collision == 0.0) return;
  const Eigen::Vector2d p(x.px, x.py);
  for (const auto& offset : cfg.collision_points) {
    const auto sample = signed_distance(*field, p + rotate(offset, x.phi));
    const double r = cfg.margin - sample.distance;
    if (r <= 0.0) continue;
    const Eigen::Vector3d J(sample.gradient[0], sample.gradient[1],
                            sample.gradient.dot(rotate_derivative(offset, x.phi)));
    q.value += cfg.w_collision * r * r;
    q.q_x += -2.0 * cfg.w_collision * r * J;
    q.Q_xx += 2.0 * cfg.w_collision * J * J.transpose();
  }
}

void add_residual_terms(StageQuadratization& q, const State& x, const Control& u,
                        const ResidualQuadratic& quad) {
  const Eigen::Matrix<double, 5, 1> z = stack_state_control(x, u);
  const Eigen::Matrix<double, 5, 5> H = 2.0 * quad.P.transpose() * quad.P;
  const Eigen::Matrix<double, 5, 1> g = H * z + quad.q;
  q.value += residual_cost(x, u, quad);
  q.q_x += g.head<3>();
  q.q_u += g.tail<2>();
  q.Q_xx += H.topLeftCorner<3, 3>();
  q.Q_uu += H.bottomRightCorner<2, 2>();
  q.Q_ux += H.bottomLeftCorner<2, 3>();
}

}  // namespace

double static_stage_cost(const State& x, const Control& u, int t, int horizon,
                         const StaticCostConfig& cfg, const DistanceField* field) {
  double total = collision_cost(x, cfg, field) + goal_cost(x, t, horizon, cfg);
  if (t < horizon) total += quartic_control_cost(u, cfg);
  return total;
}

Eigen::Matrix<double, 5, 1> stack_state_control(const State& x, const Control& u) {
  Eigen::Matrix<double, 5, 1> z;
  z << x.px, x.py, x.phi, u.v, u.omega;
  return z;
}

double residual_cost(const State& x, const Control& u, const ResidualQuadratic& quad) {
  const Eigen::Matrix<double, 5, 1> z = stack_state_control(x, u);
  const Eigen::VectorXd Pz = quad.P * z;
  return Pz.squaredNorm() + quad.q.dot(z);
}

double total_stage_cost(const State& x, const Control& u, int t, int horizon,
                        const StaticCostConfig& cfg, const DistanceField* field,
                        const ResidualQuadratic* quad) {
  double total = static_stage_cost(x, u, t, horizon, cfg, field);
  if (quad != nullptr && t < horizon) total += residual_cost(x, u, *quad);
  return total;
}

StageQuadratization quadratize(const State& x, const Control& u, int t, int horizon,
                               const StaticCostConfig& cfg, const DistanceField* field,
                               const ResidualQuadratic* quad) {
  StageQuadratization q;
  add_state_terms(q, x, t, horizon, cfg, field);
  if (t >= horizon) return q;

  q.value += quartic_control_cost(u, cfg);
  const double wv = u.v >= 0.0 ? cfg.w_forward : cfg.w_reverse;
  q.q_u[0] += 4.0 * wv * u.v * u.v * u.v;
  q.q_u[1] += 4.0 * cfg.w_turn * u.omega * u.omega * u.omega;
  q.Q_uu(0, 0) += 12.0 * wv * u.v * u.v;
  q.Q_uu(1, 1) += 12.0 * cfg.w_turn * u.omega * u.omega;
  if (quad != nullptr) add_residual_terms(q, x, u, *quad);
  return q;
}

ResidualQuadratic embed_to_quadratic(std::span<const double> embedding, int rank) {
  if (rank < 1 || embedding.size() != static_cast<std::size_t>(rank * 5 + 5))
    throw std::invalid_argument("embed_to_quadratic: embedding length must be rank*5 + 5");
  ResidualQuadratic quad;
  quad.P.resize(rank, 5);
  for (int r = 0; r < rank; ++r)
    for (int c = 0; c < 5; ++c) quad.P(r, c) = embedding[static_cast<std::size_t>(r * 5 + c)];
  for (int c = 0; c < 5; ++c) quad.q[c] = embedding[static_cast<std::size_t>(rank * 5 + c)];
  return quad;
}

std::vector<double> vectorize(const ResidualQuadratic& quad) {
  std::vector<double> e;
  e.reserve(static_cast<std::size_t>(quad.rank() * 5 + 5));
  for (int r = 0; r < quad.rank(); ++r)
    for (int c = 0; c < 5; ++c) e.push_back(quad.P(r, c));
  for (int c = 0; c < 5; ++c) e.push_back(quad.q[c]);
  return e;
}

NavigationCost::NavigationCost(StaticCostConfig cfg, std::shared_ptr<const DistanceField> field,
                               int horizon, std::optional<ResidualQuadratic> residual)
    : cfg_(std::move(cfg)), field_(std::move(field)), horizon_(horizon),
      residual_(std::move(residual)) {
  cfg_.validate();
  if (horizon_ < 1) throw std::invalid_argument("cost: horizon must be >= 1");
}

double NavigationCost::stage(const State& x, const Control& u, int t) const {
  return total_stage_cost(x, u, t, horizon_, cfg_, field_.get(), residual());
}

double NavigationCost::terminal(const State& x) const {
  return static_stage_cost(x, Control{}, horizon_, horizon_, cfg_, field_.get());
}

StageQuadratization NavigationCost::quadratize_stage(const State& x, const Control& u,
                                                     int t) const {
  return quadratize(x, u, t, horizon_, cfg_, field_.get(), residual());
}

StageQuadratization NavigationCost::quadratize_terminal(const State& x) const {
  return quadratize(x, Control{}, horizon_, horizon_, cfg_, field_.get(), nullptr);
}

Eigen::Matrix3d NavigationCost::state_curvature(const State& x) const {
  Eigen::Matrix3d H = Eigen::Matrix3d::Zero();
  if (!field_ || cfg_.w_collision == 0.0) return H;
  const Eigen::Vector2d p(x.px, x.py);
  for (const auto& offset : cfg_.collision_points) {
    const Eigen::Vector2d rotated = rotate(offset, x.phi);
    const auto sample = signed_distance(*field_, p + rotated);
    const double r = cfg_.margin - sample.distance;
    if (r <= 0.0) continue;
    // Hessian of d(p(x)): field curvature pulled back, plus d's gradient on p's curvature.
    Eigen::Matrix<double, 2, 3> Jp;
    Jp << 1.0, 0.0, 0.0, 0.0, 1.0, 0.0;
    Jp.col(2) = rotate_derivative(offset, x.phi);
    Eigen::Matrix2d Hd;
    Hd << 0.0, sample.cross, sample.cross, 0.0;
    Eigen::Matrix3d D = Jp.transpose() * Hd * Jp;
    D(2, 2) -= sample.gradient.dot(rotated);
    H -= 2.0 * cfg_.w_collision * r * D;
  }
  return H;
}

int NavigationCost::parameter_dim() const {
  return residual_ ? residual_->rank() * 5 + 5 : 0;
}

void NavigationCost::accumulate_parameter_vjp(const State& x, const Control& u, int t,
                                              const Eigen::Vector3d& dx,
                                              const Eigen::Vector2d& du,
                                              std::span<double> grad) const {
  if (!residual_ || t >= horizon_) return;
  const auto& quad = *residual_;
  const int rank = quad.rank();
  if (grad.size() != static_cast<std::size_t>(rank * 5 + 5))
    throw std::invalid_argument("accumulate_parameter_vjp: gradient size mismatch");
  const Eigen::Matrix<double, 5, 1> z = stack_state_control(x, u);
  Eigen::Matrix<double, 5, 1> dz;
  dz << dx, du;
  // s = 2 zᵀPᵀP dz + qᵀ dz  =>  ds/dP = 2 P (z dzᵀ + dz zᵀ),  ds/dq = dz
  const Eigen::MatrixXd dP = 2.0 * quad.P * (z * dz.transpose() + dz * z.transpose());
  for (int r = 0; r < rank; ++r)
    for (int c = 0; c < 5; ++c) grad[static_cast<std::size_t>(r * 5 + c)] += dP(r, c);
  for (int c = 0; c < 5; ++c) grad[static_cast<std::size_t>(rank * 5 + c)] += dz[c];
}

}  // namespace pmpc
