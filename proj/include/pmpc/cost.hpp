#pragma once

#include <memory>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "pmpc/dynamics.hpp"
#include "pmpc/gridworld.hpp"

namespace pmpc {

/// Hand-engineered navigation cost: asymmetric quartic control penalties,
/// margin-offset collision penalty and a time-weighted goal term.
struct StaticCostConfig {
  double w_forward = 0.1;   ///< w1, u_v >= 0
  double w_reverse = 0.1;   ///< w2, u_v < 0
  double w_turn = 0.1;      ///< w3
  double w_collision = 10.0;///< w4
  double w_goal = 1.0;      ///< w5
  double w_heading = 0.3;   ///< w6
  double w_terminal = 9.0;  ///< w_T
  double margin = 0.3;      ///< [m]
  std::vector<Eigen::Vector2d> collision_points{{-0.2, 0.0}, {0.0, 0.0}, {0.2, 0.0}};
  Eigen::Vector2d goal = Eigen::Vector2d::Zero();
  double goal_heading = 0.0;

  void validate() const;
};

/// Learned residual zᵀPᵀPz + qᵀz over z = [x; u] ∈ R^5.
struct ResidualQuadratic {
  static constexpr int kDim = 5;
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(kDim, kDim);  ///< r x 5
  Eigen::Matrix<double, 5, 1> q = Eigen::Matrix<double, 5, 1>::Zero();

  int rank() const { return static_cast<int>(P.rows()); }
  bool is_zero() const { return P.isZero(0.0) && q.isZero(0.0); }
};

inline constexpr int kResidualRank = 5;
inline constexpr int kEmbeddingDim = kResidualRank * 5 + 5;

/// Second-order model of one stage. At the terminal stage the control blocks
/// are zero.
struct StageQuadratization {
  double value = 0.0;
  Eigen::Vector3d q_x = Eigen::Vector3d::Zero();
  Eigen::Vector2d q_u = Eigen::Vector2d::Zero();
  Eigen::Matrix3d Q_xx = Eigen::Matrix3d::Zero();
  Eigen::Matrix2d Q_uu = Eigen::Matrix2d::Zero();
  Eigen::Matrix<double, 2, 3> Q_ux = Eigen::Matrix<double, 2, 3>::Zero();
};

/// w̄_T(t): 1/(T(1+w_T)) for t < T and (T w_T + 1)/(T(1+w_T)) at t = T.
double time_weight(int t, int horizon, double w_terminal);

/// Static cost c̄ at stage t. At t == horizon the control terms are dropped.
/// `field` may be null (no obstacles).
double static_stage_cost(const State& x, const Control& u, int t, int horizon,
                         const StaticCostConfig& cfg, const DistanceField* field);

Eigen::Matrix<double, 5, 1> stack_state_control(const State& x, const Control& u);

double residual_cost(const State& x, const Control& u, const ResidualQuadratic& quad);

/// Static plus residual; the terminal stage carries the static terms only.
double total_stage_cost(const State& x, const Control& u, int t, int horizon,
                        const StaticCostConfig& cfg, const DistanceField* field,
                        const ResidualQuadratic* quad);

/// Exact derivatives for the polynomial, heading and residual terms;
/// Gauss-Newton for the collision term.
StageQuadratization quadratize(const State& x, const Control& u, int t, int horizon,
                               const StaticCostConfig& cfg, const DistanceField* field,
                               const ResidualQuadratic* quad);

/// First r*5 entries fill P row-major, the last 5 fill q.
ResidualQuadratic embed_to_quadratic(std::span<const double> embedding,
                                     int rank = kResidualRank);
std::vector<double> vectorize(const ResidualQuadratic& quad);

/// Cost interface consumed by the trajectory optimizer. Stage indices run
/// over [0, horizon); the terminal cost is evaluated on x_T.
class CostModel {
 public:
  virtual ~CostModel() = default;
  virtual double stage(const State& x, const Control& u, int t) const = 0;
  virtual double terminal(const State& x) const = 0;
  virtual StageQuadratization quadratize_stage(const State& x, const Control& u, int t) const = 0;
  virtual StageQuadratization quadratize_terminal(const State& x) const = 0;

  /// Second-order state terms that quadratize_* leaves out (Gauss-Newton
  /// residue). Adding this to Q_xx gives the exact state Hessian.
  virtual Eigen::Matrix3d state_curvature(const State& /*x*/) const { return Eigen::Matrix3d::Zero(); }

  /// Number of differentiable cost parameters (0 when the cost is fixed).
  virtual int parameter_dim() const { return 0; }
  /// grad += d/dθ [ ∇_{x,u} c_t(x, u; θ) · (dx, du) ] with (x, u, dx, du) held fixed.
  virtual void accumulate_parameter_vjp(const State& /*x*/, const Control& /*u*/, int /*t*/,
                                        const Eigen::Vector3d& /*dx*/,
                                        const Eigen::Vector2d& /*du*/,
                                        std::span<double> /*grad*/) const {}
  /// Same for the terminal cost.
  virtual void accumulate_terminal_parameter_vjp(const State& /*x*/,
                                                 const Eigen::Vector3d& /*dx*/,
                                                 std::span<double> /*grad*/) const {}
};

/// Static navigation cost with an optional learned residual. The residual's
/// parameters are the de-vectorized embedding, so parameter_dim() is r*5 + 5
/// when a residual is attached.
class NavigationCost final : public CostModel {
 public:
  NavigationCost(StaticCostConfig cfg, std::shared_ptr<const DistanceField> field,
                 int horizon, std::optional<ResidualQuadratic> residual = std::nullopt);

  double stage(const State& x, const Control& u, int t) const override;
  double terminal(const State& x) const override;
  StageQuadratization quadratize_stage(const State& x, const Control& u, int t) const override;
  StageQuadratization quadratize_terminal(const State& x) const override;
  Eigen::Matrix3d state_curvature(const State& x) const override;

  int parameter_dim() const override;
  void accumulate_parameter_vjp(const State& x, const Control& u, int t,
                                const Eigen::Vector3d& dx, const Eigen::Vector2d& du,
                                std::span<double> grad) const override;

  const StaticCostConfig& config() const { return cfg_; }
  const ResidualQuadratic* residual() const { return residual_ ? &*residual_ : nullptr; }
  const DistanceField* field() const { return field_.get(); }
  int horizon() const { return horizon_; }

 private:
  StaticCostConfig cfg_;
  std::shared_ptr<const DistanceField> field_;
  int horizon_;
  std::optional<ResidualQuadratic> residual_;
};

}  // namespace pmpc
