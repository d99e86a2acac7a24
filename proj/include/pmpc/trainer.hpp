#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pmpc/imitation.hpp"
#include "pmpc/performer.hpp"
#include "pmpc/policy.hpp"

namespace pmpc {

enum class TrainTarget { Pmpc, Ep };

struct TrainConfig {
  TrainTarget target = TrainTarget::Pmpc;
  double learning_rate = 1e-4;
  int batch_size = 16;
  int steps = 1000;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double clip_norm = 1.0;
  int eval_every = 100;
  int eval_snippets = 32;
  int checkpoint_every = 500;
  std::uint64_t seed = 0;
  bool deterministic = false;
  bool expert_warm_start = false;  ///< start training solves from the demo controls instead of zeros
  LossConfig loss;

  void validate() const;
};

struct AdamState {
  std::vector<double> m, v;
  std::uint64_t t = 0;

  explicit AdamState(std::size_t n = 0) : m(n, 0.0), v(n, 0.0) {}
};

/// Loss and parameter gradient for one snippet.
struct DemoResult {
  double loss = 0.0;
  std::vector<double> grad;
  int solver_iterations = 0;
  bool converged = false;
  bool skipped = false;
  double hausdorff = -1.0;  ///< solution vs expert positions (Performer-MPC only)
};

/// Performer-MPC: forward → residual → context MPC solve from zero controls →
/// imitation loss → IFT VJP → performer backward. EP: MSE between the 3-dim
/// head and the expert's final snippet state.
DemoResult demo_gradient(const Performer& model, std::span<const double> params,
                         const Demonstration& demo, const PlannerSettings& settings,
                         const TrainConfig& cfg, std::uint64_t projection_seed, bool need_grad = true);

struct LossReport {
  std::uint64_t step = 0;
  double loss = 0.0;            ///< mean over non-skipped snippets
  double hausdorff = -1.0;      ///< mean on the eval subset; negative if not evaluated
  double solver_iters = 0.0;    ///< mean iLQR iterations
  double convergence_rate = 0.0;
  int skipped = 0;
  double grad_norm = 0.0;       ///< before clipping
};

/// One optimizer step on a batch; gradients are summed over the batch,
/// clipped to cfg.clip_norm and applied with Adam.
LossReport train_step(const Performer& model, std::vector<double>& params,
                      std::span<const Demonstration* const> batch, AdamState& opt,
                      const TrainConfig& cfg, const PlannerSettings& settings, std::uint64_t step);

/// Mean loss / Hausdorff / solver statistics without updating anything.
LossReport evaluate(const Performer& model, std::span<const double> params,
                    std::span<const Demonstration* const> snippets, const TrainConfig& cfg,
                    const PlannerSettings& settings);

/// Uniform sample with replacement, a pure function of (seed, step).
std::vector<const Demonstration*> sample_batch(std::span<const Demonstration* const> pool, int batch_size,
                                               std::uint64_t seed, std::uint64_t step);

/// `step=<n> loss=<v> hausdorff=<v> solver_iters=<v>`
std::string format_report(const LossReport& report);

}  // namespace pmpc
