#include "pmpc/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <memory>
#include <random>
#include <stdexcept>

#include "pmpc/seed.hpp"

namespace pmpc {

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0) || batch_size < 1 || steps < 0 || !(clip_norm > 0.0))
    throw std::invalid_argument("train: bad optimizer settings");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0) || !(adam_eps > 0.0))
    throw std::invalid_argument("train: bad moment decays");
  if (eval_every < 1 || eval_snippets < 0 || checkpoint_every < 1)
    throw std::invalid_argument("train: bad cadence");
}

DemoResult demo_gradient(const Performer& model, std::span<const double> params,
                         const Demonstration& demo, const PlannerSettings& settings,
                         const TrainConfig& cfg, std::uint64_t projection_seed, bool need_grad) {
  DemoResult res;
  Tape tape;
  const Eigen::VectorXd out =
      model.forward(image_from_grid(demo.context.grid), params, need_grad ? &tape : nullptr, projection_seed);

  if (cfg.target == TrainTarget::Ep) {
    const State& target = demo.states.back();
    const Eigen::Vector3d err = out.head<3>() - target.vec();
    res.loss = err.squaredNorm();
    if (need_grad) res.grad = model.backward(tape, params, 2.0 * err);
    res.converged = true;
    return res;
  }

  const ResidualQuadratic residual =
      embed_to_quadratic(std::span<const double>(out.data(), static_cast<std::size_t>(out.size())));
  auto field = std::make_shared<const DistanceField>(distance_field(demo.context.grid));
  const MPCProblem problem = make_context_problem(settings, field, demo.goal, &residual);
  const std::vector<Control> u0 = cfg.expert_warm_start
                                      ? demo.controls
                                      : std::vector<Control>(static_cast<std::size_t>(problem.horizon));
  const MPCSolution sol = solve(problem, u0, settings.solver);
  res.solver_iterations = sol.iterations;
  res.converged = sol.converged;
  if (sol.status == SolveStatus::NumericalFailure || !std::isfinite(sol.cost)) {
    res.skipped = true;
    return res;
  }
  const LossResult loss = imitation_loss(sol.trajectory, demo, problem.dynamics, cfg.loss);
  res.loss = loss.value;
  res.hausdorff = hausdorff(positions(sol.trajectory.states), positions(demo.states));
  if (!need_grad) return res;
  const SolutionVJP vjp = solution_vjp(problem, sol, loss.grad_u);
  const Eigen::VectorXd grad_e =
      Eigen::Map<const Eigen::VectorXd>(vjp.cost_parameter_grad.data(),
                                        static_cast<Eigen::Index>(vjp.cost_parameter_grad.size()));
  res.grad = model.backward(tape, params, grad_e);
  for (double g : res.grad)
    if (!std::isfinite(g)) {
      res.skipped = true;
      res.grad.clear();
      break;
    }
  return res;
}

namespace {

std::vector<DemoResult> run_batch(const Performer& model, std::span<const double> params,
                                  std::span<const Demonstration* const> batch, const TrainConfig& cfg,
                                  const PlannerSettings& settings, std::uint64_t step, bool need_grad) {
  std::vector<DemoResult> results(batch.size());
  const long long n = static_cast<long long>(batch.size());
#pragma omp parallel for schedule(dynamic) if (!cfg.deterministic)
  for (long long i = 0; i < n; ++i) {
    const std::uint64_t proj = derive_seed(cfg.seed, step * batch.size() + static_cast<std::uint64_t>(i));
    try {
      results[static_cast<std::size_t>(i)] =
          demo_gradient(model, params, *batch[static_cast<std::size_t>(i)], settings, cfg, proj, need_grad);
    } catch (const std::exception&) {
      results[static_cast<std::size_t>(i)].skipped = true;
    }
  }
  return results;
}

LossReport summarize(const std::vector<DemoResult>& results, std::uint64_t step) {
  LossReport rep;
  rep.step = step;
  int used = 0, haus_n = 0;
  double haus = 0.0, iters = 0.0, conv = 0.0;
  for (const auto& r : results) {
    iters += r.solver_iterations;
    conv += r.converged ? 1.0 : 0.0;
    if (r.skipped) {
      ++rep.skipped;
      continue;
    }
    rep.loss += r.loss;
    ++used;
    if (r.hausdorff >= 0.0) {
      haus += r.hausdorff;
      ++haus_n;
    }
  }
  if (used > 0) rep.loss /= used;
  if (haus_n > 0) rep.hausdorff = haus / haus_n;
  if (!results.empty()) {
    rep.solver_iters = iters / static_cast<double>(results.size());
    rep.convergence_rate = conv / static_cast<double>(results.size());
  }
  return rep;
}

}  // namespace

LossReport train_step(const Performer& model, std::vector<double>& params,
                      std::span<const Demonstration* const> batch, AdamState& opt,
                      const TrainConfig& cfg, const PlannerSettings& settings, std::uint64_t step) {
  if (batch.empty()) throw std::invalid_argument("train_step: empty batch");
  if (opt.m.size() != params.size()) opt = AdamState(params.size());
  const auto results = run_batch(model, params, batch, cfg, settings, step, true);
  LossReport rep = summarize(results, step);
  rep.hausdorff = -1.0;

  std::vector<double> grad(params.size(), 0.0);
  for (const auto& r : results) {
    if (r.skipped) continue;
    for (std::size_t k = 0; k < grad.size(); ++k) grad[k] += r.grad[k];
  }
  double norm2 = 0.0;
  for (double g : grad) norm2 += g * g;
  rep.grad_norm = std::sqrt(norm2);
  const double scale = rep.grad_norm > cfg.clip_norm ? cfg.clip_norm / rep.grad_norm : 1.0;

  opt.t += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(opt.t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(opt.t));
  for (std::size_t k = 0; k < params.size(); ++k) {
    const double g = grad[k] * scale;
    opt.m[k] = cfg.beta1 * opt.m[k] + (1.0 - cfg.beta1) * g;
    opt.v[k] = cfg.beta2 * opt.v[k] + (1.0 - cfg.beta2) * g * g;
    params[k] -= cfg.learning_rate * (opt.m[k] / bc1) / (std::sqrt(opt.v[k] / bc2) + cfg.adam_eps);
  }
  return rep;
}

LossReport evaluate(const Performer& model, std::span<const double> params,
                    std::span<const Demonstration* const> snippets, const TrainConfig& cfg,
                    const PlannerSettings& settings) {
  const auto results = run_batch(model, params, snippets, cfg, settings, 0, false);
  return summarize(results, 0);
}

std::vector<const Demonstration*> sample_batch(std::span<const Demonstration* const> pool, int batch_size,
                                               std::uint64_t seed, std::uint64_t step) {
  if (pool.empty()) throw std::invalid_argument("sample_batch: empty pool");
  std::mt19937_64 rng(derive_seed(seed, step));
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  std::vector<const Demonstration*> out;
  out.reserve(static_cast<std::size_t>(batch_size));
  for (int k = 0; k < batch_size; ++k) out.push_back(pool[pick(rng)]);
  return out;
}

std::string format_report(const LossReport& report) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "step=%llu loss=%.6g hausdorff=%.6g solver_iters=%.4g",
                static_cast<unsigned long long>(report.step), report.loss, report.hausdorff,
                report.solver_iters);
  return buf;
}

}  // namespace pmpc
