// Command-line entry points: gen-data, train, eval, bench, render.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "CLI11.hpp"
#include "pmpc/bench.hpp"
#include "pmpc/checkpoint.hpp"
#include "pmpc/config.hpp"
#include "pmpc/dataset_io.hpp"
#include "pmpc/grid_io.hpp"
#include "pmpc/render.hpp"
#include "pmpc/seed.hpp"
#include "pmpc/trainer.hpp"

namespace fs = std::filesystem;
using namespace pmpc;

namespace {

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void set_threads(int threads) {
#ifdef _OPENMP
  if (threads > 0) omp_set_num_threads(threads);
#else
  (void)threads;
#endif
}

RunConfig config_or_default(const std::string& path) {
  if (path.empty()) {
    std::istringstream empty;
    return parse_config(empty);
  }
  if (!fs::exists(path)) throw IoError("missing config file " + path);
  return load_config(path);
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

void require_file(const std::string& path, const char* what) {
  if (!fs::exists(path)) throw IoError(std::string("missing ") + what + " " + path);
}

void echo_config(const fs::path& path, const RunConfig& cfg) {
  auto out = open_out(path);
  write_config(out, cfg);
}

// gen-data -------------------------------------------------------------------

struct GenDataArgs {
  std::string config, out, text, grid;
  std::optional<std::uint64_t> seed;
  int threads = 0;
};

int run_gen_data(const GenDataArgs& a) {
  set_threads(a.threads);
  RunConfig cfg = config_or_default(a.config);
  if (a.seed) cfg.data_seed = *a.seed;
  const Dataset ds = generate_dataset(cfg.world, cfg.data, cfg.expert, cfg.dynamics, cfg.data_seed,
                                      [](const std::string& msg) { std::cerr << msg << '\n'; });
  save_dataset(a.out, ds);
  echo_config(a.out + ".cfg", cfg);
  if (!a.text.empty()) {
    auto out = open_out(a.text);
    export_dataset_text(out, ds);
  }
  if (!a.grid.empty()) save_grid(a.grid, make_doorway_world(cfg.world, derive_seed(cfg.data_seed, 0)));
  std::cout << "demos=" << ds.num_demos << " eval_demos=" << ds.num_eval_demos
            << " snippets=" << ds.snippets.size() << '\n';
  return 0;
}

// train ----------------------------------------------------------------------

struct TrainArgs {
  std::string config, data, out, init;
  std::optional<std::uint64_t> seed;
  std::optional<int> steps;
  bool deterministic = false;
  int threads = 0;
};

int run_train(const TrainArgs& a) {
  set_threads(a.threads);
  RunConfig cfg = config_or_default(a.config);
  if (a.seed) cfg.train.seed = *a.seed;
  if (a.steps) cfg.train.steps = *a.steps;
  cfg.train.deterministic = cfg.train.deterministic || a.deterministic;
  cfg.validate();
  require_file(a.data, "dataset");
  const Dataset ds = load_dataset(a.data);
  if (ds.horizon != cfg.horizon)
    throw CheckpointMismatch("dataset horizon " + std::to_string(ds.horizon) + " != mpc.horizon " +
                             std::to_string(cfg.horizon));
  if (ds.world_hash != world_spec_hash(cfg.world)) throw CheckpointMismatch("dataset world differs from config");

  const PolicyKind kind = cfg.train.target == TrainTarget::Ep ? PolicyKind::Ep : PolicyKind::Pmpc;
  const PerformerConfig pcfg = cfg.model_config(kind);
  const Performer model(pcfg, cfg.model_seed);
  std::vector<double> params;
  std::uint64_t start_step = 0;
  if (!a.init.empty()) {
    require_file(a.init, "checkpoint");
    Checkpoint ck = load_checkpoint(a.init, pcfg);
    params = std::move(ck.params);
    start_step = ck.step;
  } else {
    params = model.init_params();
  }

  std::vector<const Demonstration*> pool, held;
  for (const auto& d : ds.snippets) (ds.is_eval(d) ? held : pool).push_back(&d);
  if (pool.empty()) throw std::runtime_error("dataset has no training snippets");
  std::vector<const Demonstration*> eval_set;
  const int n_eval = std::min<int>(cfg.train.eval_snippets, static_cast<int>(held.size()));
  for (int k = 0; k < n_eval; ++k)
    eval_set.push_back(held[static_cast<std::size_t>(k) * held.size() / static_cast<std::size_t>(n_eval)]);

  echo_config(a.out + ".cfg", cfg);
  std::ofstream log = open_out(a.out + ".log");
  auto emit = [&log](const std::string& line) {
    std::cout << line << std::endl;
    log << line << std::endl;
  };
  const PlannerSettings settings = cfg.planner();
  AdamState opt(params.size());
  auto save = [&](std::uint64_t step) { save_checkpoint(a.out, Checkpoint{pcfg, cfg.model_seed, step, params}); };

  const std::uint64_t end = start_step + static_cast<std::uint64_t>(cfg.train.steps);
  for (std::uint64_t step = start_step + 1; step <= end; ++step) {
    const auto batch = sample_batch(pool, cfg.train.batch_size, cfg.train.seed, step);
    LossReport rep = train_step(model, params, batch, opt, cfg.train, settings, step);
    const bool eval_now = step % static_cast<std::uint64_t>(cfg.train.eval_every) == 0 || step == end;
    if (eval_now && !eval_set.empty()) {
      const LossReport ev = evaluate(model, params, eval_set, cfg.train, settings);
      rep.hausdorff = ev.hausdorff;
    }
    if (eval_now || step == start_step + 1) emit(format_report(rep));
    if (step % static_cast<std::uint64_t>(cfg.train.checkpoint_every) == 0) save(step);
  }
  save(end);
  return 0;
}

// eval -----------------------------------------------------------------------

struct EvalArgs {
  std::string config, ckpt, policy = "rmpc", out, traj, grid;
  std::optional<int> trials;
  std::optional<std::uint64_t> seed;
  bool no_expert = false;
  int threads = 0;
};

int run_eval(const EvalArgs& a) {
  set_threads(a.threads);
  RunConfig cfg = config_or_default(a.config);
  if (a.trials) cfg.eval.trials = *a.trials;
  if (a.seed) cfg.eval.seed = *a.seed;
  if (a.no_expert) cfg.eval.with_expert = false;
  cfg.validate();

  Policy policy;
  try {
    policy.kind = parse_policy(a.policy);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  policy.settings = cfg.planner();
  if (policy.kind != PolicyKind::Rmpc || !a.ckpt.empty()) {
    if (a.ckpt.empty()) throw ConfigError("--ckpt is required for policy " + a.policy);
    require_file(a.ckpt, "checkpoint");
    const PerformerConfig pcfg = cfg.model_config(policy.kind == PolicyKind::Rmpc ? PolicyKind::Pmpc : policy.kind);
    Checkpoint ck = load_checkpoint(a.ckpt, pcfg);
    if (policy.kind != PolicyKind::Rmpc) {
      policy.model = std::make_shared<const Performer>(pcfg, ck.seed);
      policy.params = std::move(ck.params);
    }
  }

  EvalOptions opts;
  opts.trials = cfg.eval.trials;
  opts.seed = cfg.eval.seed;
  opts.world = cfg.world;
  opts.episode = cfg.eval.episode;
  opts.with_expert = cfg.eval.with_expert;
  opts.expert = cfg.expert;
  opts.same_side = cfg.eval.same_side;
  const EvalReport report = eval_doorway(policy, opts);

  {
    auto out = open_out(a.out);
    write_eval_report(out, report);
  }
  echo_config(a.out + ".cfg", cfg);
  if (!a.traj.empty()) {
    auto out = open_out(a.traj);
    write_trajectory_header(out);
    for (const auto& row : report.rows) {
      const std::string tag = "trial" + std::to_string(row.index);
      Trajectory goal;
      goal.states.push_back(row.goal);
      write_trajectory(out, tag + "_goal", goal);
      if (!row.expert.states.empty()) write_trajectory(out, tag + "_expert", row.expert);
      write_trajectory(out, tag + "_policy", row.result.trajectory);
    }
  }
  if (!a.grid.empty()) save_grid(a.grid, make_doorway_world(cfg.world, cfg.eval.seed));
  std::cout << "policy=" << policy_name(report.kind) << " trials=" << report.trials
            << " successes=" << report.successes << '\n';
  return 0;
}

// bench ----------------------------------------------------------------------

struct BenchArgs {
  std::string config, out, mode;
  bool skip_scaling = false;
};

int run_bench(const BenchArgs& a) {
  RunConfig cfg = config_or_default(a.config);
  if (!a.mode.empty()) {
    try {
      cfg.bench.mode = parse_timing(a.mode);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }
  const BenchSpec spec = cfg.bench_spec();
  const auto rows = bench_attention_mpc(spec);
  {
    auto out = open_out(a.out);
    write_bench_csv(out, rows, spec.mode);
  }
  echo_config(a.out + ".cfg", cfg);
  if (!a.skip_scaling) {
    const FeatureKind kinds[] = {FeatureKind::Relu, FeatureKind::Exp, FeatureKind::Softmax};
    const auto series = bench_scaling(cfg.bench.scaling_lengths, kinds, cfg.bench.scaling_dim,
                                      cfg.bench.scaling_repetitions, 2, spec.mode);
    const fs::path p(a.out);
    auto out = open_out(p.parent_path() / (p.stem().string() + "_scaling.csv"));
    write_scaling_csv(out, series);
  }
  std::cout << "cells=" << rows.size() << '\n';
  return 0;
}

// render ---------------------------------------------------------------------

struct RenderArgs {
  std::string traj, grid, out, trial;
};

int run_render(const RenderArgs& a) {
  require_file(a.traj, "trajectory file");
  require_file(a.grid, "grid file");
  std::ifstream in(a.traj);
  const auto trajs = read_trajectories(in);
  const OccupancyGrid grid = load_grid(a.grid);
  auto out = open_out(a.out);
  render_svg(out, grid, trajs, a.trial.empty() ? "" : "trial" + a.trial + "_");
  return 0;
}

void fail(const char* kind, const std::string& msg) {
  std::string flat = msg;
  for (char& c : flat)
    if (c == '\n') c = ' ';
  std::fprintf(stderr, "error kind=%s msg=\"%s\"\n", kind, flat.c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Doorway navigation with learned MPC cost"};
  app.require_subcommand(1);

  GenDataArgs gd;
  auto* gen = app.add_subcommand("gen-data", "Generate expert demonstrations and windowed snippets");
  gen->add_option("--config", gd.config, "run configuration file");
  gen->add_option("--out", gd.out, "dataset output path")->required();
  gen->add_option("--seed", gd.seed, "data seed (overrides data.seed)");
  gen->add_option("--text", gd.text, "optional CSV export of the snippets");
  gen->add_option("--save-grid", gd.grid, "optional grid file of the first demo world");
  gen->add_option("--threads", gd.threads, "OpenMP threads (0 = default)");

  TrainArgs tr;
  auto* train = app.add_subcommand("train", "Train the performer through the MPC solver");
  train->add_option("--config", tr.config, "run configuration file");
  train->add_option("--data", tr.data, "dataset path")->required();
  train->add_option("--out", tr.out, "checkpoint path")->required();
  train->add_option("--seed", tr.seed, "training seed (overrides train.seed)");
  train->add_option("--steps", tr.steps, "optimizer steps (overrides train.steps)");
  train->add_option("--init", tr.init, "resume from this checkpoint");
  train->add_flag("--deterministic", tr.deterministic, "serial batch evaluation");
  train->add_option("--threads", tr.threads, "OpenMP threads (0 = default)");

  EvalArgs ev;
  auto* eval = app.add_subcommand("eval", "Paired doorway evaluation");
  eval->add_option("--config", ev.config, "run configuration file");
  eval->add_option("--ckpt", ev.ckpt, "checkpoint (required for ep and pmpc)");
  eval->add_option("--policy", ev.policy, "rmpc | ep | pmpc");
  eval->add_option("--trials", ev.trials, "number of trials (overrides eval.trials)");
  eval->add_option("--seed", ev.seed, "first trial seed (overrides eval.seed)");
  eval->add_option("--out", ev.out, "report path")->required();
  eval->add_option("--traj", ev.traj, "optional trajectory CSV for render");
  eval->add_option("--save-grid", ev.grid, "optional grid file of the first trial world");
  eval->add_flag("--no-expert", ev.no_expert, "skip expert generation and the Hausdorff metric");
  eval->add_option("--threads", ev.threads, "OpenMP threads (0 = default)");

  BenchArgs be;
  auto* bench = app.add_subcommand("bench", "Latency benchmarks");
  bench->add_option("--config", be.config, "run configuration file");
  bench->add_option("--out", be.out, "CSV path; scaling goes to <stem>_scaling.csv")->required();
  bench->add_option("--mode", be.mode, "wall | cpu");
  bench->add_flag("--skip-scaling", be.skip_scaling, "only run the pipeline grid");

  RenderArgs re;
  auto* render = app.add_subcommand("render", "Draw trajectories over a grid as SVG");
  render->add_option("--traj", re.traj, "trajectory CSV")->required();
  render->add_option("--grid", re.grid, "grid file")->required();
  render->add_option("--out", re.out, "SVG path")->required();
  render->add_option("--trial", re.trial, "only draw this trial index");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    fail("usage", e.what());
    return 2;
  }

  try {
    if (*gen) return run_gen_data(gd);
    if (*train) return run_train(tr);
    if (*eval) return run_eval(ev);
    if (*bench) return run_bench(be);
    if (*render) return run_render(re);
  } catch (const ConfigError& e) {
    fail("config", e.what());
  } catch (const CheckpointMismatch& e) {
    fail("mismatch", e.what());
  } catch (const IoError& e) {
    fail("io", e.what());
  } catch (const std::exception& e) {
    fail("runtime", e.what());
  }
  return 1;
}
