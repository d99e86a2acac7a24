#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "pmpc/bench.hpp"
#include "pmpc/imitation.hpp"
#include "pmpc/performer.hpp"
#include "pmpc/policy.hpp"
#include "pmpc/trainer.hpp"

namespace pmpc {

struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct EvalConfig {
  int trials = 100;
  std::uint64_t seed = 1000000;
  EpisodeConfig episode;
  bool with_expert = true;
  bool same_side = false;
};

struct BenchConfig {
  int repetitions = 20;
  int warmup = 5;
  TimingMode mode = TimingMode::Wall;
  std::string grid = "default";  ///< default | quick
  std::vector<int> scaling_lengths{100, 400, 1600, 6400};
  int scaling_dim = 32;
  int scaling_repetitions = 7;
};

/// Every tunable of the pipeline. Serialized as flat `section.key = value`
/// lines; `#` starts a comment; unknown keys are rejected.
struct RunConfig {
  DynamicsConfig dynamics;
  StaticCostConfig cost;
  SolverConfig solver;
  SolverConfig tracking;
  int horizon = 20;
  ExpertConfig expert;
  DoorwaySpec world;
  PerformerConfig performer = PerformerConfig::desk();
  std::uint64_t model_seed = 0;
  TrainConfig train;
  DataConfig data;
  std::uint64_t data_seed = 0;
  EvalConfig eval;
  BenchConfig bench;

  void validate() const;
  PlannerSettings planner() const;
  /// Performer config with the readout sized for the policy (3 for EP).
  PerformerConfig model_config(PolicyKind kind) const;
  BenchSpec bench_spec() const;
};

RunConfig parse_config(std::istream& in);
RunConfig load_config(const std::filesystem::path& path);
/// Writes every key with its current value; parse_config of the output
/// reproduces the config.
void write_config(std::ostream& out, const RunConfig& cfg);
std::vector<std::string> config_keys();

}  // namespace pmpc
