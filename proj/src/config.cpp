#include "pmpc/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace pmpc {

namespace {

struct Entry {
  std::string key;
  std::function<std::string()> get;
  std::function<void(const std::string&)> set;
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string show(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("config: " + key + " expects a number, got '" + v + "'");
  }
}

template <typename Int>
Int to_int(const std::string& key, const std::string& v) {
  Int out{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size())
    throw ConfigError("config: " + key + " expects an integer, got '" + v + "'");
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("config: " + key + " expects true/false, got '" + v + "'");
}

std::vector<Entry> registry(RunConfig& c) {
  std::vector<Entry> r;
  auto num = [&r](std::string key, double& ref) {
    r.push_back({key, [&ref] { return show(ref); }, [&ref, key](const std::string& v) { ref = to_double(key, v); }});
  };
  auto integer = [&r](std::string key, int& ref) {
    r.push_back({key, [&ref] { return std::to_string(ref); },
                 [&ref, key](const std::string& v) { ref = to_int<int>(key, v); }});
  };
  auto u64 = [&r](std::string key, std::uint64_t& ref) {
    r.push_back({key, [&ref] { return std::to_string(ref); },
                 [&ref, key](const std::string& v) { ref = to_int<std::uint64_t>(key, v); }});
  };
  auto boolean = [&r](std::string key, bool& ref) {
    r.push_back({key, [&ref] { return std::string(ref ? "true" : "false"); },
                 [&ref, key](const std::string& v) { ref = to_bool(key, v); }});
  };
  auto solver = [&](const std::string& p, SolverConfig& s) {
    integer(p + ".max_iterations", s.max_iterations);
    num(p + ".tolerance", s.tolerance);
    num(p + ".rel_cost_tolerance", s.rel_cost_tolerance);
    num(p + ".lambda_init", s.lambda_init);
    num(p + ".lambda_max", s.lambda_max);
    num(p + ".lambda_factor", s.lambda_factor);
    num(p + ".ls_shrink", s.ls_shrink);
    num(p + ".ls_min_step", s.ls_min_step);
    num(p + ".armijo", s.armijo);
  };

  num("dynamics.dt", c.dynamics.dt);
  num("dynamics.v_min", c.dynamics.v_min);
  num("dynamics.v_max", c.dynamics.v_max);
  num("dynamics.omega_min", c.dynamics.omega_min);
  num("dynamics.omega_max", c.dynamics.omega_max);

  num("cost.w_forward", c.cost.w_forward);
  num("cost.w_reverse", c.cost.w_reverse);
  num("cost.w_turn", c.cost.w_turn);
  num("cost.w_collision", c.cost.w_collision);
  num("cost.w_goal", c.cost.w_goal);
  num("cost.w_heading", c.cost.w_heading);
  num("cost.w_terminal", c.cost.w_terminal);
  num("cost.margin", c.cost.margin);

  integer("mpc.horizon", c.horizon);
  solver("solver", c.solver);
  solver("tracking", c.tracking);

  integer("expert.horizon", c.expert.horizon);
  integer("expert.max_iterations", c.expert.max_iterations);
  num("expert.waypoint_spacing", c.expert.waypoint_spacing);
  num("expert.goal_tolerance", c.expert.goal_tolerance);
  num("expert.w_goal", c.expert.cost.w_goal);
  num("expert.w_collision", c.expert.cost.w_collision);

  num("world.extent", c.world.extent);
  num("world.resolution", c.world.resolution);
  num("world.wall_x", c.world.wall_x);
  num("world.doorway_width", c.world.doorway_width);
  num("world.wall_thickness", c.world.wall_thickness);
  num("world.door_offset_range", c.world.door_offset_range);
  num("world.clearance", c.world.clearance);
  num("world.inflation", c.world.inflation);

  integer("performer.layers", c.performer.layers);
  integer("performer.heads", c.performer.heads);
  integer("performer.embed_dim", c.performer.embed_dim);
  integer("performer.mlp_dim", c.performer.mlp_dim);
  integer("performer.patch", c.performer.patch);
  r.push_back({"performer.feature", [&c] { return std::string(feature_name(c.performer.feature)); },
               [&c](const std::string& v) {
                 try {
                   c.performer.feature = parse_feature(v);
                 } catch (const std::invalid_argument& e) {
                   throw ConfigError(std::string("config: performer.feature: ") + e.what());
                 }
               }});
  integer("performer.num_features", c.performer.num_features);
  boolean("performer.redraw", c.performer.redraw);
  integer("performer.readout_token", c.performer.readout_token);
  u64("performer.seed", c.model_seed);

  r.push_back({"train.target", [&c] { return std::string(c.train.target == TrainTarget::Ep ? "ep" : "pmpc"); },
               [&c](const std::string& v) {
                 if (v == "ep") c.train.target = TrainTarget::Ep;
                 else if (v == "pmpc") c.train.target = TrainTarget::Pmpc;
                 else throw ConfigError("config: train.target must be pmpc or ep");
               }});
  num("train.learning_rate", c.train.learning_rate);
  integer("train.batch_size", c.train.batch_size);
  integer("train.steps", c.train.steps);
  num("train.beta1", c.train.beta1);
  num("train.beta2", c.train.beta2);
  num("train.adam_eps", c.train.adam_eps);
  num("train.clip_norm", c.train.clip_norm);
  integer("train.eval_every", c.train.eval_every);
  integer("train.eval_snippets", c.train.eval_snippets);
  integer("train.checkpoint_every", c.train.checkpoint_every);
  u64("train.seed", c.train.seed);
  boolean("train.expert_warm_start", c.train.expert_warm_start);
  num("train.beta_heading", c.train.loss.beta_heading);
  num("train.beta_control", c.train.loss.beta_control);

  integer("data.num_demos", c.data.num_demos);
  integer("data.stride", c.data.stride);
  num("data.eval_fraction", c.data.eval_fraction);
  u64("data.seed", c.data_seed);

  integer("eval.trials", c.eval.trials);
  u64("eval.seed", c.eval.seed);
  num("eval.success_radius", c.eval.episode.success_radius);
  integer("eval.max_steps", c.eval.episode.max_steps);
  boolean("eval.with_expert", c.eval.with_expert);
  boolean("eval.same_side", c.eval.same_side);

  integer("bench.repetitions", c.bench.repetitions);
  integer("bench.warmup", c.bench.warmup);
  r.push_back({"bench.mode", [&c] { return std::string(timing_name(c.bench.mode)); },
               [&c](const std::string& v) {
                 try {
                   c.bench.mode = parse_timing(v);
                 } catch (const std::invalid_argument& e) {
                   throw ConfigError(std::string("config: bench.mode: ") + e.what());
                 }
               }});
  r.push_back({"bench.grid", [&c] { return c.bench.grid; },
               [&c](const std::string& v) {
                 if (v != "default" && v != "quick") throw ConfigError("config: bench.grid must be default or quick");
                 c.bench.grid = v;
               }});
  r.push_back({"bench.scaling_lengths",
               [&c] {
                 std::string s;
                 for (std::size_t k = 0; k < c.bench.scaling_lengths.size(); ++k)
                   s += (k ? "," : "") + std::to_string(c.bench.scaling_lengths[k]);
                 return s;
               },
               [&c](const std::string& v) {
                 c.bench.scaling_lengths.clear();
                 std::stringstream ss(v);
                 std::string item;
                 while (std::getline(ss, item, ','))
                   c.bench.scaling_lengths.push_back(to_int<int>("bench.scaling_lengths", trim(item)));
               }});
  integer("bench.scaling_dim", c.bench.scaling_dim);
  integer("bench.scaling_repetitions", c.bench.scaling_repetitions);
  return r;
}

}  // namespace

void RunConfig::validate() const {
  try {
    dynamics.validate();
    cost.validate();
    solver.validate();
    tracking.validate();
    expert.validate();
    world.validate();
    performer.validate();
    train.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  if (horizon < 1) throw ConfigError("config: mpc.horizon must be >= 1");
  if (data.num_demos < 1 || data.stride < 1 || data.eval_fraction < 0.0 || data.eval_fraction >= 1.0)
    throw ConfigError("config: bad data section");
  if (eval.trials < 1 || eval.episode.max_steps < 0 || !(eval.episode.success_radius > 0.0))
    throw ConfigError("config: bad eval section");
  if (bench.repetitions < 5) throw ConfigError("config: bench.repetitions must be >= 5");
  if (bench.scaling_lengths.size() < 2) throw ConfigError("config: bench.scaling_lengths needs >= 2 values");
}

PlannerSettings RunConfig::planner() const {
  PlannerSettings s;
  s.dynamics = dynamics;
  s.cost = cost;
  s.solver = solver;
  s.tracking_solver = tracking;
  s.horizon = horizon;
  return s;
}

PerformerConfig RunConfig::model_config(PolicyKind kind) const {
  PerformerConfig c = performer;
  c.output_dim = kind == PolicyKind::Ep ? 3 : kEmbeddingDim;
  return c;
}

BenchSpec RunConfig::bench_spec() const {
  BenchSpec s = BenchSpec::default_grid();
  if (bench.grid == "quick") {
    s.cells.clear();
    s.cells.push_back({ModelSize::Medium, FeatureKind::Relu, false, 64, 5});
    s.cells.push_back({ModelSize::Medium, FeatureKind::Exp, false, 64, 5});
    s.cells.push_back({ModelSize::Medium, FeatureKind::Exp, true, 64, 5});
    s.cells.push_back({ModelSize::Medium, FeatureKind::Relu, false, 64, 10});
  }
  s.repetitions = bench.repetitions;
  s.warmup = bench.warmup;
  s.mode = bench.mode;
  return s;
}

RunConfig parse_config(std::istream& in) {
  RunConfig cfg;
  auto reg = registry(cfg);
  std::map<std::string, const Entry*> index;
  for (const auto& e : reg) index[e.key] = &e;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config: line " + std::to_string(lineno) + " is not key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto it = index.find(key);
    if (it == index.end()) throw ConfigError("config: unknown key '" + key + "' on line " + std::to_string(lineno));
    it->second->set(value);
  }
  cfg.data.horizon = cfg.horizon;
  cfg.validate();
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path.string());
  return parse_config(in);
}

void write_config(std::ostream& out, const RunConfig& cfg) {
  RunConfig copy = cfg;
  for (const auto& e : registry(copy)) out << e.key << " = " << e.get() << '\n';
}

std::vector<std::string> config_keys() {
  RunConfig c;
  std::vector<std::string> keys;
  for (const auto& e : registry(c)) keys.push_back(e.key);
  return keys;
}

}  // namespace pmpc
