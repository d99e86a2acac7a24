#include "pmpc/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <ostream>
#include <random>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "pmpc/ilqr.hpp"
#include "pmpc/policy.hpp"

namespace pmpc {

const char* size_name(ModelSize s) { return s == ModelSize::Medium ? "medium" : "large"; }

ModelSize parse_size(const std::string& name) {
  if (name == "medium") return ModelSize::Medium;
  if (name == "large") return ModelSize::Large;
  throw std::invalid_argument("unknown model size: " + name);
}

const char* timing_name(TimingMode m) { return m == TimingMode::Wall ? "wall" : "cpu"; }

TimingMode parse_timing(const std::string& name) {
  if (name == "wall") return TimingMode::Wall;
  if (name == "cpu") return TimingMode::Cpu;
  throw std::invalid_argument("unknown timing mode: " + name);
}

PerformerConfig BenchCell::config() const {
  PerformerConfig c = size == ModelSize::Medium ? PerformerConfig::medium() : PerformerConfig::large();
  c.feature = feature;
  c.redraw = redraw;
  c.num_features = m;
  c.patch = patch;
  return c;
}

void BenchSpec::validate() const {
  if (repetitions < 5) throw std::invalid_argument("bench: repetitions must be >= 5");
  if (warmup < 0) throw std::invalid_argument("bench: warmup must be >= 0");
  for (const auto& c : cells) c.config().validate();
}

BenchSpec BenchSpec::default_grid() {
  BenchSpec s;
  auto add = [&s](ModelSize size, FeatureKind f, bool redraw, int m, int patch) {
    s.cells.push_back(BenchCell{size, f, redraw, m, patch});
  };
  add(ModelSize::Medium, FeatureKind::Relu, false, 64, 5);
  add(ModelSize::Medium, FeatureKind::Exp, false, 64, 5);
  add(ModelSize::Medium, FeatureKind::Exp, true, 64, 5);
  for (int m : {8, 16, 32, 128, 256}) {
    add(ModelSize::Medium, FeatureKind::Exp, false, m, 5);
    add(ModelSize::Medium, FeatureKind::Exp, true, m, 5);
  }
  for (int patch : {1, 2, 4, 10}) add(ModelSize::Medium, FeatureKind::Relu, false, 64, patch);
  add(ModelSize::Large, FeatureKind::Relu, false, 64, 5);
  add(ModelSize::Large, FeatureKind::Exp, false, 64, 5);
  add(ModelSize::Large, FeatureKind::Exp, true, 64, 5);
  return s;
}

double time_ms(const std::function<void()>& fn, TimingMode mode) {
  if (mode == TimingMode::Wall) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    const auto t1 = std::chrono::steady_clock::now();
    return std::chrono::duration<double, std::milli>(t1 - t0).count();
  }
  timespec a{}, b{};
  clock_gettime(CLOCK_PROCESS_CPUTIME_ID, &a);
  fn();
  clock_gettime(CLOCK_PROCESS_CPUTIME_ID, &b);
  return (static_cast<double>(b.tv_sec - a.tv_sec) * 1e3) + static_cast<double>(b.tv_nsec - a.tv_nsec) * 1e-6;
}

TimingStats summarize_times(std::vector<double> s) {
  if (s.empty()) throw std::invalid_argument("summarize_times: no samples");
  std::sort(s.begin(), s.end());
  auto quantile = [&s](double q) {
    const double pos = q * static_cast<double>(s.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, s.size() - 1);
    return s[lo] + (pos - static_cast<double>(lo)) * (s[hi] - s[lo]);
  };
  return {quantile(0.5), quantile(0.75) - quantile(0.25)};
}

namespace {

// Runs the timed region on a single thread and restores the previous setting.
class SingleThread {
 public:
  SingleThread() {
#ifdef _OPENMP
    prev_ = omp_get_max_threads();
    omp_set_num_threads(1);
#endif
  }
  ~SingleThread() {
#ifdef _OPENMP
    omp_set_num_threads(prev_);
#endif
  }
  SingleThread(const SingleThread&) = delete;
  SingleThread& operator=(const SingleThread&) = delete;

 private:
  int prev_ = 1;
};

}  // namespace

std::vector<BenchRow> bench_attention_mpc(const BenchSpec& spec) {
  spec.validate();
  SingleThread pin;
  const DoorwaySpec world_spec;
  const OccupancyGrid world = make_doorway_world(world_spec, 0);
  const Context ctx = crop_context(world, State{-0.8, 0.3, 0.4});
  const Image image = image_from_grid(ctx.grid);
  const auto field = std::make_shared<const DistanceField>(distance_field(ctx.grid));
  PlannerSettings settings;
  settings.solver.max_iterations = 1;
  const State goal{2.5, -1.0, 0.0};
  const std::vector<Control> u0(static_cast<std::size_t>(settings.horizon));

  struct Timed {
    Performer model;
    std::vector<double> params;
    std::uint64_t call = 0;
    std::vector<double> samples;
  };
  std::vector<Timed> timed;
  timed.reserve(spec.cells.size());
  for (const auto& cell : spec.cells) {
    Performer model(cell.config(), 7);
    std::vector<double> params = model.init_params();
    timed.push_back(Timed{std::move(model), std::move(params), 0, {}});
  }
  auto iteration = [&](Timed& c) {
    const Eigen::VectorXd e = c.model.forward(image, c.params, nullptr, ++c.call);
    const ResidualQuadratic res =
        embed_to_quadratic(std::span<const double>(e.data(), static_cast<std::size_t>(e.size())));
    const MPCProblem problem = make_context_problem(settings, field, goal, &res);
    const MPCSolution sol = solve(problem, u0, settings.solver);
    if (!std::isfinite(sol.cost)) throw std::runtime_error("bench: non-finite solve");
  };
  for (auto& c : timed)
    for (int k = 0; k < spec.warmup; ++k) iteration(c);
  // Repetitions are interleaved across cells so slow drift in machine speed hits every cell alike.
  for (int k = 0; k < spec.repetitions; ++k)
    for (auto& c : timed) c.samples.push_back(time_ms([&] { iteration(c); }, spec.mode));

  std::vector<BenchRow> rows;
  for (std::size_t i = 0; i < timed.size(); ++i) {
    const TimingStats st = summarize_times(timed[i].samples);
    rows.push_back(BenchRow{spec.cells[i], timed[i].model.param_count(), spec.cells[i].config().num_tokens(),
                            st.median, st.iqr});
  }
  return rows;
}

void write_bench_csv(std::ostream& out, std::span<const BenchRow> rows, TimingMode mode) {
  out << "size,feature,redraw,m,patch,tokens,params,median_ms,iqr_ms,mode\n";
  for (const auto& r : rows) {
    out << size_name(r.cell.size) << ',' << feature_name(r.cell.feature) << ',' << (r.cell.redraw ? 1 : 0)
        << ',' << r.cell.m << ',' << r.cell.patch << ',' << r.tokens << ',' << r.params << ','
        << r.median_ms << ',' << r.iqr_ms << ',' << timing_name(mode) << '\n';
  }
}

double loglog_slope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("loglog_slope: need >= 2 points");
  double mx = 0.0, my = 0.0;
  const double n = static_cast<double>(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) {
    mx += std::log(x[k]);
    my += std::log(y[k]);
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double dx = std::log(x[k]) - mx;
    sxy += dx * (std::log(y[k]) - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

ScalingSeries time_scaling(const std::string& name, const std::function<void(int)>& kernel,
                           std::span<const int> lengths, int repetitions, int warmup, TimingMode mode) {
  if (lengths.size() < 2 || repetitions < 1) throw std::invalid_argument("time_scaling: bad arguments");
  SingleThread pin;
  ScalingSeries s;
  s.name = name;
  std::vector<double> xs;
  for (int L : lengths) {
    for (int k = 0; k < warmup; ++k) kernel(L);
    std::vector<double> samples;
    for (int k = 0; k < repetitions; ++k) samples.push_back(time_ms([&] { kernel(L); }, mode));
    s.lengths.push_back(L);
    s.median_ms.push_back(std::max(summarize_times(samples).median, 1e-9));
    xs.push_back(static_cast<double>(L));
  }
  s.slope = loglog_slope(xs, s.median_ms);
  return s;
}

std::vector<ScalingSeries> bench_scaling(std::span<const int> lengths, std::span<const FeatureKind> kinds,
                                         int dim, int repetitions, int warmup, TimingMode mode) {
  std::vector<ScalingSeries> out;
  const int max_len = *std::max_element(lengths.begin(), lengths.end());
  std::mt19937_64 rng(11);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto random = [&](int rows, int cols) {
    RowMatrix m(rows, cols);
    for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = normal(rng);
    return m;
  };
  const RowMatrix Q = random(max_len, dim), K = random(max_len, dim), V = random(max_len, dim);
  const RowMatrix omega = draw_projection(dim, dim, 3);
  for (FeatureKind kind : kinds) {
    auto kernel = [&](int L) {
      const RowMatrix q = Q.topRows(L), k = K.topRows(L), v = V.topRows(L);
      const RowMatrix out = kind == FeatureKind::Softmax ? attention_exact(q, k, v)
                                                         : attention_favor(q, k, v, kind, &omega);
      if (!std::isfinite(out(0, 0))) throw std::runtime_error("bench: non-finite attention");
    };
    out.push_back(time_scaling(feature_name(kind), kernel, lengths, repetitions, warmup, mode));
  }
  return out;
}

void write_scaling_csv(std::ostream& out, std::span<const ScalingSeries> series) {
  out << "kernel,L,median_ms\n";
  for (const auto& s : series)
    for (std::size_t k = 0; k < s.lengths.size(); ++k)
      out << s.name << ',' << s.lengths[k] << ',' << s.median_ms[k] << '\n';
  out << "kernel,slope\n";
  for (const auto& s : series) out << s.name << ',' << s.slope << '\n';
}

}  // namespace pmpc
