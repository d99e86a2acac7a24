#pragma once

#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "pmpc/performer.hpp"

namespace pmpc {

enum class ModelSize { Medium, Large };
enum class TimingMode { Wall, Cpu };

const char* size_name(ModelSize s);
ModelSize parse_size(const std::string& name);
const char* timing_name(TimingMode m);
TimingMode parse_timing(const std::string& name);

struct BenchCell {
  ModelSize size = ModelSize::Medium;
  FeatureKind feature = FeatureKind::Relu;
  bool redraw = false;
  int m = 64;     ///< random features (Exp only)
  int patch = 5;

  PerformerConfig config() const;
};

struct BenchSpec {
  std::vector<BenchCell> cells;
  int repetitions = 20;
  int warmup = 5;
  TimingMode mode = TimingMode::Wall;

  void validate() const;
  /// Feature-type, random-feature, redraw and patch-size ablations.
  static BenchSpec default_grid();
};

struct BenchRow {
  BenchCell cell;
  std::size_t params = 0;
  int tokens = 0;
  double median_ms = 0.0;
  double iqr_ms = 0.0;
};

/// Milliseconds taken by `fn` under the given clock.
double time_ms(const std::function<void()>& fn, TimingMode mode);

struct TimingStats {
  double median = 0.0;
  double iqr = 0.0;
};
TimingStats summarize_times(std::vector<double> samples);

/// Times one performer forward on a 100x100 doorway context plus one iLQR
/// iteration of the horizon-20 context problem, per cell, on one thread.
std::vector<BenchRow> bench_attention_mpc(const BenchSpec& spec);

/// size,feature,redraw,m,patch,tokens,params,median_ms,iqr_ms,mode
void write_bench_csv(std::ostream& out, std::span<const BenchRow> rows, TimingMode mode);

struct ScalingSeries {
  std::string name;
  std::vector<int> lengths;
  std::vector<double> median_ms;
  double slope = 0.0;
};

/// Least-squares slope of log(y) against log(x).
double loglog_slope(std::span<const double> x, std::span<const double> y);

/// Times `kernel(L)` for every L and fits the log-log slope.
ScalingSeries time_scaling(const std::string& name, const std::function<void(int)>& kernel,
                           std::span<const int> lengths, int repetitions, int warmup, TimingMode mode);

/// Attention kernels alone on random L x d inputs (single head).
std::vector<ScalingSeries> bench_scaling(std::span<const int> lengths, std::span<const FeatureKind> kinds,
                                         int dim = 32, int repetitions = 7, int warmup = 2,
                                         TimingMode mode = TimingMode::Wall);

/// kernel,L,median_ms rows followed by kernel,slope rows.
void write_scaling_csv(std::ostream& out, std::span<const ScalingSeries> series);

}  // namespace pmpc
