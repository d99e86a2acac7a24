// Serial reference kernels against their OpenMP versions.
#include <cstdio>
#include <random>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "pmpc/attention.hpp"
#include "pmpc/bench.hpp"

using namespace pmpc;

int main() {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto random = [&](int rows, int cols) {
    RowMatrix m(rows, cols);
    for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = normal(rng);
    return m;
  };
  int threads = 1;
#ifdef _OPENMP
  threads = omp_get_max_threads();
#endif
  std::printf("kernel,L,threads,serial_ms,parallel_ms,max_abs_diff\n");
  for (int L : {400, 1600}) {
    const RowMatrix Q = random(L, 32), K = random(L, 32), V = random(L, 32);
    const RowMatrix Qf = phi_relu(Q), Kf = phi_relu(K);
    RowMatrix a, b, c, d;
    auto median = [](auto fn) {
      std::vector<double> s;
      for (int k = 0; k < 7; ++k) s.push_back(time_ms(fn, TimingMode::Wall));
      return summarize_times(s).median;
    };
    const double es = median([&] { a = attention_exact_serial(Q, K, V); });
    const double ep = median([&] { b = attention_exact(Q, K, V); });
    std::printf("exact,%d,%d,%.4f,%.4f,%.3g\n", L, threads, es, ep, (a - b).cwiseAbs().maxCoeff());
    const double fs = median([&] { c = favor_from_features_serial(Qf, Kf, V); });
    const double fp = median([&] { d = favor_from_features(Qf, Kf, V); });
    std::printf("favor_relu,%d,%d,%.4f,%.4f,%.3g\n", L, threads, fs, fp, (c - d).cwiseAbs().maxCoeff());
  }
  return 0;
}
