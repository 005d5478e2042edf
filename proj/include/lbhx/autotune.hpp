#pragma once

#include <functional>
#include <vector>

#include "lbhx/perf_model.hpp"

namespace lbhx {

/// Timed mini-benchmarks the tuner drives. Each call performs one iteration
/// and returns its wall time in seconds.
class TuneRunner {
 public:
  virtual ~TuneRunner() = default;

  /// Rows per column; sites processed = columns * rows().
  virtual int rows() const = 0;
  /// propagate + bc + collide over `columns` full columns on the host pool.
  virtual double run_host(int columns) = 0;
  /// Same on the accelerator pool, queued as the runtime queues it.
  virtual double run_device(int columns) = 0;
  /// One inter-rank halo exchange.
  virtual double run_exchange() = 0;
  /// One host <-> accelerator halo swap.
  virtual double run_swap() = 0;
};

/// Repeats per measurement block (see AutotuneOptions::between_blocks).
inline constexpr int kAutotuneBlock = 2;

struct AutotuneOptions {
  std::vector<int> sample_columns;  ///< >= 3 distinct positive sizes
  int warmup = 5;
  int repeats = 20;
  int transfer_repeats = 20;
  double max_cv = 0.05;
  int max_attempts = 3;  ///< re-measure a noisy sample up to this many times
  /// Called after every block of host and device repeats, so a caller can
  /// interleave its own measurements with the tuning and both see the same
  /// machine state.
  std::function<void()> between_blocks;
};

struct SamplePoint {
  int columns = 0;
  double sites = 0.0;
  double median = 0.0;
  double cv = 0.0;
};

struct AutotuneResult {
  PerfProfile profile;
  std::vector<SamplePoint> host;
  std::vector<SamplePoint> device;
  double exchange_cv = 0.0;
  double swap_cv = 0.0;
  bool stable = true;  ///< every sample met max_cv
};

/// Least-squares slopes for tau_h / tau_d, medians for tau_c / t_swap.
/// Throws TuningError on degenerate inputs (fewer than three distinct sizes,
/// non-positive sizes, non-increasing timings).
AutotuneResult autotune(TuneRunner& runner, const AutotuneOptions& opts);

double median(std::vector<double> v);
/// Coefficient of variation (sample stddev / mean).
double coefficient_of_variation(const std::vector<double>& v);

}  // namespace lbhx
