#pragma once

#include <memory>
#include <string>
#include <vector>

#include "lbhx/autotune.hpp"
#include "lbhx/config.hpp"
#include "lbhx/report.hpp"

namespace lbhx {

enum class Kernel { Propagate, Collide, Step };

Kernel parse_kernel(std::string_view s);
std::string_view to_string(Kernel k);

enum class Pool { Host, Device };

Pool parse_pool(std::string_view s);
std::string_view to_string(Pool p);

struct BenchOptions {
  std::vector<Kernel> kernels{Kernel::Propagate, Kernel::Collide};
  std::vector<Family> layouts{Family::AoS, Family::SoA, Family::CSoA, Family::CAoSoA};
  Pool pool = Pool::Host;
  int iters = 10;
  int warmup = 2;
  double max_cv = 0.05;
  int max_attempts = 3;
};

/// Median per-iteration time of each (kernel, layout) cell on one pool. CSV
/// columns: kernel, layout, vl, lx, ly, pool, t_ms, cv, mlups. A cell whose CV
/// stays above max_cv after max_attempts is listed in an "unstable" meta
/// entry. Every layout is validated before anything runs.
BenchReport bench_kernels(const SimulationConfig& cfg, const BenchOptions& opts);

struct SweepOptions {
  /// Border widths to measure; empty means 2M/LX = 0, frac_step, ... , 1.
  std::vector<int> m_values;
  double frac_step = 0.05;
  int warmup = 3;
  int iters = 10;
  AutotuneOptions tune;  ///< sample_columns empty: chosen from the slice
};

/// Median measured T_exe of one runtime at border width m (seconds) and its CV.
struct Measurement {
  int m = 0;
  double t_exe = 0.0;
  double cv = 0.0;
};

/// Accumulates T_exe samples for a set of border widths on one single-rank
/// runtime, re-partitioned in place. Each block() visits every width
/// round-robin, so slow spells of the machine are spread over all points.
class BalanceMeter {
 public:
  BalanceMeter(const SimulationConfig& cfg, std::vector<int> m_values, int warmup);
  ~BalanceMeter();

  /// `steps` measured steps per width (after one untimed step, or the full
  /// warmup the first time).
  void block(int steps);
  int steps_per_point() const;
  std::vector<Measurement> results() const;

 private:
  struct State;
  std::unique_ptr<State> s_;
};

/// BalanceMeter in blocks of five steps until every width has `iters`.
std::vector<Measurement> measure_balance(const SimulationConfig& cfg, const std::vector<int>& m_values, int warmup,
                                         int iters);

/// Border widths for 2M/LX = 0, step, 2 step, ..., 1 (deduplicated).
std::vector<int> balance_grid(int lx, double frac_step);

/// Autotunes a profile while measuring the grid (blocks of sweep steps are
/// interleaved with the tuning blocks), then pairs every point with the
/// model. CSV columns: m, m_frac, mlups_meas, mlups_pred, t_meas_us,
/// t_pred_us; meta carries the profile, M* and the measured argmax.
BenchReport sweep_balance(const SimulationConfig& cfg, const SweepOptions& opts);

/// Best measured MLUPS over a balance grid for each VL. CSV columns: vl,
/// best_m_frac, mlups; meta "best_vl" marks the argmax.
BenchReport sweep_vl(const SimulationConfig& cfg, const std::vector<int>& vls, const SweepOptions& opts);

/// Accelerator-only (v1, M = 0) and heterogeneous (v2, autotuned M) runs per
/// rank count. CSV columns: ranks, mode, mlups, speedup (relative to the
/// first rank count of the same mode); meta "dumps_identical" compares the
/// final lattices of all runs.
BenchReport scale(const SimulationConfig& cfg, const std::vector<int>& rank_counts);

}  // namespace lbhx
