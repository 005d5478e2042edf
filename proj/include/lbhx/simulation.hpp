#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lbhx/autotune.hpp"
#include "lbhx/config.hpp"
#include "lbhx/distributed.hpp"
#include "lbhx/report.hpp"

namespace lbhx {

/// What one rank did.
struct RankRun {
  RankLayout layout;
  int m = 0;
  std::optional<AutotuneResult> tune;
  std::vector<StepTiming> steps;
  std::uint64_t bytes_to_left = 0;   ///< halo payload sent during the measured steps
  std::uint64_t bytes_to_right = 0;
};

struct SimulationResult {
  /// Merged final lattice (global dimensions). Empty on non-zero ranks of a
  /// multi-process run.
  CanonicalField final_state;
  /// Every rank for in-process runs; only this process's rank otherwise.
  std::vector<RankRun> ranks;
  /// t_exe per rank per measured step (rank 0 / in-process only).
  std::vector<std::vector<double>> t_exe;
  double median_t_exe = 0.0;  ///< median over steps of the slowest rank's t_exe
  double mlups = 0.0;
  std::vector<std::string> dumps;
  BenchReport report;
};

/// Runs cfg.iterations measured steps (after cfg.warmup untimed ones) on
/// cfg.ranks ranks, optionally autotuning M first. A config with ranks.id set
/// runs this process's rank of a multi-process tcp group.
SimulationResult run_simulation(const SimulationConfig& cfg);

/// In-process ranks (one thread each) over the given transport.
SimulationResult run_distributed(const SimulationConfig& cfg, int n_ranks, TransportKind kind);

/// Bytes of lattice storage one run allocates (host plus device buffers of
/// every rank).
std::uint64_t estimate_memory_bytes(const SimulationConfig& cfg);

/// ConfigError when the lattice cannot fit into physical memory.
void check_memory(const SimulationConfig& cfg);
/// ConfigError when `need_bytes` exceeds 80% of physical memory.
void check_memory_bytes(std::uint64_t need_bytes, const std::string& what);

/// Autotune one rank slice with the given exchanger, on a scratch runtime.
AutotuneResult autotune_slice(const SimulationConfig& cfg, int width, HaloExchanger& exchanger,
                              const AutotuneOptions* opts = nullptr);

}  // namespace lbhx
