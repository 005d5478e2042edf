#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "lbhx/hetero.hpp"
#include "lbhx/init.hpp"
#include "lbhx/kernels.hpp"
#include "lbhx/layout.hpp"

namespace lbhx {

enum class TransportKind { InMemory, Tcp };

std::string_view to_string(TransportKind k);
TransportKind parse_transport(std::string_view s);
std::string_view to_string(YBoundary y);
YBoundary parse_y_boundary(std::string_view s);

/// Everything a run needs. Defaults are the production benchmark lattice
/// (2160 x 8192, D2Q37, CAoSoA with VL = 8); shrink lattice.lx for small
/// machines.
struct SimulationConfig {
  int lx = 2160;
  int ly = 8192;
  int halo = 3;  ///< X-halo columns per side; at least the model reach
  std::string model = "d2q37";
  Family family = Family::CAoSoA;
  int vl = 8;
  Clustering clustering = Clustering::Interleaved;
  double tau = 0.8;
  YBoundary y_mode = YBoundary::Periodic;
  std::optional<int> m;  ///< fixed border width; unset means 0 unless autotuned
  bool autotune = false;
  PoolConfig pools;
  int iterations = 10;
  int warmup = 0;  ///< untimed steps before the measured ones (they advance the state)
  int dump_every = 0;
  std::string dump_prefix = "lbhx";
  std::uint64_t seed = 1;
  InitKind init = InitKind::Random;
  int flop_scale = 1;
  double watchdog = 60.0;
  int ranks = 1;
  TransportKind transport = TransportKind::InMemory;
  std::string endpoints;  ///< host:port per rank, for multi-process tcp runs
  int rank_id = -1;       ///< this process's rank in a multi-process run

  LayoutDescriptor layout() const { return {family, vl, clustering}; }
  ModelParams params() const { return {tau, 1.0, 2}; }
  BoundaryPolicy policy() const { return {y_mode}; }

  /// Cross-field checks: lattice and layout compatibility, M vs autotune
  /// conflict, iteration counts. Throws ConfigError.
  void validate() const;
};

struct ConfigKey {
  std::string name;
  std::string help;
  std::function<void(SimulationConfig&, const std::string&)> set;
  std::function<std::string(const SimulationConfig&)> get;
};

/// Every recognised key, in documentation order.
const std::vector<ConfigKey>& config_keys();

/// ConfigError on an unknown key or a value of the wrong shape.
void set_config_value(SimulationConfig& cfg, std::string_view key, std::string_view value);

/// Flat "key = value" text (# comments); ParseError names the line.
std::vector<std::pair<std::string, std::string>> parse_key_values(std::string_view text, std::string_view source);

void apply_config_text(SimulationConfig& cfg, std::string_view text, std::string_view source = "config");
void apply_config_file(SimulationConfig& cfg, const std::string& path);

/// LBHX_HOST_WORKERS, LBHX_DEVICE_WORKERS, LBHX_DEVICE_THROTTLE. `getenv` is
/// injectable for tests.
void apply_env_overrides(SimulationConfig& cfg,
                         const std::function<const char*(const char*)>& getenv_fn = nullptr);

/// key -> value for every key, as written to report metadata.
std::vector<std::pair<std::string, std::string>> config_echo(const SimulationConfig& cfg);

}  // namespace lbhx
