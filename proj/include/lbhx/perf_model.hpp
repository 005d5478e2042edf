#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace lbhx {

/// Per-pool cost coefficients of the execution-time model (seconds).
struct PerfProfile {
  double tau_d = 0.0;   ///< accelerator time per site per iteration
  double tau_h = 0.0;   ///< host time per site per iteration
  double tau_c = 0.0;   ///< inter-rank communication time per iteration
  double t_swap = 0.0;  ///< host <-> accelerator halo swap per iteration
  std::map<std::string, std::string> meta;  ///< provenance (source, machine, ...)

  /// Throws ConfigError unless tau_d, tau_h > 0 and tau_c, t_swap >= 0.
  void validate() const;
};

/// Predicted timing of one iteration at border width m.
struct Prediction {
  double m = 0.0;
  double t_acc = 0.0;
  double t_host = 0.0;
  double t_mpi = 0.0;
  double t_swap = 0.0;
  double t_exe = 0.0;
  double mlups = 0.0;
};

/// t_acc = (LX - 2M) LY tau_d, t_host = 2M LY tau_h, t_mpi = tau_c,
/// t_exe = max(t_acc, t_host + t_mpi) + t_swap. `m` may be fractional
/// (continuous balance analysis); requires 0 <= 2m <= lx.
Prediction predict(const PerfProfile& profile, int lx, int ly, double m);

/// Unclamped balance point (LX LY tau_d - tau_c) / (2 LY (tau_d + tau_h)).
double balance_point(const PerfProfile& profile, int lx, int ly);

/// Integer border width minimising predicted t_exe (ties to the smaller M).
int optimal_m(const PerfProfile& profile, int lx, int ly);

/// Millions of lattice-site updates per second.
double mlups(double lx, double ly, double seconds_per_iteration);

struct ProfileOverride {
  std::optional<double> tau_d;
  std::optional<double> tau_h;
  std::optional<double> tau_c;
  std::optional<double> t_swap;

  bool empty() const { return !tau_d && !tau_h && !tau_c && !t_swap; }
};

PerfProfile apply_override(const PerfProfile& profile, const ProfileOverride& o);

/// predict() for every m in 0, step, 2*step, ... <= lx/2 (the last point is
/// always floor(lx/2)).
std::vector<Prediction> sweep(const PerfProfile& profile, int lx, int ly, int step = 1);

/// sweep() with substituted parameters.
std::vector<Prediction> whatif(const PerfProfile& profile, const ProfileOverride& o, int lx, int ly, int step = 1);

// Profile files are flat "key = value" text; tau_d, tau_h, tau_c and t_swap
// are required, every other key is kept as provenance metadata.
std::string format_profile(const PerfProfile& profile);
PerfProfile parse_profile(std::string_view text);
PerfProfile load_profile_file(const std::string& path);
void save_profile_file(const std::string& path, const PerfProfile& profile);

struct NamedProfile {
  std::string name;
  PerfProfile profile;
};

/// Illustrative host+accelerator profiles derived from published peak memory
/// bandwidths, for what-if exploration only.
std::vector<NamedProfile> sample_registry();

}  // namespace lbhx
