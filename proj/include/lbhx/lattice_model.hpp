#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace lbhx {

/// Integer lattice displacement per timestep.
struct Velocity {
  int x = 0;
  int y = 0;

  friend bool operator==(const Velocity&, const Velocity&) = default;
};

/// Discrete velocity set with quadrature weights.
///
/// Populations are ordered rest first, then by increasing |c|^2, and within a
/// shell counterclockwise starting from the positive x axis. Instances are
/// immutable once built and may be shared freely across threads.
struct LatticeModel {
  std::string name;
  int dim = 2;
  std::vector<Velocity> velocities;
  std::vector<double> weights;
  double cs2 = 0.0;
  int reach = 0;              ///< max per-axis displacement R
  std::vector<int> opposite;  ///< l -> l' with c_l' = -c_l

  int q() const { return static_cast<int>(velocities.size()); }
};

/// Relaxation parameters. Time is measured in timesteps, so dt is always 1.
struct ModelParams {
  double tau = 1.0;
  double dt = 1.0;
  int eq_order = 2;

  /// Throws ConfigError unless tau > dt/2 and eq_order == 2.
  void validate() const;
  double omega() const { return dt / tau; }
};

/// "d2q9" or "d2q37"; anything else is a ConfigError.
LatticeModel builtin_model(std::string_view name);

/// Builds a model from shell weights: every shell (a, b) expands to all
/// sign/axis permutations, then populations are sorted into canonical order.
struct Shell {
  int a = 0;
  int b = 0;
  double weight = 0.0;
};
LatticeModel make_model(std::string name, const std::vector<Shell>& shells, double cs2);

/// Max absolute residual of the Gaussian moment conditions, one entry per
/// order 0..max_order (odd orders must vanish, even orders match the
/// isotropic tensors cs2^(n/2) * (i-1)!! (j-1)!!).
struct MomentReport {
  std::vector<double> residual;

  bool valid_to(int order, double tol = 1e-12) const;
};

MomentReport validate_moments(const LatticeModel& model, int max_order);

/// The embedded model table, as shipped.
std::string_view model_table_text();

/// Human-readable dump of velocities, weights and opposites.
std::string describe(const LatticeModel& model);

}  // namespace lbhx
