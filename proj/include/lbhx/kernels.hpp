#pragma once

#include <atomic>
#include <span>
#include <vector>

#include "lbhx/lattice_model.hpp"
#include "lbhx/layout.hpp"

namespace lbhx {

struct Macroscopics {
  double rho = 0.0;
  double ux = 0.0;
  double uy = 0.0;
  double temperature = 0.0;
};

/// Half-open column/row ranges in allocation coordinates.
struct Region {
  int x_begin = 0;
  int x_end = 0;
  int y_begin = 0;
  int y_end = 0;

  bool empty() const { return x_end <= x_begin || y_end <= y_begin; }
  int columns() const { return x_end - x_begin; }
  std::size_t sites() const {
    return empty() ? 0 : static_cast<std::size_t>(x_end - x_begin) * static_cast<std::size_t>(y_end - y_begin);
  }

  /// The whole interior of a slice.
  static Region interior(const Geometry& g) { return {g.halo, g.halo + g.lx, 0, g.ly}; }
  /// Full-height column range [x0, x1).
  static Region columns(int x0, int x1, const Geometry& g) { return {x0, x1, 0, g.ly}; }

  friend bool operator==(const Region&, const Region&) = default;
};

enum class YBoundary { Periodic, WallBounceBack };

/// X is always periodic through halo columns; Y is wrapped or walled.
struct BoundaryPolicy {
  YBoundary y_mode = YBoundary::Periodic;
};

/// Accumulates the busy CPU time of a worker team (max over threads per
/// parallel region). Used to throttle the emulated accelerator.
struct CpuMeter {
  std::atomic<double> region_max{0.0};
  double total = 0.0;

  void fold() {
    total += region_max.exchange(0.0);
  }
};

/// Worker team a kernel runs on.
struct Exec {
  int threads = 1;
  CpuMeter* meter = nullptr;
};

struct CollideOptions {
  /// Evaluate the equilibrium this many times per site (extras are
  /// discarded) to emulate a heavier collision operator.
  int flop_scale = 1;
};

/// Precomputed factors of the order-2 equilibrium.
struct EquilibriumConstants {
  double inv_cs2;
  double half_inv_cs4;
  double half_inv_cs2;

  explicit EquilibriumConstants(double cs2)
      : inv_cs2(1.0 / cs2), half_inv_cs4(0.5 / (cs2 * cs2)), half_inv_cs2(0.5 / cs2) {}
};

/// w * rho * (1 + cu/cs2 + cu^2/(2 cs2^2) - |u|^2/(2 cs2)). Every kernel path
/// evaluates the equilibrium through this function so all paths round alike.
inline double equilibrium_term(double w, double rho, double cu, double usq, const EquilibriumConstants& k) {
  return w * rho * (1.0 + cu * k.inv_cs2 + cu * cu * k.half_inv_cs4 - usq * k.half_inv_cs2);
}

/// rho = sum f, rho u = sum c f, D rho T = sum |c - u|^2 f, summed in
/// population order.
Macroscopics compute_moments(const LatticeModel& model, std::span<const double> f);

/// Order-2 equilibrium for the given moments (temperature is not used).
std::vector<double> equilibrium(const LatticeModel& model, const Macroscopics& m);

/// True when compute_moments reports rho <= 0 or a non-finite value.
bool unphysical(const Macroscopics& m);

// ---------------------------------------------------------------------------
// OpenMP kernels. Each parallelises over the columns of the region; callers
// must not run two kernels that write the same arena region concurrently.

/// Pull-scheme streaming prv -> nxt: nxt_l(y) = prv_l(y - c_l), Y wrapped.
/// Uses stride shortcuts where neighbor_stride allows, the coordinate path
/// elsewhere; both give identical bits.
void propagate_region(const LatticeModel& model, FieldBuffer& buf, const Region& region, const Exec& exec = {});

/// Boundary fix-up of nxt. Bounce-back replaces every population pulled from
/// outside the wall by the opposite population of the same site from prv.
void apply_bc(const LatticeModel& model, FieldBuffer& buf, const BoundaryPolicy& policy, const Region& region,
              const Exec& exec = {});

/// BGK relaxation nxt -> prv.
void collide_region(const LatticeModel& model, const ModelParams& params, FieldBuffer& buf, const Region& region,
                    const Exec& exec = {}, const CollideOptions& opts = {});

/// propagate, bc and collide over every region, phase by phase (all regions
/// finish a phase before the next starts). prv holds the new state after.
void step_region(const LatticeModel& model, const ModelParams& params, FieldBuffer& buf,
                 std::span<const Region> regions, const BoundaryPolicy& policy, const Exec& exec = {},
                 const CollideOptions& opts = {});

/// Single-slice timestep: periodic X halo refresh, full-interior step,
/// generation bump.
void step_periodic(const LatticeModel& model, const ModelParams& params, FieldBuffer& buf,
                   const BoundaryPolicy& policy, const Exec& exec = {}, const CollideOptions& opts = {});

// ---------------------------------------------------------------------------
// Serial coordinate-space implementations. Every access goes through the
// layout's index map; kept as the oracle for the OpenMP kernels.
namespace reference {

void propagate(const LatticeModel& model, FieldBuffer& buf, const Region& region);
void apply_bc(const LatticeModel& model, FieldBuffer& buf, const BoundaryPolicy& policy, const Region& region);
void collide(const LatticeModel& model, const ModelParams& params, FieldBuffer& buf, const Region& region);
void step(const LatticeModel& model, const ModelParams& params, FieldBuffer& buf, const BoundaryPolicy& policy);

}  // namespace reference

}  // namespace lbhx
