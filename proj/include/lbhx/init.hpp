#pragma once

#include <cstdint>
#include <string_view>

#include "lbhx/kernels.hpp"

namespace lbhx {

enum class InitKind { Rest, Random, TaylorGreen };

InitKind parse_init(std::string_view s);
std::string_view to_string(InitKind k);

struct InitSpec {
  InitKind kind = InitKind::Random;
  std::uint64_t seed = 1;
  double amplitude = 0.05;  ///< velocity amplitude (random / Taylor-Green)
};

/// Fills the interior of the prv arena. Every site value is a pure function of
/// (spec, global column, row, population), so a slice starting at global
/// column `x_global_begin` of an `lx_global`-wide lattice reproduces exactly
/// the values of the undivided lattice.
void initialize(FieldBuffer& buf, const LatticeModel& model, const InitSpec& spec, int x_global_begin = 0,
                int lx_global = -1);

/// Taylor-Green velocity field u(x, y) for a periodic lx * ly box.
Macroscopics taylor_green_state(const LatticeModel& model, double amplitude, int lx, int ly, int x, int y);

}  // namespace lbhx
