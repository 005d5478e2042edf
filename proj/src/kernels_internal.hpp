#pragma once

#include "lbhx/kernels.hpp"

namespace lbhx::detail {

inline int wrap(int y, int ly) {
  const int r = y % ly;
  return r < 0 ? r + ly : r;
}

void check_region(const FieldBuffer& buf, const Region& region);
void check_propagate_preconditions(const LatticeModel& model, const FieldBuffer& buf, const Region& region);
bool wall_source_outside(int y, int cy, int ly);

}  // namespace lbhx::detail
