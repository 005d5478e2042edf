#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "lbhx/layout.hpp"

namespace lbhx {

/// Layout-independent lattice snapshot: interior sites only, values stored
/// p-major, then x, then y. `desc` records the layout the data came from.
struct CanonicalField {
  int lx = 0;
  int ly = 0;
  int q = 0;
  LayoutDescriptor desc;
  std::vector<double> values;

  double value(int p, int x, int y) const {
    return values[(static_cast<std::size_t>(p) * lx + x) * ly + y];
  }
  double& value(int p, int x, int y) { return values[(static_cast<std::size_t>(p) * lx + x) * ly + y]; }

  friend bool operator==(const CanonicalField&, const CanonicalField&) = default;
};

/// Interior of the prv arena in canonical order.
CanonicalField to_canonical(const FieldBuffer& buf);

/// Writes canonical values into the interior of the prv arena. Dimensions
/// must match; the source layout recorded in `field` is ignored.
void from_canonical(FieldBuffer& buf, const CanonicalField& field);

// LBHX dump file:
//   "LBHX" | u32 version=1 | u32 lx, ly, q, family, vl, clustering
//   | q*lx*ly little-endian f64 in canonical order
inline constexpr std::uint32_t kDumpVersion = 1;

void write_dump(std::ostream& out, const CanonicalField& field);
CanonicalField read_dump(std::istream& in);

void write_dump_file(const std::string& path, const CanonicalField& field);
CanonicalField read_dump_file(const std::string& path);

}  // namespace lbhx
