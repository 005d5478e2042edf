#pragma once

#include <cstddef>
#include <cstdint>
#include <new>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace lbhx {

enum class Family : std::uint8_t { AoS = 0, SoA = 1, CSoA = 2, CAoSoA = 3 };

/// How a Y-column is split into VL-wide clusters.
///   interleaved: y = k * LYOVL + iy  (each cluster gathers one row of VL partitions)
///   consecutive: y = iy * VL + k     (each cluster is VL neighbouring rows)
enum class Clustering : std::uint8_t { Interleaved = 0, Consecutive = 1 };

std::string_view to_string(Family f);
std::string_view to_string(Clustering c);
Family parse_family(std::string_view s);
Clustering parse_clustering(std::string_view s);

struct LayoutDescriptor {
  Family family = Family::SoA;
  int vl = 1;
  Clustering clustering = Clustering::Interleaved;

  bool clustered() const { return family == Family::CSoA || family == Family::CAoSoA; }
  /// Cluster width actually used for indexing (1 for AoS/SoA).
  int width() const { return clustered() ? vl : 1; }
  /// Throws ConfigError on VL < 1 or VL == 1 for a clustered family.
  void validate() const;
  std::string label() const;

  friend bool operator==(const LayoutDescriptor&, const LayoutDescriptor&) = default;
};

/// Interior lx * ly sites plus `halo` whole columns on each X side. Y has no
/// stored halo rows; it is wrapped or walled in place.
struct Geometry {
  int lx = 0;
  int ly = 0;
  int halo = 0;

  int alloc_lx() const { return lx + 2 * halo; }
  std::size_t sites() const { return static_cast<std::size_t>(alloc_lx()) * static_cast<std::size_t>(ly); }

  friend bool operator==(const Geometry&, const Geometry&) = default;
};

struct Coords {
  int p = 0;
  int x = 0;
  int y = 0;

  friend bool operator==(const Coords&, const Coords&) = default;
};

/// Validated (layout, geometry, Q) triple with the offset formulas.
class IndexMap {
 public:
  IndexMap(LayoutDescriptor desc, Geometry geom, int q);

  const LayoutDescriptor& desc() const { return desc_; }
  const Geometry& geom() const { return geom_; }
  int q() const { return q_; }
  int lyovl() const { return lyovl_; }
  std::size_t size() const { return size_; }
  std::size_t plane() const { return plane_; }

  /// Storage offset of population p at allocation column x, row y. Unchecked.
  std::size_t offset(int p, int x, int y) const {
    switch (desc_.family) {
      case Family::AoS:
        return (static_cast<std::size_t>(x) * ly_ + y) * q_ + p;
      case Family::SoA:
        return p * plane_ + static_cast<std::size_t>(x) * ly_ + y;
      case Family::CSoA:
        return p * plane_ + (static_cast<std::size_t>(x) * lyovl_ + cluster_row(y)) * vl_ + lane(y);
      case Family::CAoSoA:
        return ((static_cast<std::size_t>(x) * lyovl_ + cluster_row(y)) * q_ + p) * vl_ + lane(y);
    }
    return 0;
  }

  /// Index of the cluster holding row y within its column (iy).
  int cluster_row(int y) const { return interleaved_ ? y % lyovl_ : y / vl_; }
  /// Position of row y inside its cluster (k).
  int lane(int y) const { return interleaved_ ? y / lyovl_ : y % vl_; }
  /// Row held by lane k of cluster iy.
  int row_of(int iy, int k) const { return interleaved_ ? k * lyovl_ + iy : iy * vl_ + k; }

 private:
  LayoutDescriptor desc_;
  Geometry geom_;
  int q_;
  int ly_;
  int vl_;
  int lyovl_;
  bool interleaved_;
  std::size_t plane_;
  std::size_t size_;
};

/// Bounds-checked offset; ContractViolation on out-of-range input and
/// ConfigError when LY is not a multiple of VL.
std::size_t linear_index(const LayoutDescriptor& desc, const Geometry& geom, int q, int p, int x, int y);

/// Exact inverse of linear_index.
Coords coords_of(const LayoutDescriptor& desc, const Geometry& geom, int q, std::size_t offset);

/// Answer to "how far away in storage is the site displaced by (dx, dy)?"
struct NeighborStride {
  enum class Kind { Uniform, Cluster, NonUniform };
  Kind kind = Kind::NonUniform;
  /// Uniform: element offset between sites. Cluster: offset in cluster units
  /// (lane k unchanged), valid only while iy + dy stays in [0, LYOVL).
  std::ptrdiff_t value = 0;

  friend bool operator==(const NeighborStride&, const NeighborStride&) = default;
};

NeighborStride neighbor_stride(const LayoutDescriptor& desc, const Geometry& geom, int q, int dx, int dy);

/// Allocator for 64-byte aligned arenas (one cluster of 8 doubles per line).
template <typename T, std::size_t Align = 64>
struct AlignedAllocator {
  using value_type = T;
  template <typename U>
  struct rebind {
    using other = AlignedAllocator<U, Align>;
  };

  AlignedAllocator() = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U, Align>&) {}

  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), std::align_val_t{Align})); }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, std::align_val_t{Align}); }

  friend bool operator==(const AlignedAllocator&, const AlignedAllocator&) { return true; }
};

using Arena = std::vector<double, AlignedAllocator<double>>;

enum class Role { Prv, Nxt };

/// The two population copies of one lattice slice. Fixed roles: prv holds the
/// state between steps, nxt is the propagate/bc scratch.
class FieldBuffer {
 public:
  FieldBuffer(LayoutDescriptor desc, Geometry geom, int q);

  const IndexMap& index() const { return map_; }
  const LayoutDescriptor& desc() const { return map_.desc(); }
  const Geometry& geom() const { return map_.geom(); }
  int q() const { return map_.q(); }

  std::span<double> arena(Role r) { return r == Role::Prv ? std::span<double>(prv_) : std::span<double>(nxt_); }
  std::span<const double> arena(Role r) const {
    return r == Role::Prv ? std::span<const double>(prv_) : std::span<const double>(nxt_);
  }
  double* prv() { return prv_.data(); }
  double* nxt() { return nxt_.data(); }
  const double* prv() const { return prv_.data(); }
  const double* nxt() const { return nxt_.data(); }

  double& at(Role r, int p, int x, int y) { return arena(r)[map_.offset(p, x, y)]; }
  double at(Role r, int p, int x, int y) const { return arena(r)[map_.offset(p, x, y)]; }

  // Halo bookkeeping: a step advances the state generation, a halo refresh
  // records which generation the halo columns reflect. Checked by propagate
  // when halo checks are on (default in debug builds).
  std::uint64_t generation() const { return generation_; }
  void advance_generation() { ++generation_; }
  void mark_halos_current() { halo_generation_ = generation_; }
  bool halos_current() const { return halo_generation_ == generation_; }
  bool halo_checks() const { return halo_checks_; }
  void set_halo_checks(bool on) { halo_checks_ = on; }

 private:
  IndexMap map_;
  Arena prv_;
  Arena nxt_;
  std::uint64_t generation_ = 0;
  std::uint64_t halo_generation_ = 0;
#ifdef NDEBUG
  bool halo_checks_ = false;
#else
  bool halo_checks_ = true;
#endif
};

/// Copy of `src` (both arenas) re-laid out as `dst_desc`; bit-exact.
FieldBuffer convert_layout(const FieldBuffer& src, const LayoutDescriptor& dst_desc);

/// Copies `count` whole columns between two buffers with the same layout,
/// LY and Q (allocation widths may differ).
void copy_columns(const FieldBuffer& src, int src_x, FieldBuffer& dst, int dst_x, int count, Role role = Role::Prv);

/// Canonical (p-major, then x, then y) serialization of `count` columns.
std::vector<double> pack_columns(const FieldBuffer& buf, int x0, int count, Role role = Role::Prv);
void unpack_columns(FieldBuffer& buf, int x0, int count, std::span<const double> values, Role role = Role::Prv);

/// X-periodic halo refresh of the prv arena for a single slice that owns the
/// whole lattice. Marks halos current.
void fill_periodic_halos(FieldBuffer& buf);

}  // namespace lbhx
