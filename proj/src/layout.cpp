#include "lbhx/layout.hpp"

#include <algorithm>
#include <cstring>

#include "lbhx/error.hpp"

namespace lbhx {

std::string_view to_string(Family f) {
  switch (f) {
    case Family::AoS: return "aos";
    case Family::SoA: return "soa";
    case Family::CSoA: return "csoa";
    case Family::CAoSoA: return "caosoa";
  }
  return "?";
}

std::string_view to_string(Clustering c) {
  return c == Clustering::Interleaved ? "interleaved" : "consecutive";
}

Family parse_family(std::string_view s) {
  for (auto f : {Family::AoS, Family::SoA, Family::CSoA, Family::CAoSoA}) {
    if (s == to_string(f)) return f;
  }
  throw ConfigError("unknown layout '" + std::string(s) + "' (expected aos, soa, csoa or caosoa)");
}

Clustering parse_clustering(std::string_view s) {
  if (s == "interleaved") return Clustering::Interleaved;
  if (s == "consecutive") return Clustering::Consecutive;
  throw ConfigError("unknown clustering '" + std::string(s) + "' (expected interleaved or consecutive)");
}

void LayoutDescriptor::validate() const {
  if (vl < 1) throw ConfigError("VL must be >= 1");
  if (clustered() && vl == 1) {
    throw ConfigError("VL = 1 is only permitted for aos/soa; " + std::string(to_string(family)) + " needs VL >= 2");
  }
}

std::string LayoutDescriptor::label() const {
  std::string s(to_string(family));
  if (clustered()) s += "/vl" + std::to_string(vl) + "/" + std::string(to_string(clustering));
  return s;
}

IndexMap::IndexMap(LayoutDescriptor desc, Geometry geom, int q)
    : desc_(desc), geom_(geom), q_(q), ly_(geom.ly), vl_(desc.width()),
      interleaved_(desc.clustering == Clustering::Interleaved) {
  desc_.validate();
  if (geom.lx <= 0 || geom.ly <= 0 || geom.halo < 0) throw ConfigError("geometry needs lx, ly > 0 and halo >= 0");
  if (q <= 0) throw ConfigError("population count must be positive");
  if (geom.ly % vl_ != 0) {
    throw ConfigError("LY = " + std::to_string(geom.ly) + " is not a multiple of VL = " + std::to_string(vl_));
  }
  lyovl_ = geom.ly / vl_;
  plane_ = geom.sites();
  size_ = plane_ * static_cast<std::size_t>(q);
}

std::size_t linear_index(const LayoutDescriptor& desc, const Geometry& geom, int q, int p, int x, int y) {
  const IndexMap map(desc, geom, q);
  if (p < 0 || p >= q || x < 0 || x >= geom.alloc_lx() || y < 0 || y >= geom.ly) {
    throw ContractViolation("linear_index: (p, x, y) out of range");
  }
  return map.offset(p, x, y);
}

Coords coords_of(const LayoutDescriptor& desc, const Geometry& geom, int q, std::size_t offset) {
  const IndexMap map(desc, geom, q);
  if (offset >= map.size()) throw ContractViolation("coords_of: offset out of range");
  const std::size_t ly = geom.ly;
  const std::size_t plane = map.plane();
  const std::size_t vl = desc.width();
  const std::size_t lyovl = map.lyovl();
  const auto row = [&](std::size_t iy, std::size_t k) { return map.row_of(static_cast<int>(iy), static_cast<int>(k)); };
  Coords c;
  switch (desc.family) {
    case Family::AoS:
      c.p = static_cast<int>(offset % q);
      c.y = static_cast<int>((offset / q) % ly);
      c.x = static_cast<int>(offset / q / ly);
      break;
    case Family::SoA:
      c.p = static_cast<int>(offset / plane);
      c.x = static_cast<int>((offset % plane) / ly);
      c.y = static_cast<int>(offset % ly);
      break;
    case Family::CSoA: {
      c.p = static_cast<int>(offset / plane);
      const std::size_t rest = offset % plane;
      const std::size_t cluster = rest / vl;
      c.x = static_cast<int>(cluster / lyovl);
      c.y = row(cluster % lyovl, rest % vl);
      break;
    }
    case Family::CAoSoA: {
      const std::size_t k = offset % vl;
      const std::size_t block = offset / vl;  // (x * LYOVL + iy) * Q + p
      c.p = static_cast<int>(block % q);
      const std::size_t cluster = block / q;
      c.x = static_cast<int>(cluster / lyovl);
      c.y = row(cluster % lyovl, k);
      break;
    }
  }
  return c;
}

NeighborStride neighbor_stride(const LayoutDescriptor& desc, const Geometry& geom, int q, int dx, int dy) {
  const IndexMap map(desc, geom, q);
  using Kind = NeighborStride::Kind;
  if (dx == 0 && dy == 0) return {Kind::Uniform, 0};
  const std::ptrdiff_t ly = geom.ly;
  const std::ptrdiff_t lyovl = map.lyovl();
  switch (desc.family) {
    case Family::AoS:
      return {Kind::Uniform, (dx * ly + dy) * q};
    case Family::SoA:
      return {Kind::Uniform, dx * ly + dy};
    case Family::CSoA:
    case Family::CAoSoA:
      if (desc.clustering == Clustering::Interleaved) return {Kind::Cluster, dx * lyovl + dy};
      if (dy % desc.vl != 0) return {Kind::NonUniform, 0};
      return {Kind::Cluster, dx * lyovl + dy / desc.vl};
  }
  return {};
}

FieldBuffer::FieldBuffer(LayoutDescriptor desc, Geometry geom, int q)
    : map_(desc, geom, q), prv_(map_.size(), 0.0), nxt_(map_.size(), 0.0) {}

FieldBuffer convert_layout(const FieldBuffer& src, const LayoutDescriptor& dst_desc) {
  FieldBuffer dst(dst_desc, src.geom(), src.q());
  const auto& g = src.geom();
  for (Role r : {Role::Prv, Role::Nxt}) {
    for (int p = 0; p < src.q(); ++p) {
      for (int x = 0; x < g.alloc_lx(); ++x) {
        for (int y = 0; y < g.ly; ++y) dst.at(r, p, x, y) = src.at(r, p, x, y);
      }
    }
  }
  return dst;
}

namespace {

void require_column_compatible(const FieldBuffer& a, const FieldBuffer& b) {
  if (!(a.desc() == b.desc()) || a.geom().ly != b.geom().ly || a.q() != b.q()) {
    throw ConfigError("column copy between incompatible buffers");
  }
}

// Whole columns are contiguous: one LY*Q chunk for site-major families,
// Q chunks of LY for population-major ones.
bool site_major(Family f) { return f == Family::AoS || f == Family::CAoSoA; }

}  // namespace

void copy_columns(const FieldBuffer& src, int src_x, FieldBuffer& dst, int dst_x, int count, Role role) {
  require_column_compatible(src, dst);
  if (count <= 0) return;
  if (src_x < 0 || src_x + count > src.geom().alloc_lx() || dst_x < 0 || dst_x + count > dst.geom().alloc_lx()) {
    throw ContractViolation("copy_columns: column range out of bounds");
  }
  const std::size_t ly = src.geom().ly;
  const std::size_t q = src.q();
  const double* s = src.arena(role).data();
  double* d = dst.arena(role).data();
  if (site_major(src.desc().family)) {
    std::memmove(d + dst_x * ly * q, s + src_x * ly * q, count * ly * q * sizeof(double));
  } else {
    for (std::size_t p = 0; p < q; ++p) {
      std::memmove(d + p * dst.index().plane() + dst_x * ly, s + p * src.index().plane() + src_x * ly,
                   count * ly * sizeof(double));
    }
  }
}

std::vector<double> pack_columns(const FieldBuffer& buf, int x0, int count, Role role) {
  if (x0 < 0 || count < 0 || x0 + count > buf.geom().alloc_lx()) {
    throw ContractViolation("pack_columns: column range out of bounds");
  }
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(count) * buf.geom().ly * buf.q());
  for (int p = 0; p < buf.q(); ++p) {
    for (int x = x0; x < x0 + count; ++x) {
      for (int y = 0; y < buf.geom().ly; ++y) out.push_back(buf.at(role, p, x, y));
    }
  }
  return out;
}

void unpack_columns(FieldBuffer& buf, int x0, int count, std::span<const double> values, Role role) {
  const std::size_t expect = static_cast<std::size_t>(count) * buf.geom().ly * buf.q();
  if (x0 < 0 || count < 0 || x0 + count > buf.geom().alloc_lx() || values.size() != expect) {
    throw ContractViolation("unpack_columns: size or column range mismatch");
  }
  std::size_t i = 0;
  for (int p = 0; p < buf.q(); ++p) {
    for (int x = x0; x < x0 + count; ++x) {
      for (int y = 0; y < buf.geom().ly; ++y) buf.at(role, p, x, y) = values[i++];
    }
  }
}

void fill_periodic_halos(FieldBuffer& buf) {
  const auto& g = buf.geom();
  for (int c = 0; c < g.halo; ++c) {
    // left halo column c mirrors interior column (c - H) mod LX
    const int left_src = g.halo + ((c - g.halo) % g.lx + g.lx) % g.lx;
    copy_columns(buf, left_src, buf, c, 1);
    const int right_dst = g.halo + g.lx + c;
    const int right_src = g.halo + (c % g.lx);
    copy_columns(buf, right_src, buf, right_dst, 1);
  }
  buf.mark_halos_current();
}

}  // namespace lbhx
