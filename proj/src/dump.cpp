#include "lbhx/dump.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "lbhx/error.hpp"

namespace lbhx {

namespace {

void put_u32(std::ostream& out, std::uint32_t v) {
  std::array<char, 4> b{};
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xffu);
  out.write(b.data(), b.size());
}

void put_f64(std::ostream& out, double d) {
  const auto bits = std::bit_cast<std::uint64_t>(d);
  std::array<char, 8> b{};
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((bits >> (8 * i)) & 0xffu);
  out.write(b.data(), b.size());
}

std::uint32_t get_u32(std::istream& in) {
  std::array<unsigned char, 4> b{};
  if (!in.read(reinterpret_cast<char*>(b.data()), b.size())) throw ParseError("LBHX dump: truncated header");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

}  // namespace

CanonicalField to_canonical(const FieldBuffer& buf) {
  const auto& g = buf.geom();
  CanonicalField f{g.lx, g.ly, buf.q(), buf.desc(), {}};
  f.values.resize(static_cast<std::size_t>(g.lx) * g.ly * buf.q());
  for (int p = 0; p < buf.q(); ++p) {
    for (int x = 0; x < g.lx; ++x) {
      for (int y = 0; y < g.ly; ++y) f.value(p, x, y) = buf.at(Role::Prv, p, x + g.halo, y);
    }
  }
  return f;
}

void from_canonical(FieldBuffer& buf, const CanonicalField& field) {
  const auto& g = buf.geom();
  if (field.lx != g.lx || field.ly != g.ly || field.q != buf.q()) {
    throw ConfigError("dump dimensions do not match the lattice");
  }
  for (int p = 0; p < buf.q(); ++p) {
    for (int x = 0; x < g.lx; ++x) {
      for (int y = 0; y < g.ly; ++y) buf.at(Role::Prv, p, x + g.halo, y) = field.value(p, x, y);
    }
  }
}

void write_dump(std::ostream& out, const CanonicalField& field) {
  out.write("LBHX", 4);
  put_u32(out, kDumpVersion);
  put_u32(out, static_cast<std::uint32_t>(field.lx));
  put_u32(out, static_cast<std::uint32_t>(field.ly));
  put_u32(out, static_cast<std::uint32_t>(field.q));
  put_u32(out, static_cast<std::uint32_t>(field.desc.family));
  put_u32(out, static_cast<std::uint32_t>(field.desc.vl));
  put_u32(out, static_cast<std::uint32_t>(field.desc.clustering));
  for (double v : field.values) put_f64(out, v);
}

CanonicalField read_dump(std::istream& in) {
  char magic[4] = {};
  if (!in.read(magic, 4) || std::memcmp(magic, "LBHX", 4) != 0) throw ParseError("not an LBHX dump (bad magic)");
  const auto version = get_u32(in);
  if (version != kDumpVersion) throw ParseError("unsupported LBHX dump version " + std::to_string(version));
  CanonicalField f;
  f.lx = static_cast<int>(get_u32(in));
  f.ly = static_cast<int>(get_u32(in));
  f.q = static_cast<int>(get_u32(in));
  const auto family = get_u32(in);
  const auto vl = get_u32(in);
  const auto clustering = get_u32(in);
  if (family > 3 || clustering > 1) throw ParseError("LBHX dump: bad layout ids");
  f.desc = {static_cast<Family>(family), static_cast<int>(vl), static_cast<Clustering>(clustering)};
  const std::size_t n = static_cast<std::size_t>(f.lx) * f.ly * f.q;
  f.values.resize(n);
  std::vector<unsigned char> raw(n * 8);
  if (!in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()))) {
    throw ParseError("LBHX dump: truncated payload");
  }
  for (std::size_t i = 0; i < n; ++i) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(raw[i * 8 + b]) << (8 * b);
    f.values[i] = std::bit_cast<double>(bits);
  }
  return f;
}

void write_dump_file(const std::string& path, const CanonicalField& field) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RuntimeFault("cannot open '" + path + "' for writing");
  write_dump(out, field);
  if (!out) throw RuntimeFault("write to '" + path + "' failed");
}

CanonicalField read_dump_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open dump '" + path + "'");
  return read_dump(in);
}

}  // namespace lbhx
