#include "lbhx/init.hpp"

#include <cmath>
#include <numbers>

#include "lbhx/error.hpp"

namespace lbhx {

namespace {

std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Uniform in [0, 1) from a counter-based hash of the site key.
double site_uniform(std::uint64_t seed, int x, int y, int stream) {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ static_cast<std::uint64_t>(static_cast<std::uint32_t>(x)));
  h = splitmix64(h ^ (static_cast<std::uint64_t>(static_cast<std::uint32_t>(y)) << 20));
  h = splitmix64(h ^ (static_cast<std::uint64_t>(stream) << 40));
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

}  // namespace

InitKind parse_init(std::string_view s) {
  if (s == "rest") return InitKind::Rest;
  if (s == "random") return InitKind::Random;
  if (s == "taylor-green") return InitKind::TaylorGreen;
  throw ConfigError("unknown init '" + std::string(s) + "' (expected rest, random or taylor-green)");
}

std::string_view to_string(InitKind k) {
  switch (k) {
    case InitKind::Rest: return "rest";
    case InitKind::Random: return "random";
    case InitKind::TaylorGreen: return "taylor-green";
  }
  return "?";
}

Macroscopics taylor_green_state(const LatticeModel& model, double amplitude, int lx, int ly, int x, int y) {
  const double kx = 2.0 * std::numbers::pi / lx;
  const double ky = 2.0 * std::numbers::pi / ly;
  Macroscopics m;
  m.ux = -amplitude * std::cos(kx * x) * std::sin(ky * y);
  m.uy = amplitude * (kx / ky) * std::sin(kx * x) * std::cos(ky * y);
  // pressure p = rho cs2 balancing the vortex
  const double dp = -0.25 * amplitude * amplitude * (std::cos(2.0 * kx * x) + (kx * kx) / (ky * ky) * std::cos(2.0 * ky * y));
  m.rho = 1.0 + dp / model.cs2;
  return m;
}

void initialize(FieldBuffer& buf, const LatticeModel& model, const InitSpec& spec, int x_global_begin, int lx_global) {
  const auto& g = buf.geom();
  if (lx_global < 0) lx_global = g.lx;
  for (int x = 0; x < g.lx; ++x) {
    const int gx = x_global_begin + x;
    for (int y = 0; y < g.ly; ++y) {
      Macroscopics m{1.0, 0.0, 0.0, 0.0};
      if (spec.kind == InitKind::Random) {
        m.rho = 1.0 + 0.1 * (site_uniform(spec.seed, gx, y, 0) - 0.5);
        m.ux = spec.amplitude * (2.0 * site_uniform(spec.seed, gx, y, 1) - 1.0);
        m.uy = spec.amplitude * (2.0 * site_uniform(spec.seed, gx, y, 2) - 1.0);
      } else if (spec.kind == InitKind::TaylorGreen) {
        m = taylor_green_state(model, spec.amplitude, lx_global, g.ly, gx, y);
      }
      const auto feq = equilibrium(model, m);
      for (int p = 0; p < model.q(); ++p) {
        double v = feq[p];
        // non-equilibrium noise keeps collide from being a no-op
        if (spec.kind == InitKind::Random) v *= 1.0 + 0.02 * (site_uniform(spec.seed, gx, y, 3 + p) - 0.5);
        buf.at(Role::Prv, p, x + g.halo, y) = v;
      }
    }
  }
}

}  // namespace lbhx
