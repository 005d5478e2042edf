#include <cmath>

#include "kernels_internal.hpp"
#include "lbhx/error.hpp"
#include "lbhx/kernels.hpp"

namespace lbhx {

Macroscopics compute_moments(const LatticeModel& model, std::span<const double> f) {
  Macroscopics m;
  double jx = 0.0;
  double jy = 0.0;
  for (int l = 0; l < model.q(); ++l) {
    m.rho += f[l];
    jx += model.velocities[l].x * f[l];
    jy += model.velocities[l].y * f[l];
  }
  m.ux = jx / m.rho;
  m.uy = jy / m.rho;
  double spread = 0.0;
  for (int l = 0; l < model.q(); ++l) {
    const double dx = model.velocities[l].x - m.ux;
    const double dy = model.velocities[l].y - m.uy;
    spread += (dx * dx + dy * dy) * f[l];
  }
  m.temperature = spread / (model.dim * m.rho);
  return m;
}

std::vector<double> equilibrium(const LatticeModel& model, const Macroscopics& m) {
  const EquilibriumConstants k(model.cs2);
  const double usq = m.ux * m.ux + m.uy * m.uy;
  std::vector<double> feq(model.q());
  for (int l = 0; l < model.q(); ++l) {
    const double cu = model.velocities[l].x * m.ux + model.velocities[l].y * m.uy;
    feq[l] = equilibrium_term(model.weights[l], m.rho, cu, usq, k);
  }
  return feq;
}

bool unphysical(const Macroscopics& m) {
  return !(m.rho > 0.0) || !std::isfinite(m.rho) || !std::isfinite(m.ux) || !std::isfinite(m.uy) ||
         !std::isfinite(m.temperature);
}

namespace detail {

void check_region(const FieldBuffer& buf, const Region& region) {
  const auto& g = buf.geom();
  if (region.empty() || region.x_begin < g.halo || region.x_end > g.halo + g.lx || region.y_begin < 0 ||
      region.y_end > g.ly) {
    throw ContractViolation("region must be a non-empty part of the interior");
  }
}

void check_propagate_preconditions(const LatticeModel& model, const FieldBuffer& buf, const Region& region) {
  check_region(buf, region);
  if (buf.geom().halo < model.reach) throw ContractViolation("halo narrower than the model reach");
  if (buf.halo_checks() && !buf.halos_current()) {
    throw ContractViolation("propagate on stale halos (generation " + std::to_string(buf.generation()) + ")");
  }
}

bool wall_source_outside(int y, int cy, int ly) {
  const int sy = y - cy;
  return sy < 0 || sy >= ly;
}

}  // namespace detail

namespace reference {

void propagate(const LatticeModel& model, FieldBuffer& buf, const Region& region) {
  detail::check_propagate_preconditions(model, buf, region);
  const auto& map = buf.index();
  const int ly = buf.geom().ly;
  for (int x = region.x_begin; x < region.x_end; ++x) {
    for (int y = region.y_begin; y < region.y_end; ++y) {
      for (int l = 0; l < model.q(); ++l) {
        const int sx = x - model.velocities[l].x;
        const int sy = detail::wrap(y - model.velocities[l].y, ly);
        buf.nxt()[map.offset(l, x, y)] = buf.prv()[map.offset(l, sx, sy)];
      }
    }
  }
}

void apply_bc(const LatticeModel& model, FieldBuffer& buf, const BoundaryPolicy& policy, const Region& region) {
  detail::check_region(buf, region);
  if (policy.y_mode == YBoundary::Periodic) return;
  const auto& map = buf.index();
  const int ly = buf.geom().ly;
  for (int x = region.x_begin; x < region.x_end; ++x) {
    for (int y = region.y_begin; y < region.y_end; ++y) {
      if (y >= model.reach && y < ly - model.reach) continue;
      for (int l = 0; l < model.q(); ++l) {
        if (detail::wall_source_outside(y, model.velocities[l].y, ly)) {
          buf.nxt()[map.offset(l, x, y)] = buf.prv()[map.offset(model.opposite[l], x, y)];
        }
      }
    }
  }
}

void collide(const LatticeModel& model, const ModelParams& params, FieldBuffer& buf, const Region& region) {
  params.validate();
  detail::check_region(buf, region);
  const auto& map = buf.index();
  const double omega = params.omega();
  std::vector<double> f(model.q());
  for (int x = region.x_begin; x < region.x_end; ++x) {
    for (int y = region.y_begin; y < region.y_end; ++y) {
      for (int l = 0; l < model.q(); ++l) f[l] = buf.nxt()[map.offset(l, x, y)];
      const auto m = compute_moments(model, f);
      const auto feq = equilibrium(model, m);
      for (int l = 0; l < model.q(); ++l) buf.prv()[map.offset(l, x, y)] = f[l] - omega * (f[l] - feq[l]);
    }
  }
}

void step(const LatticeModel& model, const ModelParams& params, FieldBuffer& buf, const BoundaryPolicy& policy) {
  fill_periodic_halos(buf);
  const auto all = Region::interior(buf.geom());
  propagate(model, buf, all);
  reference::apply_bc(model, buf, policy, all);
  collide(model, params, buf, all);
  buf.advance_generation();
}

}  // namespace reference

}  // namespace lbhx
