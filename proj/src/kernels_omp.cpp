#include <omp.h>
#include <time.h>

#include <algorithm>
#include <array>
#include <atomic>
#include <vector>

#include "kernels_internal.hpp"
#include "lbhx/error.hpp"
#include "lbhx/kernels.hpp"

namespace lbhx {

namespace {

constexpr int kMaxQ = 64;
constexpr int kMaxLanes = 64;

double thread_cpu_seconds() {
  timespec ts{};
  clock_gettime(CLOCK_THREAD_CPUTIME_ID, &ts);
  return static_cast<double>(ts.tv_sec) + 1e-9 * static_cast<double>(ts.tv_nsec);
}

// Per-thread CPU time of one parallel region, folded into the meter as a max.
class TeamCpuSpan {
 public:
  explicit TeamCpuSpan(CpuMeter* meter) : meter_(meter), start_(meter ? thread_cpu_seconds() : 0.0) {}
  TeamCpuSpan(const TeamCpuSpan&) = delete;
  TeamCpuSpan& operator=(const TeamCpuSpan&) = delete;
  ~TeamCpuSpan() {
    if (!meter_) return;
    const double spent = thread_cpu_seconds() - start_;
    double seen = meter_->region_max.load(std::memory_order_relaxed);
    while (spent > seen && !meter_->region_max.compare_exchange_weak(seen, spent, std::memory_order_relaxed)) {
    }
  }

 private:
  CpuMeter* meter_;
  double start_;
};

void fold(const Exec& exec) {
  if (exec.meter) exec.meter->fold();
}

inline void pull_element(const IndexMap& map, const double* prv, double* nxt, int p, int x, int y, const Velocity& c,
                         int ly) {
  nxt[map.offset(p, x, y)] = prv[map.offset(p, x - c.x, detail::wrap(y - c.y, ly))];
}

// ---------------------------------------------------------------------------
// propagate

void propagate_aos(const LatticeModel& model, FieldBuffer& buf, const Region& r, const Exec& exec) {
  const auto& map = buf.index();
  const int q = model.q();
  const int ly = buf.geom().ly;
  const int reach = model.reach;
  std::vector<std::ptrdiff_t> off(q);
  for (int p = 0; p < q; ++p) {
    off[p] = neighbor_stride(buf.desc(), buf.geom(), q, -model.velocities[p].x, -model.velocities[p].y).value;
  }
  const double* prv = buf.prv();
  double* nxt = buf.nxt();
#pragma omp parallel num_threads(exec.threads) if (exec.threads > 1)
  {
    TeamCpuSpan span(exec.meter);
#pragma omp for schedule(static)
    for (int x = r.x_begin; x < r.x_end; ++x) {
      for (int y = r.y_begin; y < r.y_end; ++y) {
        const std::size_t base = (static_cast<std::size_t>(x) * ly + y) * q;
        if (y >= reach && y < ly - reach) {
          for (int p = 0; p < q; ++p) nxt[base + p] = prv[base + p + off[p]];
        } else {
          for (int p = 0; p < q; ++p) pull_element(map, prv, nxt, p, x, y, model.velocities[p], ly);
        }
      }
    }
  }
  fold(exec);
}

void propagate_soa(const LatticeModel& model, FieldBuffer& buf, const Region& r, const Exec& exec) {
  const auto& map = buf.index();
  const int q = model.q();
  const int ly = buf.geom().ly;
  const std::size_t plane = map.plane();
  const double* prv = buf.prv();
  double* nxt = buf.nxt();
#pragma omp parallel num_threads(exec.threads) if (exec.threads > 1)
  {
    TeamCpuSpan span(exec.meter);
#pragma omp for schedule(static)
    for (int x = r.x_begin; x < r.x_end; ++x) {
      for (int p = 0; p < q; ++p) {
        const Velocity c = model.velocities[p];
        const std::ptrdiff_t s = -static_cast<std::ptrdiff_t>(c.x) * ly - c.y;
        const int lo = std::clamp(std::max(0, c.y), r.y_begin, r.y_end);
        const int hi = std::clamp(ly + std::min(0, c.y), lo, r.y_end);
        const std::size_t base = p * plane + static_cast<std::size_t>(x) * ly;
        for (int y = r.y_begin; y < lo; ++y) pull_element(map, prv, nxt, p, x, y, c, ly);
#pragma omp simd
        for (int y = lo; y < hi; ++y) nxt[base + y] = prv[base + y + s];
        for (int y = hi; y < r.y_end; ++y) pull_element(map, prv, nxt, p, x, y, c, ly);
      }
    }
  }
  fold(exec);
}

// Whole-column propagate for CSoA/CAoSoA: a cluster moves as one VL-wide copy
// while its source cluster row stays inside the column; the wrapped rows go
// through the coordinate path.
void propagate_clustered(const LatticeModel& model, FieldBuffer& buf, const Region& r, const Exec& exec) {
  const auto& map = buf.index();
  const auto& desc = buf.desc();
  const int q = model.q();
  const int ly = buf.geom().ly;
  const int vl = desc.vl;
  const int lyovl = map.lyovl();
  const std::size_t plane = map.plane();
  const bool caosoa = desc.family == Family::CAoSoA;

  struct PopPlan {
    bool uniform;
    int lo, hi;               // iy range where the cluster shift is exact
    std::ptrdiff_t shift;     // element offset of the source cluster
  };
  std::vector<PopPlan> plan(q);
  for (int p = 0; p < q; ++p) {
    const Velocity c = model.velocities[p];
    const auto st = neighbor_stride(desc, buf.geom(), q, -c.x, -c.y);
    if (st.kind == NeighborStride::Kind::NonUniform) {
      plan[p] = {false, 0, 0, 0};
      continue;
    }
    const int dyc = desc.clustering == Clustering::Interleaved ? -c.y : -c.y / vl;
    const int lo = std::clamp(std::max(0, -dyc), 0, lyovl);
    const int hi = std::clamp(lyovl - std::max(0, dyc), lo, lyovl);
    const std::ptrdiff_t unit = caosoa ? static_cast<std::ptrdiff_t>(q) * vl : vl;
    plan[p] = {true, lo, hi, st.value * unit};
  }
  const auto cluster_base = [&](int p, std::size_t cluster) -> std::size_t {
    return caosoa ? (cluster * q + p) * vl : p * plane + cluster * vl;
  };
  const double* prv = buf.prv();
  double* nxt = buf.nxt();

  const auto slow_cluster = [&](int p, int x, int iy) {
    for (int k = 0; k < vl; ++k) pull_element(map, prv, nxt, p, x, map.row_of(iy, k), model.velocities[p], ly);
  };
  const auto fast_cluster = [&](int p, std::size_t cluster) {
    const std::size_t dst = cluster_base(p, cluster);
    const std::size_t src = dst + plan[p].shift;
#pragma omp simd
    for (int k = 0; k < vl; ++k) nxt[dst + k] = prv[src + k];
  };

#pragma omp parallel num_threads(exec.threads) if (exec.threads > 1)
  {
    TeamCpuSpan span(exec.meter);
#pragma omp for schedule(static)
    for (int x = r.x_begin; x < r.x_end; ++x) {
      const std::size_t col = static_cast<std::size_t>(x) * lyovl;
      if (caosoa) {
        for (int iy = 0; iy < lyovl; ++iy) {
          for (int p = 0; p < q; ++p) {
            if (plan[p].uniform && iy >= plan[p].lo && iy < plan[p].hi) {
              fast_cluster(p, col + iy);
            } else {
              slow_cluster(p, x, iy);
            }
          }
        }
      } else {
        for (int p = 0; p < q; ++p) {
          if (!plan[p].uniform) {
            for (int iy = 0; iy < lyovl; ++iy) slow_cluster(p, x, iy);
            continue;
          }
          for (int iy = 0; iy < plan[p].lo; ++iy) slow_cluster(p, x, iy);
          for (int iy = plan[p].lo; iy < plan[p].hi; ++iy) fast_cluster(p, col + iy);
          for (int iy = plan[p].hi; iy < lyovl; ++iy) slow_cluster(p, x, iy);
        }
      }
    }
  }
  fold(exec);
}

void propagate_coordinates(const LatticeModel& model, FieldBuffer& buf, const Region& r, const Exec& exec) {
  const auto& map = buf.index();
  const int ly = buf.geom().ly;
  const double* prv = buf.prv();
  double* nxt = buf.nxt();
#pragma omp parallel num_threads(exec.threads) if (exec.threads > 1)
  {
    TeamCpuSpan span(exec.meter);
#pragma omp for schedule(static)
    for (int x = r.x_begin; x < r.x_end; ++x) {
      for (int y = r.y_begin; y < r.y_end; ++y) {
        for (int p = 0; p < model.q(); ++p) pull_element(map, prv, nxt, p, x, y, model.velocities[p], ly);
      }
    }
  }
  fold(exec);
}

// ---------------------------------------------------------------------------
// collide

struct CollideTables {
  int q;
  std::array<double, kMaxQ> cx{};
  std::array<double, kMaxQ> cy{};
  std::array<double, kMaxQ> w{};
  double omega;
  EquilibriumConstants eq;
  int flop_scale;

  CollideTables(const LatticeModel& m, const ModelParams& params, const CollideOptions& opts)
      : q(m.q()), omega(params.omega()), eq(m.cs2), flop_scale(std::max(1, opts.flop_scale)) {
    for (int p = 0; p < q; ++p) {
      cx[p] = m.velocities[p].x;
      cy[p] = m.velocities[p].y;
      w[p] = m.weights[p];
    }
  }
};

std::atomic<double> g_flop_sink{0.0};
volatile double g_flop_zero = 0.0;

// Relaxes n <= kMaxLanes sites. Population p of lane k lives at
// in[p][k * stride]; the per-lane arithmetic matches reference::collide.
template <int kStride>
void collide_lanes(const CollideTables& t, const std::array<const double*, kMaxQ>& in,
                   const std::array<double*, kMaxQ>& out, int n, int stride) {
  const int ls = kStride > 0 ? kStride : stride;
  double rho[kMaxLanes];
  double jx[kMaxLanes];
  double jy[kMaxLanes];
  double ux[kMaxLanes];
  double uy[kMaxLanes];
  double usq[kMaxLanes];
  for (int k = 0; k < n; ++k) rho[k] = jx[k] = jy[k] = 0.0;
  for (int p = 0; p < t.q; ++p) {
    const double* f = in[p];
    const double cx = t.cx[p];
    const double cy = t.cy[p];
#pragma omp simd
    for (int k = 0; k < n; ++k) {
      const double v = f[k * ls];
      rho[k] += v;
      jx[k] += cx * v;
      jy[k] += cy * v;
    }
  }
#pragma omp simd
  for (int k = 0; k < n; ++k) {
    ux[k] = jx[k] / rho[k];
    uy[k] = jy[k] / rho[k];
    usq[k] = ux[k] * ux[k] + uy[k] * uy[k];
  }
  for (int rep = 1; rep < t.flop_scale; ++rep) {
    const double z = g_flop_zero;
    double acc = 0.0;
    for (int p = 0; p < t.q; ++p) {
      for (int k = 0; k < n; ++k) {
        acc += equilibrium_term(t.w[p], rho[k], t.cx[p] * ux[k] + t.cy[p] * uy[k], usq[k] + z, t.eq);
      }
    }
    g_flop_sink.store(acc, std::memory_order_relaxed);
  }
  for (int p = 0; p < t.q; ++p) {
    const double* f = in[p];
    double* o = out[p];
    const double cx = t.cx[p];
    const double cy = t.cy[p];
    const double w = t.w[p];
#pragma omp simd
    for (int k = 0; k < n; ++k) {
      const double cu = cx * ux[k] + cy * uy[k];
      const double feq = equilibrium_term(w, rho[k], cu, usq[k], t.eq);
      const double v = f[k * ls];
      o[k * ls] = v - t.omega * (v - feq);
    }
  }
}

void collide_site(const CollideTables& t, const IndexMap& map, const double* in, double* out, int x, int y) {
  std::array<const double*, kMaxQ> ip{};
  std::array<double*, kMaxQ> op{};
  for (int p = 0; p < t.q; ++p) {
    const std::size_t o = map.offset(p, x, y);
    ip[p] = in + o;
    op[p] = out + o;
  }
  collide_lanes<1>(t, ip, op, 1, 1);
}

}  // namespace

void propagate_region(const LatticeModel& model, FieldBuffer& buf, const Region& region, const Exec& exec) {
  detail::check_propagate_preconditions(model, buf, region);
  const bool full_y = region.y_begin == 0 && region.y_end == buf.geom().ly;
  switch (buf.desc().family) {
    case Family::AoS: return propagate_aos(model, buf, region, exec);
    case Family::SoA: return propagate_soa(model, buf, region, exec);
    case Family::CSoA:
    case Family::CAoSoA:
      if (full_y) return propagate_clustered(model, buf, region, exec);
      return propagate_coordinates(model, buf, region, exec);
  }
}

void apply_bc(const LatticeModel& model, FieldBuffer& buf, const BoundaryPolicy& policy, const Region& region,
              const Exec& exec) {
  detail::check_region(buf, region);
  if (policy.y_mode == YBoundary::Periodic) return;
  const auto& map = buf.index();
  const int ly = buf.geom().ly;
  const int reach = model.reach;
  const double* prv = buf.prv();
  double* nxt = buf.nxt();
#pragma omp parallel num_threads(exec.threads) if (exec.threads > 1)
  {
    TeamCpuSpan span(exec.meter);
#pragma omp for schedule(static)
    for (int x = region.x_begin; x < region.x_end; ++x) {
      const auto fix_row = [&](int y) {
        for (int p = 0; p < model.q(); ++p) {
          if (detail::wall_source_outside(y, model.velocities[p].y, ly)) {
            nxt[map.offset(p, x, y)] = prv[map.offset(model.opposite[p], x, y)];
          }
        }
      };
      for (int y = region.y_begin; y < std::min(region.y_end, reach); ++y) fix_row(y);
      for (int y = std::max(region.y_begin, std::max(reach, ly - reach)); y < region.y_end; ++y) fix_row(y);
    }
  }
  fold(exec);
}

void collide_region(const LatticeModel& model, const ModelParams& params, FieldBuffer& buf, const Region& region,
                    const Exec& exec, const CollideOptions& opts) {
  params.validate();
  detail::check_region(buf, region);
  if (model.q() > kMaxQ) throw ConfigError("collide supports at most 64 populations");
  const CollideTables t(model, params, opts);
  const auto& map = buf.index();
  const auto& desc = buf.desc();
  const int q = model.q();
  const int ly = buf.geom().ly;
  const std::size_t plane = map.plane();
  const bool full_y = region.y_begin == 0 && region.y_end == ly;
  const double* in = buf.nxt();
  double* out = buf.prv();

#pragma omp parallel num_threads(exec.threads) if (exec.threads > 1)
  {
    TeamCpuSpan span(exec.meter);
    std::array<const double*, kMaxQ> ip{};
    std::array<double*, kMaxQ> op{};
#pragma omp for schedule(static)
    for (int x = region.x_begin; x < region.x_end; ++x) {
      switch (desc.family) {
        case Family::AoS:
          for (int y0 = region.y_begin; y0 < region.y_end; y0 += kMaxLanes) {
            const int n = std::min(kMaxLanes, region.y_end - y0);
            const std::size_t base = (static_cast<std::size_t>(x) * ly + y0) * q;
            for (int p = 0; p < q; ++p) {
              ip[p] = in + base + p;
              op[p] = out + base + p;
            }
            collide_lanes<0>(t, ip, op, n, q);
          }
          break;
        case Family::SoA:
          for (int y0 = region.y_begin; y0 < region.y_end; y0 += kMaxLanes) {
            const int n = std::min(kMaxLanes, region.y_end - y0);
            for (int p = 0; p < q; ++p) {
              const std::size_t o = p * plane + static_cast<std::size_t>(x) * ly + y0;
              ip[p] = in + o;
              op[p] = out + o;
            }
            collide_lanes<1>(t, ip, op, n, 1);
          }
          break;
        case Family::CSoA:
        case Family::CAoSoA: {
          if (!full_y) {
            for (int y = region.y_begin; y < region.y_end; ++y) collide_site(t, map, in, out, x, y);
            break;
          }
          const int vl = desc.vl;
          const bool caosoa = desc.family == Family::CAoSoA;
          for (int iy = 0; iy < map.lyovl(); ++iy) {
            const std::size_t cluster = static_cast<std::size_t>(x) * map.lyovl() + iy;
            for (int k0 = 0; k0 < vl; k0 += kMaxLanes) {
              const int n = std::min(kMaxLanes, vl - k0);
              for (int p = 0; p < q; ++p) {
                const std::size_t o = (caosoa ? (cluster * q + p) * vl : p * plane + cluster * vl) + k0;
                ip[p] = in + o;
                op[p] = out + o;
              }
              collide_lanes<1>(t, ip, op, n, 1);
            }
          }
          break;
        }
      }
    }
  }
  fold(exec);
}

void step_region(const LatticeModel& model, const ModelParams& params, FieldBuffer& buf,
                 std::span<const Region> regions, const BoundaryPolicy& policy, const Exec& exec,
                 const CollideOptions& opts) {
  for (const auto& r : regions) {
    if (!r.empty()) propagate_region(model, buf, r, exec);
  }
  for (const auto& r : regions) {
    if (!r.empty()) apply_bc(model, buf, policy, r, exec);
  }
  for (const auto& r : regions) {
    if (!r.empty()) collide_region(model, params, buf, r, exec, opts);
  }
}

void step_periodic(const LatticeModel& model, const ModelParams& params, FieldBuffer& buf,
                   const BoundaryPolicy& policy, const Exec& exec, const CollideOptions& opts) {
  fill_periodic_halos(buf);
  const Region all = Region::interior(buf.geom());
  step_region(model, params, buf, std::span<const Region>(&all, 1), policy, exec, opts);
  buf.advance_generation();
}

}  // namespace lbhx
