#include "lbhx/validation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <numbers>
#include <sstream>

#include "lbhx/error.hpp"
#include "lbhx/init.hpp"
#include "lbhx/lattice_model.hpp"
#include "lbhx/simulation.hpp"

namespace lbhx {

namespace {

std::vector<LayoutDescriptor> all_layouts(int vl) {
  return {{Family::AoS}, {Family::SoA}, {Family::CSoA, vl}, {Family::CAoSoA, vl, Clustering::Consecutive}};
}

std::string check_bijections() {
  const Geometry g{12, 16, 3};
  constexpr int q = 37;
  for (Family f : {Family::AoS, Family::SoA, Family::CSoA, Family::CAoSoA}) {
    for (int vl : {2, 4}) {
      for (Clustering c : {Clustering::Interleaved, Clustering::Consecutive}) {
        const LayoutDescriptor d{f, vl, c};
        const IndexMap map(d, g, q);
        std::vector<char> seen(map.size(), 0);
        for (int p = 0; p < q; ++p) {
          for (int x = 0; x < g.alloc_lx(); ++x) {
            for (int y = 0; y < g.ly; ++y) {
              const std::size_t o = linear_index(d, g, q, p, x, y);
              if (o >= seen.size() || seen[o]) return d.label() + ": offset collision or overflow";
              seen[o] = 1;
              if (!(coords_of(d, g, q, o) == Coords{p, x, y})) return d.label() + ": coords_of is not the inverse";
            }
          }
        }
      }
    }
  }
  return {};
}

std::string check_model() {
  const auto m = builtin_model("d2q37");
  if (m.q() != 37) return "d2q37 has " + std::to_string(m.q()) + " velocities";
  if (!validate_moments(m, 4).valid_to(4, 1e-12)) return "d2q37 weights fail the order-4 moments";
  for (const auto& name : {"d2q9", "d2q37"}) {
    const auto mm = builtin_model(name);
    for (int l = 0; l < mm.q(); ++l) {
      if (mm.opposite[mm.opposite[l]] != l) return std::string(name) + ": opposite is not an involution";
    }
  }
  return {};
}

std::string check_permutation(int n) {
  const auto m = builtin_model("d2q37");
  FieldBuffer buf({Family::CSoA, 4}, {n, 16, 3}, m.q());
  initialize(buf, m, {InitKind::Random, 7, 0.05});
  fill_periodic_halos(buf);
  const Region all = Region::interior(buf.geom());
  propagate_region(m, buf, all);
  for (int p = 0; p < m.q(); ++p) {
    std::vector<double> a;
    std::vector<double> b;
    for (int x = 3; x < 3 + n; ++x) {
      for (int y = 0; y < 16; ++y) {
        a.push_back(buf.at(Role::Prv, p, x, y));
        b.push_back(buf.at(Role::Nxt, p, x, y));
      }
    }
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    if (a != b) return "population " + std::to_string(p) + " is not a permutation";
  }
  return {};
}

std::string check_conservation(int steps) {
  const auto m = builtin_model("d2q37");
  const ModelParams params{0.8, 1.0, 2};
  FieldBuffer buf({Family::CAoSoA, 4}, {12, 16, 3}, m.q());
  initialize(buf, m, {InitKind::Random, 3, 0.05});
  const Region all = Region::interior(buf.geom());
  double worst_site = 0.0;
  for (int s = 0; s < steps; ++s) {
    fill_periodic_halos(buf);
    propagate_region(m, buf, all);
    std::vector<Macroscopics> before;
    std::vector<double> f(m.q());
    for (int x = 3; x < 15; ++x) {
      for (int y = 0; y < 16; ++y) {
        for (int p = 0; p < m.q(); ++p) f[p] = buf.at(Role::Nxt, p, x, y);
        before.push_back(compute_moments(m, f));
      }
    }
    collide_region(m, params, buf, all);
    std::size_t i = 0;
    for (int x = 3; x < 15; ++x) {
      for (int y = 0; y < 16; ++y, ++i) {
        for (int p = 0; p < m.q(); ++p) f[p] = buf.at(Role::Prv, p, x, y);
        const auto after = compute_moments(m, f);
        const auto& b = before[i];
        const double scale = std::abs(b.rho);
        worst_site = std::max({worst_site, std::abs(after.rho - b.rho) / scale,
                               std::abs(after.rho * after.ux - b.rho * b.ux) / scale,
                               std::abs(after.rho * after.uy - b.rho * b.uy) / scale});
      }
    }
    buf.advance_generation();
  }
  if (worst_site > 1e-12) return "collide changed a site moment by " + std::to_string(worst_site);

  FieldBuffer wall({Family::SoA}, {12, 16, 3}, m.q());
  initialize(wall, m, {InitKind::Random, 4, 0.05});
  const auto total = [&] {
    double s = 0.0;
    for (int p = 0; p < m.q(); ++p) {
      for (int x = 3; x < 15; ++x) {
        for (int y = 0; y < 16; ++y) s += wall.at(Role::Prv, p, x, y);
      }
    }
    return s;
  };
  const double m0 = total();
  for (int s = 0; s < steps; ++s) step_periodic(m, params, wall, {YBoundary::WallBounceBack});
  const double drift = std::abs(total() - m0) / m0;
  if (drift > 1e-13) return "wall run drifted global mass by " + std::to_string(drift);
  return {};
}

std::string check_cross_layout(int lx, int ly, int steps) {
  const auto m = builtin_model("d2q9");
  const ModelParams params{0.8, 1.0, 2};
  std::vector<CanonicalField> out;
  for (const auto& d : all_layouts(4)) {
    FieldBuffer buf(d, {lx, ly, 1}, m.q());
    initialize(buf, m, {InitKind::Random, 11, 0.05});
    for (int s = 0; s < steps; ++s) step_periodic(m, params, buf, {});
    out.push_back(to_canonical(buf));
  }
  for (std::size_t k = 1; k < out.size(); ++k) {
    for (std::size_t i = 0; i < out[0].values.size(); ++i) {
      const double a = out[0].values[i];
      const double b = out[k].values[i];
      if (std::abs(a - b) > 1e-12 * std::abs(a)) return all_layouts(4)[k].label() + " differs from aos";
    }
  }
  for (const auto& d : all_layouts(4)) {
    FieldBuffer a(d, {lx, ly, 3}, 37);
    const auto m37 = builtin_model("d2q37");
    initialize(a, m37, {InitKind::Random, 12, 0.05});
    fill_periodic_halos(a);
    FieldBuffer b = a;
    const Region all = Region::interior(a.geom());
    propagate_region(m37, a, all);
    reference::propagate(m37, b, all);
    if (!std::equal(a.nxt(), a.nxt() + a.index().size(), b.nxt())) {
      return d.label() + ": fast propagate differs from the reference";
    }
  }
  return {};
}

std::string check_hetero(const std::string& model_name, int lx, int ly, int steps, Fault inject) {
  const auto m = builtin_model(model_name);
  const ModelParams params{0.8, 1.0, 2};
  const LayoutDescriptor d{Family::CAoSoA, 4};
  FieldBuffer oracle(d, {lx, ly, m.reach}, m.q());
  initialize(oracle, m, {InitKind::Random, 21, 0.05});
  for (int s = 0; s < steps; ++s) step_periodic(m, params, oracle, {});
  const auto want = to_canonical(oracle);

  RuntimeOptions ro;
  ro.inject = inject;
  PoolConfig pools{1, 1, 2.0};
  for (int mm : {0, m.reach - 1, m.reach, lx / 4, lx / 2}) {
    HeteroRuntime rt(m, params, {}, d, {lx, ly, m.reach}, mm, pools, ro);
    initialize(rt.host(), m, {InitKind::Random, 21, 0.05});
    rt.prime();
    PeriodicExchanger ex;
    for (int s = 0; s < steps; ++s) rt.step(ex);
    if (!(rt.snapshot().values == want.values)) return "M=" + std::to_string(mm) + " differs from the single-pool run";
  }
  return {};
}

std::string check_cross_rank(int lx, int ly, int steps, bool tcp) {
  SimulationConfig c;
  c.lx = lx;
  c.ly = ly;
  c.model = "d2q9";
  c.family = Family::CSoA;
  c.vl = 4;
  c.iterations = steps;
  c.seed = 9;
  const auto one = run_distributed(c, 1, TransportKind::InMemory);
  c.m = 3;
  const auto four = run_distributed(c, 4, TransportKind::InMemory);
  if (!(four.final_state.values == one.final_state.values)) return "4 in-memory ranks differ from 1 rank";
  if (tcp) {
    c.m = 1;
    const auto t = run_distributed(c, 4, TransportKind::Tcp);
    if (!(t.final_state.values == one.final_state.values)) return "4 tcp ranks differ from 1 rank";
  }
  const std::uint64_t want = static_cast<std::uint64_t>(steps) * c.halo * ly * 9 * 8;
  for (const auto& r : four.ranks) {
    if (r.bytes_to_left != want || r.bytes_to_right != want) {
      return "rank " + std::to_string(r.layout.rank) + " moved " + std::to_string(r.bytes_to_left) + "/" +
             std::to_string(r.bytes_to_right) + " halo bytes, expected " + std::to_string(want) + " per side";
    }
  }
  return {};
}

std::string check_taylor_green() {
  const auto fit = taylor_green_viscosity("d2q9", 64, 0.8, 2000);
  std::ostringstream s;
  if (fit.rel_error > 0.02) {
    s << "fitted nu " << fit.nu_fit << " vs " << fit.nu_theory << " (" << fit.rel_error * 100 << "% off)";
  }
  return s.str();
}

}  // namespace

TaylorGreenFit taylor_green_viscosity(const std::string& model_name, int n, double tau, int steps, int sample_every,
                                      double amplitude) {
  if (n < 4 || steps < 2 * sample_every || sample_every < 1) throw ConfigError("taylor-green: lattice or run too small");
  const auto m = builtin_model(model_name);
  const ModelParams params{tau, 1.0, 2};
  params.validate();
  FieldBuffer buf({Family::SoA}, {n, n, m.reach}, m.q());
  initialize(buf, m, {InitKind::TaylorGreen, 1, amplitude});
  const double k = 2.0 * std::numbers::pi / n;

  std::vector<double> f(m.q());
  const auto project = [&] {
    double num = 0.0;
    double den = 0.0;
    for (int x = 0; x < n; ++x) {
      for (int y = 0; y < n; ++y) {
        for (int p = 0; p < m.q(); ++p) f[p] = buf.at(Role::Prv, p, x + m.reach, y);
        const double mode = -std::cos(k * x) * std::sin(k * y);
        num += compute_moments(m, f).ux * mode;
        den += mode * mode;
      }
    }
    return num / den;
  };

  TaylorGreenFit fit;
  for (int s = 0; s <= steps; ++s) {
    if (s % sample_every == 0) {
      fit.times.push_back(s);
      fit.amplitudes.push_back(project());
    }
    if (s < steps) step_periodic(m, params, buf, {});
  }
  double st = 0.0, sl = 0.0, stt = 0.0, stl = 0.0;
  const double cnt = static_cast<double>(fit.times.size());
  for (std::size_t i = 0; i < fit.times.size(); ++i) {
    const double l = std::log(fit.amplitudes[i]);
    st += fit.times[i];
    sl += l;
    stt += fit.times[i] * fit.times[i];
    stl += fit.times[i] * l;
  }
  const double slope = (cnt * stl - st * sl) / (cnt * stt - st * st);
  fit.nu_fit = -slope / (2.0 * k * k);
  fit.nu_theory = m.cs2 * (tau - 0.5);
  fit.rel_error = std::abs(fit.nu_fit - fit.nu_theory) / fit.nu_theory;
  return fit;
}

std::vector<CheckResult> run_validation(const ValidationOptions& opts) {
  const bool q = opts.quick;
  std::vector<std::pair<std::string, std::function<std::string()>>> checks{
      {"layout bijection", check_bijections},
      {"model integrity", check_model},
      {"propagate permutation", [q] { return check_permutation(q ? 8 : 24); }},
      {"conservation", [q] { return check_conservation(q ? 2 : 10); }},
      {"cross-layout equivalence", [q] { return q ? check_cross_layout(16, 16, 4) : check_cross_layout(48, 64, 20); }},
      {"heterogeneous equivalence",
       [&] { return q ? check_hetero("d2q9", 16, 16, 3, opts.inject) : check_hetero("d2q37", 24, 16, 6, opts.inject); }},
      {"cross-rank equivalence", [q] { return q ? check_cross_rank(24, 16, 4, false) : check_cross_rank(96, 64, 20, true); }},
  };
  if (!q) checks.emplace_back("taylor-green viscosity", check_taylor_green);

  std::vector<CheckResult> out;
  for (auto& [name, fn] : checks) {
    CheckResult r;
    r.name = name;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      r.detail = fn();
      r.pass = r.detail.empty();
    } catch (const std::exception& e) {
      r.detail = std::string("threw: ") + e.what();
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out.push_back(std::move(r));
  }
  return out;
}

BenchReport validation_report(const std::vector<CheckResult>& results) {
  BenchReport r({"check", "pass", "seconds", "detail"});
  r.add_meta("experiment", "validate");
  for (const auto& c : results) {
    r.add_row({c.name, std::string(c.pass ? "true" : "false"), c.seconds, c.detail});
  }
  return r;
}

}  // namespace lbhx
