#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "lbhx/dump.hpp"
#include "lbhx/error.hpp"
#include "lbhx/init.hpp"
#include "lbhx/kernels.hpp"

using namespace lbhx;

namespace {

const LayoutDescriptor kLayouts[] = {
    {Family::AoS, 1, Clustering::Interleaved},     {Family::SoA, 1, Clustering::Interleaved},
    {Family::CSoA, 4, Clustering::Interleaved},    {Family::CAoSoA, 4, Clustering::Interleaved},
    {Family::CSoA, 4, Clustering::Consecutive},    {Family::CAoSoA, 8, Clustering::Consecutive},
};

FieldBuffer random_field(const LatticeModel& m, LayoutDescriptor d, int lx, int ly, std::uint64_t seed = 7) {
  FieldBuffer buf(d, {lx, ly, m.reach}, m.q());
  initialize(buf, m, {InitKind::Random, seed, 0.05});
  return buf;
}

double max_rel_diff(const CanonicalField& a, const CanonicalField& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    worst = std::max(worst, std::abs(a.values[i] - b.values[i]) / std::max(std::abs(b.values[i]), 1e-300));
  }
  return worst;
}

}  // namespace

TEST_CASE("moments of the weights") {
  const auto m = builtin_model("d2q9");
  const auto mm = compute_moments(m, m.weights);
  CHECK(mm.rho == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(std::abs(mm.ux) < 1e-16);
  CHECK(std::abs(mm.uy) < 1e-16);
  CHECK(mm.temperature == doctest::Approx(1.0 / 3.0).epsilon(1e-14));

  std::vector<double> f(9, 0.0);
  for (int l = 0; l < 9; ++l) {
    if (m.velocities[l] == Velocity{1, 0}) f[l] = 1.0;
  }
  const auto one = compute_moments(m, f);
  CHECK(one.rho == 1.0);
  CHECK(one.ux == 1.0);
  CHECK(one.uy == 0.0);
  CHECK(one.temperature == 0.0);
}

TEST_CASE("equilibrium values and moments") {
  const auto m = builtin_model("d2q9");
  const auto feq = equilibrium(m, {1.0, 0.1, 0.0, 0.0});
  for (int l = 0; l < 9; ++l) {
    if (m.velocities[l] == Velocity{1, 0}) CHECK(feq[l] == doctest::Approx(0.14777777777777779).epsilon(1e-14));
  }
  for (const char* name : {"d2q9", "d2q37"}) {
    const auto model = builtin_model(name);
    const Macroscopics in{1.3, 0.07, -0.04, 0.0};
    const auto mom = compute_moments(model, equilibrium(model, in));
    CHECK(mom.rho == doctest::Approx(in.rho).epsilon(1e-13));
    CHECK(mom.ux == doctest::Approx(in.ux).epsilon(1e-13));
    CHECK(mom.uy == doctest::Approx(in.uy).epsilon(1e-13));
    const auto rest = equilibrium(model, {0.9, 0.0, 0.0, 0.0});
    for (int l = 0; l < model.q(); ++l) CHECK(rest[l] == doctest::Approx(0.9 * model.weights[l]));
  }
}

TEST_CASE("single value drifts along its velocity") {
  const auto m = builtin_model("d2q37");
  for (const auto& d : kLayouts) {
    FieldBuffer buf(d, {8, 16, 3}, m.q());
    int l31 = 0;
    for (int l = 0; l < m.q(); ++l) {
      if (m.velocities[l] == Velocity{3, 1}) l31 = l;
    }
    buf.at(Role::Prv, l31, 3 + 2, 5) = 1.5;
    fill_periodic_halos(buf);
    propagate_region(m, buf, Region::interior(buf.geom()));
    CHECK(buf.at(Role::Nxt, l31, 3 + 5, 6) == 1.5);
  }
}

TEST_CASE("propagate fast path matches the reference bit for bit") {
  for (const char* name : {"d2q9", "d2q37"}) {
    const auto m = builtin_model(name);
    for (const auto& d : kLayouts) {
      CAPTURE(d.label());
      auto a = random_field(m, d, 16, 16);
      auto b = random_field(m, d, 16, 16);
      fill_periodic_halos(a);
      fill_periodic_halos(b);
      const auto all = Region::interior(a.geom());
      propagate_region(m, a, all, {2, nullptr});
      reference::propagate(m, b, all);
      CHECK(std::equal(a.nxt(), a.nxt() + a.index().size(), b.nxt()));
      // partial regions exercise the edge handling of every path
      const Region part{5, 11, 3, 13};
      propagate_region(m, a, part);
      reference::propagate(m, b, part);
      CHECK(std::equal(a.nxt(), a.nxt() + a.index().size(), b.nxt()));
    }
  }
}

TEST_CASE("propagate permutes every population") {
  const auto m = builtin_model("d2q37");
  for (const auto& d : kLayouts) {
    auto buf = random_field(m, d, 8, 8 * (d.width() > 4 ? 2 : 1));
    fill_periodic_halos(buf);
    propagate_region(m, buf, Region::interior(buf.geom()));
    const auto& g = buf.geom();
    for (int p = 0; p < m.q(); ++p) {
      std::vector<double> before;
      std::vector<double> after;
      for (int x = g.halo; x < g.halo + g.lx; ++x) {
        for (int y = 0; y < g.ly; ++y) {
          before.push_back(buf.at(Role::Prv, p, x, y));
          after.push_back(buf.at(Role::Nxt, p, x, y));
        }
      }
      std::sort(before.begin(), before.end());
      std::sort(after.begin(), after.end());
      CHECK(before == after);
    }
  }
}

TEST_CASE("collide conserves mass and momentum and matches the reference") {
  for (const char* name : {"d2q9", "d2q37"}) {
    const auto m = builtin_model(name);
    for (const auto& d : kLayouts) {
      CAPTURE(d.label());
      auto a = random_field(m, d, 8, 16);
      // collide reads nxt; seed it from prv
      std::copy(a.prv(), a.prv() + a.index().size(), a.nxt());
      auto b = a;
      const auto all = Region::interior(a.geom());
      collide_region(m, {0.8}, a, all, {2, nullptr}, {3});
      reference::collide(m, {0.8}, b, all);
      CHECK(std::equal(a.prv(), a.prv() + a.index().size(), b.prv()));
      std::vector<double> f(m.q());
      std::vector<double> g(m.q());
      double worst = 0.0;
      const int h = a.geom().halo;
      for (int x = h; x < h + 8; ++x) {
        for (int y = 0; y < 16; ++y) {
          for (int l = 0; l < m.q(); ++l) {
            f[l] = a.at(Role::Nxt, l, x, y);
            g[l] = a.at(Role::Prv, l, x, y);
          }
          const auto m0 = compute_moments(m, f);
          const auto m1 = compute_moments(m, g);
          worst = std::max({worst, std::abs(m1.rho - m0.rho) / m0.rho,
                            std::abs(m1.rho * m1.ux - m0.rho * m0.ux) / m0.rho,
                            std::abs(m1.rho * m1.uy - m0.rho * m0.uy) / m0.rho});
        }
      }
      CHECK(worst < 1e-12);
    }
  }
}

TEST_CASE("collide edge cases") {
  const auto m = builtin_model("d2q9");
  auto buf = random_field(m, {Family::SoA}, 4, 8);
  std::copy(buf.prv(), buf.prv() + buf.index().size(), buf.nxt());
  collide_region(m, {1.0}, buf, Region::interior(buf.geom()));
  std::vector<double> f(9);
  for (int l = 0; l < 9; ++l) f[l] = buf.at(Role::Nxt, l, 4, 2);
  const auto feq = equilibrium(m, compute_moments(m, f));
  for (int l = 0; l < 9; ++l) CHECK(buf.at(Role::Prv, l, 4, 2) == doctest::Approx(feq[l]).epsilon(1e-15));
  CHECK_THROWS_AS(collide_region(m, {0.5}, buf, Region::interior(buf.geom())), ConfigError);
}

TEST_CASE("wall bounce-back conserves mass and keeps rest fluid at rest") {
  const auto m = builtin_model("d2q37");
  for (const auto& d : kLayouts) {
    CAPTURE(d.label());
    auto buf = random_field(m, d, 8, 16);
    fill_periodic_halos(buf);
    const auto all = Region::interior(buf.geom());
    propagate_region(m, buf, all);
    auto ref = buf;
    apply_bc(m, buf, {YBoundary::WallBounceBack}, all);
    reference::apply_bc(m, ref, {YBoundary::WallBounceBack}, all);
    CHECK(std::equal(buf.nxt(), buf.nxt() + buf.index().size(), ref.nxt()));
    double before = 0.0;
    double after = 0.0;
    for (int p = 0; p < m.q(); ++p) {
      for (int x = 3; x < 11; ++x) {
        for (int y = 0; y < 16; ++y) {
          before += buf.at(Role::Prv, p, x, y);
          after += buf.at(Role::Nxt, p, x, y);
        }
      }
    }
    CHECK(std::abs(after - before) / before < 1e-13);

    FieldBuffer rest(d, {8, 16, 3}, m.q());
    initialize(rest, m, {InitKind::Rest, 1, 0.0});
    const auto start = to_canonical(rest);
    for (int i = 0; i < 3; ++i) step_periodic(m, {0.9}, rest, {YBoundary::WallBounceBack});
    const auto end = to_canonical(rest);
    for (std::size_t i = 0; i < end.values.size(); ++i) CHECK(end.values[i] == doctest::Approx(start.values[i]).epsilon(1e-14));
  }
}

TEST_CASE("periodic bc is a no-op") {
  const auto m = builtin_model("d2q9");
  auto buf = random_field(m, {Family::AoS}, 4, 8);
  auto copy = buf;
  apply_bc(m, buf, {YBoundary::Periodic}, Region::interior(buf.geom()));
  CHECK(std::equal(buf.nxt(), buf.nxt() + buf.index().size(), copy.nxt()));
}

TEST_CASE("full steps agree across layouts and thread counts") {
  const auto m = builtin_model("d2q9");
  for (auto y_mode : {YBoundary::Periodic, YBoundary::WallBounceBack}) {
    FieldBuffer oracle = random_field(m, {Family::SoA}, 48, 64);
    for (int s = 0; s < 10; ++s) reference::step(m, {0.7}, oracle, {y_mode});
    const auto want = to_canonical(oracle);
    for (const auto& d : kLayouts) {
      CAPTURE(d.label());
      auto buf = random_field(m, d, 48, 64);
      auto buf2 = random_field(m, d, 48, 64);
      for (int s = 0; s < 10; ++s) {
        step_periodic(m, {0.7}, buf, {y_mode});
        step_periodic(m, {0.7}, buf2, {y_mode}, {3, nullptr});
      }
      CHECK(max_rel_diff(to_canonical(buf), want) <= 1e-12);
      CHECK(to_canonical(buf).values == to_canonical(buf2).values);
    }
  }
}

TEST_CASE("stale halos are rejected when checks are on") {
  const auto m = builtin_model("d2q9");
  auto buf = random_field(m, {Family::SoA}, 4, 8);
  buf.set_halo_checks(true);
  fill_periodic_halos(buf);
  buf.advance_generation();
  CHECK_THROWS_AS(propagate_region(m, buf, Region::interior(buf.geom())), ContractViolation);
}
