#include <doctest.h>

#include <thread>

#include "lbhx/error.hpp"
#include "lbhx/hetero.hpp"
#include "lbhx/init.hpp"

using namespace lbhx;

namespace {

CanonicalField oracle(const LatticeModel& m, const LayoutDescriptor& d, int lx, int ly, int steps, YBoundary y) {
  FieldBuffer buf(d, {lx, ly, m.reach}, m.q());
  initialize(buf, m, {InitKind::Random, 11, 0.05});
  for (int s = 0; s < steps; ++s) step_periodic(m, {0.8}, buf, {y});
  return to_canonical(buf);
}

CanonicalField hetero_run(const LatticeModel& m, const LayoutDescriptor& d, int lx, int ly, int steps, YBoundary y,
                          int mm, PoolConfig pools = {}, RuntimeOptions opts = {}) {
  HeteroRuntime rt(m, {0.8}, {y}, d, {lx, ly, m.reach}, mm, pools, opts);
  initialize(rt.host(), m, {InitKind::Random, 11, 0.05});
  rt.prime();
  PeriodicExchanger ex;
  for (int s = 0; s < steps; ++s) rt.step(ex);
  return rt.snapshot();
}

}  // namespace

TEST_CASE("make_partition") {
  const auto p = make_partition({100, 8, 3}, 10);
  CHECK(p.left == Region{3, 13, 0, 8});
  CHECK(p.bulk == Region{13, 93, 0, 8});
  CHECK(p.right == Region{93, 103, 0, 8});
  CHECK(p.rank_halo_left == ColumnRange{0, 3});
  CHECK(p.rank_halo_right == ColumnRange{103, 106});
  CHECK(p.host_edge_left == ColumnRange{10, 13});
  CHECK(p.device_edge_left == ColumnRange{13, 16});
  CHECK(p.device_edge_right == ColumnRange{90, 93});
  CHECK(p.host_edge_right == ColumnRange{93, 96});

  const auto z = make_partition({100, 8, 3}, 0);
  CHECK(z.left.empty());
  CHECK(z.right.empty());
  CHECK(z.bulk == Region{3, 103, 0, 8});

  for (int m = 0; m <= 50; ++m) {
    const auto q = make_partition({100, 8, 3}, m);
    CHECK(q.left.columns() + q.bulk.columns() + q.right.columns() == 100);
  }
  CHECK_THROWS_AS(make_partition({100, 8, 3}, 51), ConfigError);
  CHECK_THROWS_AS(make_partition({100, 8, 3}, -1), ConfigError);
}

TEST_CASE("pool config validation") {
  CHECK_NOTHROW(PoolConfig{}.validate());
  CHECK_THROWS_AS((PoolConfig{0, 1, 1.0}.validate()), ConfigError);
  CHECK_THROWS_AS((PoolConfig{1, 1, 0.5}.validate()), ConfigError);
}

TEST_CASE("heterogeneous step equals the single-pool step for every border width") {
  const auto m = builtin_model("d2q37");
  const LayoutDescriptor layouts[] = {{Family::AoS}, {Family::CAoSoA, 4, Clustering::Interleaved}};
  for (const auto& d : layouts) {
    for (auto y : {YBoundary::Periodic, YBoundary::WallBounceBack}) {
      const auto want = oracle(m, d, 16, 16, 4, y);
      for (int mm : {0, 1, 2, 3, 4, 7, 8}) {
        CAPTURE(mm);
        CHECK(hetero_run(m, d, 16, 16, 4, y, mm).values == want.values);
      }
    }
  }
  const auto m9 = builtin_model("d2q9");
  const auto want = oracle(m9, {Family::SoA}, 24, 16, 6, YBoundary::Periodic);
  CHECK(hetero_run(m9, {Family::SoA}, 24, 16, 6, YBoundary::Periodic, 5, {2, 2, 2.0}).values == want.values);
}

TEST_CASE("changing M mid-run keeps the state") {
  const auto m = builtin_model("d2q9");
  const auto want = oracle(m, {Family::SoA}, 20, 8, 6, YBoundary::Periodic);
  HeteroRuntime rt(m, {0.8}, {}, {Family::SoA}, {20, 8, 1}, 0, {});
  initialize(rt.host(), m, {InitKind::Random, 11, 0.05});
  rt.prime();
  PeriodicExchanger ex;
  for (int mm : {0, 4, 10, 1, 7, 3}) {
    rt.set_m(mm);
    rt.step(ex);
  }
  CHECK(rt.snapshot().values == want.values);
}

TEST_CASE("halo swap is idempotent and skipping it diverges") {
  const auto m = builtin_model("d2q9");
  HeteroRuntime rt(m, {0.8}, {}, {Family::SoA}, {24, 8, 1}, 5, {});
  initialize(rt.host(), m, {InitKind::Random, 3, 0.05});
  rt.prime();
  PeriodicExchanger ex;
  rt.step(ex);
  auto& host = rt.host();
  auto dev = *rt.device();
  halo_swap_device_host(rt.plan(), host, dev);
  const auto once_host = to_canonical(host);
  const auto once_dev = to_canonical(dev);
  halo_swap_device_host(rt.plan(), host, dev);
  CHECK(to_canonical(host).values == once_host.values);
  CHECK(to_canonical(dev).values == once_dev.values);
  // device halo column mirrors the host border edge column
  for (int p = 0; p < 9; ++p) {
    for (int y = 0; y < 8; ++y) CHECK(dev.at(Role::Prv, p, 0, y) == host.at(Role::Prv, p, 5, y));
  }

  const auto want = oracle(m, {Family::SoA}, 24, 8, 3, YBoundary::Periodic);
  RuntimeOptions bad;
  bad.inject = Fault::SkipHaloSwap;
  CHECK(hetero_run(m, {Family::SoA}, 24, 8, 3, YBoundary::Periodic, 5, {}, bad).values != want.values);
}

TEST_CASE("device queue runs tasks in order and reports stalls") {
  DeviceQueue q(1, 1.0);
  std::vector<int> order;
  for (int i = 0; i < 5; ++i) q.enqueue("t", [&order, i](const Exec&) { order.push_back(i); });
  q.drain(5.0);
  CHECK(order == std::vector<int>{0, 1, 2, 3, 4});

  q.enqueue("stuck collide", [](const Exec&) { std::this_thread::sleep_for(std::chrono::milliseconds(300)); });
  try {
    q.drain(0.02);
    FAIL("expected a watchdog fault");
  } catch (const RuntimeFault& e) {
    CHECK(std::string(e.what()).find("stuck collide") != std::string::npos);
  }
  q.drain(5.0);

  q.enqueue("boom", [](const Exec&) { throw ConfigError("bad"); });
  CHECK_THROWS_AS(q.drain(5.0), ConfigError);
}

TEST_CASE("throttle stretches device tasks") {
  const auto m = builtin_model("d2q37");
  PoolConfig slow{1, 1, 4.0};
  HeteroRuntime fast_rt(m, {0.8}, {}, {Family::SoA}, {32, 64, 3}, 3, {});
  HeteroRuntime slow_rt(m, {0.8}, {}, {Family::SoA}, {32, 64, 3}, 3, slow);
  for (auto* rt : {&fast_rt, &slow_rt}) {
    initialize(rt->host(), m, {InitKind::Random, 1, 0.05});
    rt->prime();
  }
  double fast = 1e9;
  double slow_t = 1e9;
  for (int i = 0; i < 3; ++i) {
    fast = std::min(fast, fast_rt.time_device_columns(20));
    slow_t = std::min(slow_t, slow_rt.time_device_columns(20));
  }
  CHECK(slow_t > 2.5 * fast);
}
