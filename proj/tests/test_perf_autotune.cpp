#include <doctest.h>

#include <cmath>
#include <random>

#include "lbhx/autotune.hpp"
#include "lbhx/error.hpp"
#include "lbhx/perf_model.hpp"
#include "synthetic_runner.hpp"

using namespace lbhx;
using lbhx::testing::SyntheticRunner;

namespace {

int brute_force_m(const PerfProfile& p, int lx, int ly) {
  int best = 0;
  double best_t = predict(p, lx, ly, 0).t_exe;
  for (int m = 1; 2 * m <= lx; ++m) {
    const double t = predict(p, lx, ly, m).t_exe;
    if (t < best_t) {
      best = m;
      best_t = t;
    }
  }
  return best;
}

PerfProfile make(double tau_d, double tau_h, double tau_c, double t_swap) {
  PerfProfile p;
  p.tau_d = tau_d;
  p.tau_h = tau_h;
  p.tau_c = tau_c;
  p.t_swap = t_swap;
  return p;
}

}  // namespace

TEST_CASE("predict evaluates the model") {
  const auto p = make(1e-9, 3e-9, 2e-4, 5e-5);
  const auto r = predict(p, 1000, 1000, 100);
  CHECK(r.t_acc == doctest::Approx(8e-4).epsilon(1e-14));
  CHECK(r.t_host == doctest::Approx(6e-4).epsilon(1e-14));
  CHECK(r.t_host + r.t_mpi == doctest::Approx(8e-4).epsilon(1e-14));
  CHECK(r.t_exe == doctest::Approx(8.5e-4).epsilon(1e-14));
  CHECK(r.mlups == doctest::Approx(1000.0 * 1000 / (r.t_exe * 1e6)));

  const auto z = predict(p, 1000, 1000, 0);
  CHECK(z.t_host == 0.0);
  CHECK(z.t_exe == doctest::Approx(1000.0 * 1000 * 1e-9 + 5e-5));
  CHECK_THROWS_AS(predict(p, 1000, 1000, 501), ContractViolation);
  CHECK_THROWS_AS(predict(p, 1000, 1000, -1), ContractViolation);
}

TEST_CASE("predict is monotone in every parameter") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.1, 10.0);
  for (int i = 0; i < 200; ++i) {
    const auto p = make(u(rng) * 1e-9, u(rng) * 1e-9, u(rng) * 1e-5, u(rng) * 1e-5);
    const int m = static_cast<int>(u(rng) * 40);
    const double base = predict(p, 800, 256, m).t_exe;
    for (double PerfProfile::*f : {&PerfProfile::tau_d, &PerfProfile::tau_h, &PerfProfile::tau_c,
                                   &PerfProfile::t_swap}) {
      auto q = p;
      q.*f *= 1.5;
      CHECK(predict(q, 800, 256, m).t_exe >= base);
    }
  }
}

TEST_CASE("optimal_m matches exhaustive search") {
  CHECK(optimal_m(make(1, 4, 0, 0), 1000, 8192) == 100);
  CHECK(optimal_m(make(1, 1, 0, 0), 1000, 8192) == 250);
  CHECK(optimal_m(make(1, 1, 1000.0 * 8192, 0), 1000, 8192) == 0);

  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.05, 20.0);
  for (int i = 0; i < 300; ++i) {
    const int lx = 8 + static_cast<int>(u(rng) * 50);
    const int ly = 64;
    const auto p = make(u(rng) * 1e-9, u(rng) * 1e-9, u(rng) * 1e-7 * lx, u(rng) * 1e-6);
    CHECK(optimal_m(p, lx, ly) == brute_force_m(p, lx, ly));
  }

  // balance condition at the continuous optimum
  const auto p = make(2e-9, 5e-9, 3e-5, 0);
  const double m0 = balance_point(p, 2160, 8192);
  const auto r = predict(p, 2160, 8192, m0);
  CHECK(std::abs(r.t_acc - (r.t_host + r.t_mpi)) < 1e-15);
}

TEST_CASE("what-if overrides") {
  const auto p = make(2e-9, 8e-9, 1e-5, 2e-6);
  const auto base = sweep(p, 200, 64, 10);
  CHECK(base.size() == 11u);
  CHECK(base.back().m == 100.0);
  CHECK(sweep(p, 201, 64, 7).back().m == 100.0);

  const auto same = whatif(p, {}, 200, 64, 10);
  for (std::size_t i = 0; i < base.size(); ++i) CHECK(same[i].t_exe == base[i].t_exe);

  ProfileOverride faster;
  faster.tau_h = 0.5 * p.tau_h;
  const auto w = whatif(p, faster, 200, 64, 10);
  CHECK(w.front().t_exe == base.front().t_exe);
  CHECK(optimal_m(apply_override(p, faster), 200, 64) >= optimal_m(p, 200, 64));
  ProfileOverride slower;
  slower.tau_h = 0.8 * p.tau_h;
  CHECK(whatif(p, slower, 200, 64, 10).front().t_exe == base.front().t_exe);

  ProfileOverride negative;
  negative.tau_c = -1.0;
  CHECK_THROWS_AS(apply_override(p, negative), ConfigError);
  CHECK_THROWS_AS(sweep(p, 200, 64, 0), ConfigError);
}

TEST_CASE("mlups") {
  CHECK(mlups(1000, 1000, 1.0) == 1.0);
  CHECK(mlups(2160, 8192, 0.166) == doctest::Approx(106.6).epsilon(1e-3));
  CHECK(mlups(2160, 8192, 0.078) == doctest::Approx(226.9).epsilon(1e-3));
  CHECK_THROWS_AS(mlups(1, 1, 0.0), ContractViolation);
}

TEST_CASE("profile text round-trips and reports bad lines") {
  auto p = make(1.25e-9, 3.5e-9, 1e-4, 2e-5);
  p.meta["machine"] = "test box";
  const auto q = parse_profile(format_profile(p));
  CHECK(q.tau_d == p.tau_d);
  CHECK(q.tau_h == p.tau_h);
  CHECK(q.tau_c == p.tau_c);
  CHECK(q.t_swap == p.t_swap);
  CHECK(q.meta.at("machine") == "test box");

  try {
    parse_profile("tau_d = 1e-9\ntau_h 2e-9\n");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_profile("tau_d = 1e-9\ntau_h = 1e-9\ntau_c = 0\n"), ParseError);
  CHECK_THROWS_AS(parse_profile("tau_d = 0\ntau_h = 1e-9\ntau_c = 0\nt_swap = 0\n"), ParseError);
  CHECK_THROWS_AS(parse_profile("tau_d = x\ntau_h = 1e-9\ntau_c = 0\nt_swap = 0\n"), ParseError);
  CHECK_THROWS_AS(load_profile_file("/nonexistent/profile.txt"), ConfigError);

  for (const auto& s : sample_registry()) {
    CHECK_NOTHROW(s.profile.validate());
    CHECK(s.profile.tau_d < s.profile.tau_h);
  }
}

TEST_CASE("autotune recovers a synthetic profile") {
  const auto truth = make(2e-9, 8e-9, 1e-4, 3e-5);
  AutotuneOptions o;
  o.sample_columns = {64, 128, 256, 512};

  SyntheticRunner exact(truth, 8192);
  const auto r = autotune(exact, o);
  CHECK(r.profile.tau_d == doctest::Approx(truth.tau_d).epsilon(1e-9));
  CHECK(r.profile.tau_h == doctest::Approx(truth.tau_h).epsilon(1e-9));
  CHECK(r.profile.tau_c == doctest::Approx(truth.tau_c).epsilon(1e-12));
  CHECK(r.profile.t_swap == doctest::Approx(truth.t_swap).epsilon(1e-12));
  CHECK(r.stable);

  SyntheticRunner noisy(truth, 8192, 0.02, 9);
  const auto n = autotune(noisy, o);
  for (auto [got, want] : {std::pair{n.profile.tau_d, truth.tau_d}, std::pair{n.profile.tau_h, truth.tau_h},
                           std::pair{n.profile.tau_c, truth.tau_c}, std::pair{n.profile.t_swap, truth.t_swap}}) {
    CHECK(std::abs(got - want) / want < 0.05);
  }
  // the optimum is flat: the noisy choice of M costs little under the truth
  const double chosen = predict(truth, 2160, 8192, optimal_m(n.profile, 2160, 8192)).t_exe;
  const double best = predict(truth, 2160, 8192, optimal_m(truth, 2160, 8192)).t_exe;
  CHECK(chosen / best - 1.0 < 0.01);
}

TEST_CASE("autotune sampling follows the options") {
  const auto truth = make(1e-9, 2e-9, 1e-5, 1e-6);
  AutotuneOptions o;
  o.sample_columns = {8, 16, 32};
  o.warmup = 5;
  o.repeats = 20;
  o.transfer_repeats = 20;
  int hooks = 0;
  o.between_blocks = [&] { ++hooks; };
  SyntheticRunner r(truth, 64);
  const auto res = autotune(r, o);
  CHECK(hooks == 20 / kAutotuneBlock);
  // per pool: warmup per size, one warm run per block, repeats per size;
  // transfers: warmup + repeats each
  const int per_pool = 5 * 3 + 20 / kAutotuneBlock + 20 * 3;
  CHECK(r.calls == 2 * per_pool + 2 * (5 + 20));
  CHECK(res.host.size() == 3u);
  CHECK(res.device.front().sites == 8.0 * 64);
}

TEST_CASE("autotune flags noise and rejects degenerate input") {
  const auto truth = make(1e-9, 2e-9, 1e-5, 1e-6);
  AutotuneOptions o;
  o.sample_columns = {8, 16, 32};
  SyntheticRunner loud(truth, 64, 0.3, 4);
  const auto res = autotune(loud, o);
  CHECK_FALSE(res.stable);
  CHECK(res.profile.meta.at("stable") == "false");

  SyntheticRunner r(truth, 64);
  o.sample_columns = {};
  CHECK_THROWS_AS(autotune(r, o), TuningError);
  o.sample_columns = {0, 8, 16};
  CHECK_THROWS_AS(autotune(r, o), TuningError);
  o.sample_columns = {8, 8, 16};
  CHECK_THROWS_AS(autotune(r, o), TuningError);

  struct Flat : SyntheticRunner {
    using SyntheticRunner::SyntheticRunner;
    double run_host(int) override { return 1e-3; }
  } flat(truth, 64);
  o.sample_columns = {8, 16, 32};
  CHECK_THROWS_AS(autotune(flat, o), TuningError);
}

TEST_CASE("median and coefficient of variation") {
  CHECK(median({3.0, 1.0, 2.0}) == 2.0);
  CHECK(median({4.0, 1.0, 2.0, 3.0}) == 2.5);
  CHECK(coefficient_of_variation({2.0, 2.0, 2.0}) == 0.0);
  CHECK(coefficient_of_variation({1.0, 3.0}) == doctest::Approx(std::sqrt(2.0) / 2.0));
}
