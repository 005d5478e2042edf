#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "lbhx/error.hpp"
#include "lbhx/experiments.hpp"
#include "lbhx/report.hpp"

using namespace lbhx;

namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

// A lattice small enough for sub-second runs.
std::vector<std::string> small(std::vector<std::string> args) {
  for (const char* a : {"--lattice.lx", "24", "--lattice.ly", "16", "--model", "d2q9", "--run.iterations", "2"}) {
    args.emplace_back(a);
  }
  return args;
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("lbhx_cli_" + name)).string();
}

}  // namespace

TEST_CASE("cli usage errors") {
  CHECK(cli({"--help"}).code == kExitOk);
  CHECK(cli({}).code == kExitConfig);
  CHECK(cli({"frobnicate"}).code == kExitConfig);
  CHECK(cli({"run", "--lattice.nope", "3"}).code == kExitConfig);
  CHECK(cli({"run", "--config", "/nonexistent/lbhx.cfg"}).code == kExitConfig);
  CHECK(cli({"run", "--tau", "0.5"}).code == kExitConfig);
  const auto big = cli({"run", "--lattice.lx", "200000", "--lattice.ly", "200000"});
  CHECK(big.code == kExitConfig);
  CHECK(big.err.find("GiB") != std::string::npos);
}

TEST_CASE("cli bench") {
  CHECK(cli(small({"bench", "--iters", "0"})).code == kExitConfig);
  CHECK(cli(small({"bench", "--layouts", "csoa", "--vl", "1"})).code == kExitConfig);
  CHECK(cli(small({"bench", "--kernels", "stream"})).code == kExitConfig);
  const auto r = cli(small({"bench", "--iters", "2", "--warmup", "1", "--vl", "4"}));
  REQUIRE(r.code == kExitOk);
  const auto rep = BenchReport::parse_csv(r.out);
  CHECK(rep.columns == std::vector<std::string>{"kernel", "layout", "vl", "lx", "ly", "pool", "t_ms", "cv", "mlups"});
  CHECK(rep.rows.size() == 8u);
  for (std::size_t i = 0; i < rep.rows.size(); ++i) CHECK(rep.number(i, "mlups") > 0.0);
}

TEST_CASE("cli predict") {
  const auto base = cli({"predict", "--lattice.lx", "200", "--lattice.ly", "64", "--scale-tau-h", "0.8"});
  REQUIRE(base.code == kExitOk);
  const auto rep = BenchReport::parse_csv(base.out);
  std::vector<double> b, w;
  for (std::size_t i = 0; i < rep.rows.size(); ++i) {
    (std::get<std::string>(rep.at(i, "curve")) == "base" ? b : w).push_back(rep.number(i, "t_exe_us"));
  }
  REQUIRE(b.size() == 101u);
  REQUIRE(w.size() == 101u);
  CHECK(w.front() == b.front());

  // unimodal sample curve with an interior maximum
  std::vector<double> mlups;
  for (std::size_t i = 0; i < rep.rows.size(); ++i) {
    if (std::get<std::string>(rep.at(i, "curve")) == "base") mlups.push_back(rep.number(i, "mlups"));
  }
  const auto peak = std::max_element(mlups.begin(), mlups.end()) - mlups.begin();
  CHECK(peak > 0);
  CHECK(peak < static_cast<long>(mlups.size()) - 1);
  for (long i = 1; i <= peak; ++i) CHECK(mlups[i] >= mlups[i - 1]);
  for (long i = peak + 1; i < static_cast<long>(mlups.size()); ++i) CHECK(mlups[i] <= mlups[i - 1]);

  const auto profile = temp_path("bad.profile");
  std::ofstream(profile) << "# header\ntau_d = 1e-9\ntau_h: 2e-9\n";
  const auto bad = cli({"predict", "--profile", profile});
  CHECK(bad.code == kExitConfig);
  CHECK(bad.err.find("line 3") != std::string::npos);
  std::remove(profile.c_str());

  const auto prefix = temp_path("dat");
  CHECK(cli({"predict", "--lattice.lx", "40", "--lattice.ly", "8", "--tau-c", "0", "--dat-prefix", prefix}).code ==
        kExitOk);
  std::ifstream dat(prefix + "_whatif.dat");
  std::string first;
  std::getline(dat, first);
  CHECK(first.rfind("#", 0) == 0);
  double frac = -1, value = -1;
  dat >> frac >> value;
  CHECK(frac == 0.0);
  CHECK(value > 0.0);
  std::remove((prefix + "_base.dat").c_str());
  std::remove((prefix + "_whatif.dat").c_str());

  CHECK(cli({"predict", "--sample", "nope"}).code == kExitConfig);
  CHECK(cli({"predict", "--list"}).out.find("hsw-k80") != std::string::npos);
}

TEST_CASE("cli validate") {
  const auto ok = cli({"validate", "--quick"});
  CHECK(ok.code == kExitOk);
  CHECK(ok.err.find("FAIL") == std::string::npos);
  const auto broken = cli({"validate", "--quick", "--inject", "skip-halo-swap"});
  CHECK(broken.code == kExitValidation);
  CHECK(broken.err.find("FAIL heterogeneous") != std::string::npos);
  CHECK(cli({"validate", "--quick", "--inject", "gremlins"}).code == kExitConfig);
}

TEST_CASE("cli model show") {
  const auto r = cli({"model", "show", "d2q37"});
  CHECK(r.code == kExitOk);
  CHECK(r.out.find("Q 37") != std::string::npos);
  CHECK(r.out.find("moment residuals") != std::string::npos);
  CHECK(cli({"model", "show", "d3q27"}).code == kExitConfig);
}

TEST_CASE("cli dump and load") {
  const auto a = temp_path("a.lbhx");
  const auto b = temp_path("b.lbhx");
  const auto c = temp_path("c.lbhx");
  REQUIRE(cli(small({"dump", a})).code == kExitOk);
  REQUIRE(cli(small({"dump", b, "--layout", "soa", "--ranks.count", "2"})).code == kExitOk);
  REQUIRE(cli(small({"dump", c, "--run.seed", "2"})).code == kExitOk);
  const auto same = cli({"load", a, "--compare", b});
  CHECK(same.code == kExitOk);
  CHECK(same.out.find("max abs difference 0") != std::string::npos);
  CHECK(cli({"load", a, "--compare", c}).code == kExitValidation);
  CHECK(cli({"load", "/nonexistent.lbhx"}).code == kExitConfig);
  for (const auto& p : {a, b, c}) std::remove(p.c_str());
}

TEST_CASE("cli run writes the report file") {
  const auto path = temp_path("run.csv");
  REQUIRE(cli(small({"run", "--out", path, "--hetero.m", "3"})).code == kExitOk);
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  const auto rep = BenchReport::parse_csv(ss.str());
  CHECK(rep.rows.size() == 2u);
  REQUIRE(rep.find_meta("config.hetero.m") != nullptr);
  CHECK(*rep.find_meta("config.hetero.m") == "3");
  std::remove(path.c_str());
}

TEST_CASE("experiment helpers") {
  CHECK(balance_grid(100, 0.25) == std::vector<int>{0, 13, 25, 38, 50});
  CHECK(balance_grid(10, 0.05).back() == 5);
  CHECK_THROWS_AS(balance_grid(10, 0.0), ConfigError);

  SimulationConfig cfg;
  cfg.lx = 24;
  cfg.ly = 16;
  cfg.model = "d2q9";
  cfg.family = Family::CSoA;
  SweepOptions o;
  o.iters = 1;
  o.warmup = 0;
  CHECK_THROWS_AS(sweep_vl(cfg, {1}, o), ConfigError);
  CHECK_THROWS_AS(sweep_vl(cfg, {3}, o), ConfigError);
  CHECK_THROWS_AS(sweep_vl(cfg, {}, o), ConfigError);
  CHECK(parse_kernel("collide") == Kernel::Collide);
  CHECK(parse_pool("device") == Pool::Device);
  CHECK_THROWS_AS(parse_pool("gpu"), ConfigError);

  const auto meas = measure_balance(cfg, {0, 3, 6}, 1, 2);
  REQUIRE(meas.size() == 3u);
  for (const auto& m : meas) CHECK(m.t_exe > 0.0);
}
