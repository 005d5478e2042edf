#include "lbhx/simulation.hpp"

#include <unistd.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <exception>
#include <thread>

#include "lbhx/error.hpp"
#include "lbhx/lattice_model.hpp"

namespace lbhx {

namespace {

InitSpec init_spec(const SimulationConfig& cfg) {
  InitSpec s;
  s.kind = cfg.init;
  s.seed = cfg.seed;
  s.amplitude = cfg.init == InitKind::TaylorGreen ? 0.01 : 0.05;
  return s;
}

RuntimeOptions runtime_options(const SimulationConfig& cfg) {
  RuntimeOptions o;
  o.watchdog_seconds = cfg.watchdog;
  o.collide.flop_scale = cfg.flop_scale;
  return o;
}

std::string dump_path(const SimulationConfig& cfg, int step) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "_%06d.lbhx", step);
  return cfg.dump_prefix + buf;
}

// Untimed, fixed-count exchange loop run by every rank in lockstep.
double collective_exchange_median(HeteroRuntime& rt, HaloExchanger& ex, int warmup, int repeats) {
  for (int i = 0; i < warmup; ++i) rt.time_exchange(ex);
  std::vector<double> t(repeats);
  for (auto& s : t) s = rt.time_exchange(ex);
  return median(t);
}

struct RankOutput {
  RankRun run;
  CanonicalField merged;
  std::vector<std::vector<double>> gathered;  // rank 0
  std::vector<std::string> dumps;
};

constexpr int kGatherHeader = 3;  // m, bytes_to_left, bytes_to_right

RankOutput rank_main(const SimulationConfig& cfg, Transport& t, std::string& phase) {
  const auto model = builtin_model(cfg.model);
  const auto layouts = decompose_x(cfg.lx, t.size(), cfg.halo);
  const RankLayout lay = layouts.at(t.rank());
  RankOutput out;
  out.run.layout = lay;
  RankHaloExchanger exchanger(t, lay, cfg.watchdog);

  int m = cfg.m.value_or(0);
  if (cfg.autotune) {
    phase = "autotune";
    PeriodicExchanger local;
    auto tune = autotune_slice(cfg, lay.width(), t.size() == 1 ? static_cast<HaloExchanger&>(exchanger) : local);
    if (t.size() > 1) {
      phase = "autotune exchange";
      HeteroRuntime scratch(model, cfg.params(), cfg.policy(), cfg.layout(), {lay.width(), cfg.ly, cfg.halo}, 0,
                            cfg.pools, runtime_options(cfg));
      tune.profile.tau_c = collective_exchange_median(scratch, exchanger, 5, 20);
    }
    m = optimal_m(tune.profile, lay.width(), cfg.ly);
    out.run.tune = std::move(tune);
  }
  out.run.m = m;

  phase = "setup";
  HeteroRuntime rt(model, cfg.params(), cfg.policy(), cfg.layout(), {lay.width(), cfg.ly, cfg.halo}, m, cfg.pools,
                   runtime_options(cfg));
  initialize(rt.host(), model, init_spec(cfg), lay.x_begin, cfg.lx);
  rt.prime();

  int step = 0;
  int last_dump = -1;
  const auto dump = [&] {
    phase = "dump";
    auto merged = gather_field(t, rt.snapshot(), cfg.lx, cfg.watchdog);
    if (t.rank() == 0) {
      const auto path = dump_path(cfg, step);
      write_dump_file(path, merged);
      out.dumps.push_back(path);
    }
    last_dump = step;
  };
  if (cfg.dump_every > 0) dump();

  for (int i = 0; i < cfg.warmup; ++i) {
    phase = "warmup step " + std::to_string(step);
    rt.step(exchanger);
    ++step;
    if (cfg.dump_every > 0 && step % cfg.dump_every == 0) dump();
  }
  t.reset_counters();
  for (int i = 0; i < cfg.iterations; ++i) {
    phase = "step " + std::to_string(step);
    out.run.steps.push_back(rt.step(exchanger));
    ++step;
    if (cfg.dump_every > 0 && step % cfg.dump_every == 0) dump();
  }
  out.run.bytes_to_left = t.bytes_sent(lay.left);
  out.run.bytes_to_right = t.bytes_sent(lay.right);
  if (lay.left == lay.right) {
    // one peer on both sides: split the counter between the two directions
    out.run.bytes_to_left /= 2;
    out.run.bytes_to_right = out.run.bytes_to_left;
  }
  if (cfg.dump_every > 0 && last_dump != step) dump();

  phase = "gather";
  out.merged = gather_field(t, rt.snapshot(), cfg.lx, cfg.watchdog);
  std::vector<double> mine{static_cast<double>(m), static_cast<double>(out.run.bytes_to_left),
                           static_cast<double>(out.run.bytes_to_right)};
  for (const auto& s : out.run.steps) {
    for (double v : {s.t_exe, s.t_acc, s.t_host, s.t_mpi, s.t_swap}) mine.push_back(v);
  }
  out.gathered = gather_values(t, mine, cfg.watchdog);
  phase = "done";
  return out;
}

double cv_of(const std::vector<double>& v) { return coefficient_of_variation(v); }

void assemble(const SimulationConfig& cfg, const std::vector<RankOutput>& outs, SimulationResult& res) {
  const RankOutput& root = outs.front();
  res.final_state = root.merged;
  res.dumps = root.dumps;
  for (const auto& o : outs) res.ranks.push_back(o.run);

  BenchReport rep({"rank", "x_begin", "width", "m", "iterations", "t_exe_us", "t_acc_us", "t_host_us", "t_mpi_us",
                   "t_swap_us", "cv", "mlups", "halo_bytes_per_step"});
  add_standard_meta(rep, "run", cfg);
  const auto layouts = decompose_x(cfg.lx, static_cast<int>(root.gathered.size()), 0);
  const int iters = cfg.iterations;
  std::vector<double> slowest(iters, 0.0);
  std::vector<std::array<double, 5>> slowest_parts(iters, std::array<double, 5>{});
  for (std::size_t r = 0; r < root.gathered.size(); ++r) {
    const auto& g = root.gathered[r];
    std::vector<double> exe;
    std::array<std::vector<double>, 5> parts;
    for (int i = 0; i < iters; ++i) {
      for (int k = 0; k < 5; ++k) parts[k].push_back(g[kGatherHeader + 5 * i + k]);
      exe.push_back(g[kGatherHeader + 5 * i]);
      if (g[kGatherHeader + 5 * i] > slowest[i]) {
        slowest[i] = g[kGatherHeader + 5 * i];
        for (int k = 0; k < 5; ++k) slowest_parts[i][k] = g[kGatherHeader + 5 * i + k];
      }
    }
    res.t_exe.push_back(exe);
    if (iters == 0) continue;
    const double med = median(exe);
    const std::int64_t bytes = iters ? static_cast<std::int64_t>((g[1] + g[2]) / iters) : 0;
    rep.add_row({static_cast<std::int64_t>(r), static_cast<std::int64_t>(layouts[r].x_begin),
                 static_cast<std::int64_t>(layouts[r].width()), static_cast<std::int64_t>(g[0]),
                 static_cast<std::int64_t>(iters), med * 1e6, median(parts[1]) * 1e6, median(parts[2]) * 1e6,
                 median(parts[3]) * 1e6, median(parts[4]) * 1e6, cv_of(exe),
                 mlups(layouts[r].width(), cfg.ly, med), bytes});
  }
  if (iters > 0) {
    res.median_t_exe = median(slowest);
    res.mlups = mlups(cfg.lx, cfg.ly, res.median_t_exe);
    std::array<std::vector<double>, 5> parts;
    for (const auto& s : slowest_parts) {
      for (int k = 0; k < 5; ++k) parts[k].push_back(s[k]);
    }
    rep.add_row({std::string("all"), std::int64_t{0}, static_cast<std::int64_t>(cfg.lx),
                 static_cast<std::int64_t>(root.gathered.front()[0]), static_cast<std::int64_t>(iters),
                 res.median_t_exe * 1e6, median(parts[1]) * 1e6, median(parts[2]) * 1e6, median(parts[3]) * 1e6,
                 median(parts[4]) * 1e6, cv_of(slowest), res.mlups, std::int64_t{0}});
  }
  if (root.run.tune) {
    const auto& p = root.run.tune->profile;
    rep.add_meta("profile.tau_d", format_cell(p.tau_d));
    rep.add_meta("profile.tau_h", format_cell(p.tau_h));
    rep.add_meta("profile.tau_c", format_cell(p.tau_c));
    rep.add_meta("profile.t_swap", format_cell(p.t_swap));
    rep.add_meta("profile.stable", root.run.tune->stable ? "true" : "false");
    rep.add_meta("autotune.m", std::to_string(root.run.m));
  }
  for (const auto& d : res.dumps) rep.add_meta("dump", d);
  res.report = std::move(rep);
}

std::vector<std::unique_ptr<Transport>> make_group(TransportKind kind, int n, double timeout) {
  return kind == TransportKind::Tcp ? TcpTransport::make_local_group(n, timeout) : InMemoryHub::make_group(n);
}

}  // namespace

std::uint64_t estimate_memory_bytes(const SimulationConfig& cfg) {
  const auto model = builtin_model(cfg.model);
  const std::uint64_t per_column = static_cast<std::uint64_t>(cfg.ly) * model.q() * sizeof(double) * 2;
  // host slice plus device bulk per rank, each with 2H halo columns
  const std::uint64_t columns = 2ull * cfg.lx + 4ull * cfg.halo * cfg.ranks;
  return per_column * columns;
}

void check_memory_bytes(std::uint64_t need_bytes, const std::string& what) {
  const long pages = sysconf(_SC_PHYS_PAGES);
  const long page = sysconf(_SC_PAGE_SIZE);
  if (pages <= 0 || page <= 0) return;
  const double have = static_cast<double>(pages) * page;
  const double need = static_cast<double>(need_bytes);
  if (need > 0.8 * have) {
    char msg[256];
    std::snprintf(msg, sizeof(msg),
                  "%s needs about %.1f GiB of population storage; this machine has %.1f GiB. "
                  "Reduce lattice.lx or lattice.ly.",
                  what.c_str(), need / (1u << 30), have / (1u << 30));
    throw ConfigError(msg);
  }
}

void check_memory(const SimulationConfig& cfg) {
  check_memory_bytes(estimate_memory_bytes(cfg), "lattice " + std::to_string(cfg.lx) + "x" + std::to_string(cfg.ly) +
                                                     " (" + cfg.model + ")");
}

AutotuneResult autotune_slice(const SimulationConfig& cfg, int width, HaloExchanger& exchanger,
                              const AutotuneOptions* opts) {
  const auto model = builtin_model(cfg.model);
  const int h = cfg.halo;
  const int tune_m = std::min(h, width / 2);
  const int device_cols = width - 2 * tune_m;
  HeteroRuntime rt(model, cfg.params(), cfg.policy(), cfg.layout(), {width, cfg.ly, h}, tune_m, cfg.pools,
                   runtime_options(cfg));
  initialize(rt.host(), model, {InitKind::Random, cfg.seed, 0.05});
  rt.prime();
  PeriodicExchanger self;
  self.exchange(rt.host());
  AutotuneOptions o = opts ? *opts : AutotuneOptions{};
  if (o.sample_columns.empty()) {
    const int hi = std::min(device_cols, width);
    o.sample_columns = sample_sizes(std::max(1, hi / 4), hi, 4);
  }
  RuntimeTuneRunner runner(rt, exchanger);
  auto r = autotune(runner, o);
  r.profile.meta["lattice"] = std::to_string(width) + "x" + std::to_string(cfg.ly) + " " + cfg.model;
  r.profile.meta["layout"] = cfg.layout().label();
  r.profile.meta["pools"] = "host_workers=" + std::to_string(cfg.pools.host_workers) +
                            " device_workers=" + std::to_string(cfg.pools.device_workers) +
                            " device_throttle=" + format_cell(cfg.pools.device_throttle);
  return r;
}

SimulationResult run_distributed(const SimulationConfig& cfg, int n_ranks, TransportKind kind) {
  SimulationConfig c = cfg;
  c.ranks = n_ranks;
  c.transport = kind;
  c.rank_id = -1;
  c.validate();
  check_memory(c);
  auto group = make_group(kind, n_ranks, c.watchdog);
  std::vector<RankOutput> outs(n_ranks);
  std::vector<std::exception_ptr> errors(n_ranks);
  std::vector<std::string> phases(n_ranks, "start");
  std::vector<std::thread> threads;
  for (int r = 0; r < n_ranks; ++r) {
    threads.emplace_back([&, r] {
      try {
        outs[r] = rank_main(c, *group[r], phases[r]);
      } catch (...) {
        errors[r] = std::current_exception();
      }
    });
  }
  for (auto& th : threads) th.join();
  for (int r = 0; r < n_ranks; ++r) {
    if (!errors[r]) continue;
    try {
      std::rethrow_exception(errors[r]);
    } catch (const ConfigError& e) {
      throw ConfigError("rank " + std::to_string(r) + " (" + phases[r] + "): " + e.what());
    } catch (const TuningError& e) {
      throw TuningError("rank " + std::to_string(r) + " (" + phases[r] + "): " + e.what());
    } catch (const std::exception& e) {
      throw RuntimeFault("rank " + std::to_string(r) + " failed during " + phases[r] + ": " + e.what());
    }
  }
  SimulationResult res;
  assemble(c, outs, res);
  return res;
}

SimulationResult run_simulation(const SimulationConfig& cfg) {
  cfg.validate();
  if (cfg.rank_id < 0) return run_distributed(cfg, cfg.ranks, cfg.transport);

  if (cfg.transport != TransportKind::Tcp) throw ConfigError("ranks.id requires ranks.transport = tcp");
  const auto eps = parse_endpoints(cfg.endpoints);
  TcpTransport t(cfg.rank_id, cfg.ranks);
  if (static_cast<int>(eps.size()) != cfg.ranks) {
    throw ConfigError("ranks.endpoints must list ranks.count endpoints");
  }
  t.listen(eps[cfg.rank_id].host, eps[cfg.rank_id].port);
  t.connect_mesh(eps, cfg.watchdog);
  std::string phase = "start";
  RankOutput out;
  try {
    out = rank_main(cfg, t, phase);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw RuntimeFault("rank " + std::to_string(cfg.rank_id) + " failed during " + phase + ": " + e.what());
  }
  barrier(t, cfg.watchdog);
  SimulationResult res;
  if (cfg.rank_id == 0) {
    assemble(cfg, {out}, res);
  } else {
    res.ranks.push_back(out.run);
  }
  return res;
}

}  // namespace lbhx
