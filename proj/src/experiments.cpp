#include "lbhx/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <set>

#include "lbhx/error.hpp"
#include "lbhx/init.hpp"
#include "lbhx/lattice_model.hpp"
#include "lbhx/simulation.hpp"

namespace lbhx {

Kernel parse_kernel(std::string_view s) {
  if (s == "propagate") return Kernel::Propagate;
  if (s == "collide") return Kernel::Collide;
  if (s == "step") return Kernel::Step;
  throw ConfigError("unknown kernel '" + std::string(s) + "' (expected propagate, collide or step)");
}

std::string_view to_string(Kernel k) {
  switch (k) {
    case Kernel::Propagate: return "propagate";
    case Kernel::Collide: return "collide";
    case Kernel::Step: return "step";
  }
  return "?";
}

Pool parse_pool(std::string_view s) {
  if (s == "host") return Pool::Host;
  if (s == "device") return Pool::Device;
  throw ConfigError("unknown pool '" + std::string(s) + "' (expected host or device)");
}

std::string_view to_string(Pool p) { return p == Pool::Host ? "host" : "device"; }

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

RuntimeOptions runtime_options(const SimulationConfig& cfg) {
  RuntimeOptions o;
  o.watchdog_seconds = cfg.watchdog;
  o.collide.flop_scale = cfg.flop_scale;
  return o;
}

void add_profile_meta(BenchReport& r, const AutotuneResult& tune) {
  const auto& p = tune.profile;
  r.add_meta("profile.tau_d", format_cell(p.tau_d));
  r.add_meta("profile.tau_h", format_cell(p.tau_h));
  r.add_meta("profile.tau_c", format_cell(p.tau_c));
  r.add_meta("profile.t_swap", format_cell(p.t_swap));
  r.add_meta("profile.stable", tune.stable ? "true" : "false");
}

}  // namespace

BenchReport bench_kernels(const SimulationConfig& cfg, const BenchOptions& opts) {
  if (opts.iters < 1) throw ConfigError("bench needs at least one measured iteration (--iters >= 1)");
  if (opts.warmup < 0) throw ConfigError("bench warmup must be >= 0");
  if (opts.kernels.empty() || opts.layouts.empty()) throw ConfigError("bench needs at least one kernel and layout");
  std::vector<LayoutDescriptor> descs;
  for (Family f : opts.layouts) {
    LayoutDescriptor d{f, cfg.vl, cfg.clustering};
    d.validate();
    if (cfg.ly % d.width() != 0) {
      throw ConfigError("lattice.ly=" + std::to_string(cfg.ly) + " is not a multiple of vl=" + std::to_string(d.width()) +
                        " for layout " + std::string(to_string(f)));
    }
    descs.push_back(d);
  }
  cfg.params().validate();
  cfg.pools.validate();
  const auto model = builtin_model(cfg.model);
  const Geometry geom{cfg.lx, cfg.ly, std::max(cfg.halo, model.reach)};
  check_memory_bytes(geom.sites() * model.q() * sizeof(double) * 2,
                     "lattice " + std::to_string(cfg.lx) + "x" + std::to_string(cfg.ly) + " (" + cfg.model + ")");
  const Region interior = Region::interior(geom);
  CollideOptions collide;
  collide.flop_scale = cfg.flop_scale;

  BenchReport rep({"kernel", "layout", "vl", "lx", "ly", "pool", "t_ms", "cv", "mlups"});
  add_standard_meta(rep, "bench", cfg);
  rep.add_meta("bench.iters", std::to_string(opts.iters));
  rep.add_meta("bench.warmup", std::to_string(opts.warmup));

  std::unique_ptr<DeviceQueue> queue;
  if (opts.pool == Pool::Device) queue = std::make_unique<DeviceQueue>(cfg.pools.device_workers, cfg.pools.device_throttle);
  const int host_threads = cfg.pools.host_workers;

  for (const auto& desc : descs) {
    FieldBuffer buf(desc, geom, model.q());
    initialize(buf, model, {InitKind::Random, cfg.seed, 0.05});
    fill_periodic_halos(buf);
    // nxt needs a physical state before collide is timed on its own
    propagate_region(model, buf, interior);

    for (Kernel k : opts.kernels) {
      const auto body = [&](const Exec& e) {
        switch (k) {
          case Kernel::Propagate: propagate_region(model, buf, interior, e); break;
          case Kernel::Collide: collide_region(model, cfg.params(), buf, interior, e, collide); break;
          case Kernel::Step: step_periodic(model, cfg.params(), buf, cfg.policy(), e, collide); break;
        }
      };
      const auto once = [&]() -> double {
        if (queue) {
          queue->enqueue(std::string(to_string(k)), body);
          return queue->drain(cfg.watchdog);
        }
        const auto t0 = Clock::now();
        body(Exec{host_threads, nullptr});
        return seconds_since(t0);
      };
      std::vector<double> t;
      double cv = 0.0;
      for (int attempt = 0; attempt < opts.max_attempts; ++attempt) {
        for (int i = 0; i < opts.warmup; ++i) once();
        t.assign(opts.iters, 0.0);
        for (auto& s : t) s = once();
        cv = coefficient_of_variation(t);
        if (cv <= opts.max_cv) break;
      }
      const double med = median(t);
      rep.add_row({std::string(to_string(k)), std::string(to_string(desc.family)), std::int64_t{desc.width()},
                   std::int64_t{cfg.lx}, std::int64_t{cfg.ly}, std::string(to_string(opts.pool)), med * 1e3, cv,
                   mlups(cfg.lx, cfg.ly, med)});
      if (cv > opts.max_cv) rep.add_meta("unstable", std::string(to_string(k)) + "/" + std::string(to_string(desc.family)));
    }
  }
  return rep;
}

std::vector<int> balance_grid(int lx, double frac_step) {
  if (!(frac_step > 0.0) || frac_step > 1.0) throw ConfigError("balance grid step must be in (0, 1]");
  std::set<int> ms;
  const int n = static_cast<int>(std::floor(1.0 / frac_step + 1e-9));
  for (int i = 0; i <= n; ++i) ms.insert(static_cast<int>(std::lround(i * frac_step * lx / 2.0)));
  ms.insert(lx / 2);
  std::vector<int> out(ms.begin(), ms.end());
  std::erase_if(out, [lx](int m) { return 2 * m > lx; });
  return out;
}

struct BalanceMeter::State {
  SimulationConfig cfg;
  LatticeModel model;
  std::vector<int> ms;
  int warmup;
  bool first = true;
  std::unique_ptr<HeteroRuntime> rt;
  PeriodicExchanger ex;
  std::vector<std::vector<double>> t;
};

BalanceMeter::BalanceMeter(const SimulationConfig& cfg, std::vector<int> m_values, int warmup)
    : s_(std::make_unique<State>()) {
  if (m_values.empty()) throw ConfigError("no border widths to measure");
  s_->cfg = cfg;
  s_->model = builtin_model(cfg.model);
  s_->ms = std::move(m_values);
  s_->warmup = warmup;
  const Geometry geom{cfg.lx, cfg.ly, std::max(cfg.halo, s_->model.reach)};
  for (int m : s_->ms) make_partition(geom, m);
  s_->rt = std::make_unique<HeteroRuntime>(s_->model, cfg.params(), cfg.policy(), cfg.layout(), geom, s_->ms.front(),
                                           cfg.pools, runtime_options(cfg));
  initialize(s_->rt->host(), s_->model, {InitKind::Random, cfg.seed, 0.05});
  s_->rt->prime();
  s_->t.resize(s_->ms.size());
}

BalanceMeter::~BalanceMeter() = default;

void BalanceMeter::block(int steps) {
  auto& st = *s_;
  for (std::size_t k = 0; k < st.ms.size(); ++k) {
    st.rt->set_m(st.ms[k]);
    for (int i = 0; i < (st.first ? st.warmup : 1); ++i) st.rt->step(st.ex);
    for (int i = 0; i < steps; ++i) st.t[k].push_back(st.rt->step(st.ex).t_exe);
  }
  st.first = false;
}

int BalanceMeter::steps_per_point() const { return static_cast<int>(s_->t.front().size()); }

std::vector<Measurement> BalanceMeter::results() const {
  std::vector<Measurement> out;
  for (std::size_t k = 0; k < s_->ms.size(); ++k) {
    out.push_back({s_->ms[k], median(s_->t[k]), coefficient_of_variation(s_->t[k])});
  }
  return out;
}

std::vector<Measurement> measure_balance(const SimulationConfig& cfg, const std::vector<int>& m_values, int warmup,
                                         int iters) {
  if (iters < 1) throw ConfigError("need at least one measured iteration");
  BalanceMeter meter(cfg, m_values, warmup);
  constexpr int kBlock = 5;
  while (meter.steps_per_point() < iters) meter.block(std::min(kBlock, iters - meter.steps_per_point()));
  return meter.results();
}

BenchReport sweep_balance(const SimulationConfig& cfg, const SweepOptions& opts) {
  cfg.validate();
  if (cfg.ranks != 1) throw ConfigError("sweep-balance runs a single rank (ranks.count = 1)");
  check_memory(cfg);
  const std::vector<int> ms = opts.m_values.empty() ? balance_grid(cfg.lx, opts.frac_step) : opts.m_values;

  if (opts.iters < 1) throw ConfigError("need at least one measured iteration");
  BalanceMeter meter(cfg, ms, opts.warmup);
  AutotuneOptions tune_opts = opts.tune;
  const int blocks = std::max(1, (tune_opts.repeats + kAutotuneBlock - 1) / kAutotuneBlock);
  const int per_block = std::max(1, (opts.iters + blocks - 1) / blocks);
  // keeps sampling through autotune retries so both sets span the same time
  tune_opts.between_blocks = [&] { meter.block(per_block); };
  PeriodicExchanger ex;
  const auto tune = autotune_slice(cfg, cfg.lx, ex, &tune_opts);
  while (meter.steps_per_point() < opts.iters) meter.block(std::min(per_block, opts.iters - meter.steps_per_point()));
  const auto meas = meter.results();
  const int m_star = optimal_m(tune.profile, cfg.lx, cfg.ly);

  BenchReport rep({"m", "m_frac", "mlups_meas", "mlups_pred", "t_meas_us", "t_pred_us"});
  add_standard_meta(rep, "sweep-balance", cfg);
  add_profile_meta(rep, tune);
  rep.add_meta("m_star", std::to_string(m_star));
  rep.add_meta("m_star_frac", format_cell(2.0 * m_star / cfg.lx));
  const Measurement* best = &meas.front();
  for (const auto& x : meas) {
    const auto p = predict(tune.profile, cfg.lx, cfg.ly, x.m);
    rep.add_row({std::int64_t{x.m}, 2.0 * x.m / cfg.lx, mlups(cfg.lx, cfg.ly, x.t_exe), p.mlups, x.t_exe * 1e6,
                 p.t_exe * 1e6});
    if (x.t_exe < best->t_exe) best = &x;
  }
  double worst_cv = 0.0;
  for (const auto& x : meas) worst_cv = std::max(worst_cv, x.cv);
  rep.add_meta("meas_max_cv", format_cell(worst_cv));
  rep.add_meta("meas_stable", worst_cv <= opts.tune.max_cv ? "true" : "false");
  rep.add_meta("measured_best_m", std::to_string(best->m));
  rep.add_meta("measured_best_m_frac", format_cell(2.0 * best->m / cfg.lx));
  return rep;
}

BenchReport sweep_vl(const SimulationConfig& cfg, const std::vector<int>& vls, const SweepOptions& opts) {
  if (vls.empty()) throw ConfigError("sweep-vl needs at least one VL");
  std::vector<SimulationConfig> cfgs;
  for (int vl : vls) {
    SimulationConfig c = cfg;
    c.vl = vl;
    c.validate();
    cfgs.push_back(c);
  }
  check_memory(cfg);
  const std::vector<int> ms = opts.m_values.empty() ? balance_grid(cfg.lx, opts.frac_step) : opts.m_values;

  BenchReport rep({"vl", "best_m_frac", "mlups"});
  add_standard_meta(rep, "sweep-vl", cfg);
  int best_vl = 0;
  double best_mlups = -1.0;
  for (const auto& c : cfgs) {
    const auto meas = measure_balance(c, ms, opts.warmup, opts.iters);
    const auto it = std::min_element(meas.begin(), meas.end(),
                                      [](const Measurement& a, const Measurement& b) { return a.t_exe < b.t_exe; });
    const double rate = mlups(c.lx, c.ly, it->t_exe);
    rep.add_row({std::int64_t{c.vl}, 2.0 * it->m / c.lx, rate});
    if (rate > best_mlups) {
      best_mlups = rate;
      best_vl = c.vl;
    }
  }
  rep.add_meta("best_vl", std::to_string(best_vl));
  return rep;
}

BenchReport scale(const SimulationConfig& cfg, const std::vector<int>& rank_counts) {
  if (rank_counts.empty()) throw ConfigError("scale needs at least one rank count");
  BenchReport rep({"ranks", "mode", "mlups", "speedup"});
  add_standard_meta(rep, "scale", cfg);
  std::optional<CanonicalField> first;
  bool identical = true;
  for (const char* mode : {"v1", "v2"}) {
    double base = 0.0;
    for (int n : rank_counts) {
      SimulationConfig c = cfg;
      c.dump_every = 0;
      if (std::string_view(mode) == "v1") {
        c.m = 0;
        c.autotune = false;
      } else {
        c.m.reset();
        c.autotune = true;
      }
      const auto res = run_distributed(c, n, cfg.transport);
      if (base == 0.0) base = res.mlups;
      rep.add_row({std::int64_t{n}, std::string(mode), res.mlups, base > 0.0 ? res.mlups / base : 0.0});
      if (!first) {
        first = res.final_state;
      } else if (!(res.final_state.values == first->values)) {
        identical = false;
      }
    }
  }
  rep.add_meta("dumps_identical", identical ? "true" : "false");
  return rep;
}

}  // namespace lbhx
