#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>

#include "lbhx/config.hpp"
#include "lbhx/dump.hpp"
#include "lbhx/error.hpp"
#include "lbhx/experiments.hpp"
#include "lbhx/lattice_model.hpp"
#include "lbhx/perf_model.hpp"
#include "lbhx/simulation.hpp"
#include "lbhx/validation.hpp"

namespace lbhx {

namespace {

void emit(const BenchReport& r, const std::string& path, std::ostream& out) {
  if (path.empty()) {
    out << r.to_csv();
  } else {
    write_report(r, path);
  }
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    if (ch == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else if (ch != ' ') {
      cur += ch;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

std::vector<int> int_list(const std::string& s, const char* what) {
  std::vector<int> out;
  for (const auto& item : split_list(s)) {
    try {
      std::size_t used = 0;
      out.push_back(std::stoi(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError(std::string(what) + ": '" + item + "' is not an integer");
    }
  }
  return out;
}

struct PredictArgs {
  std::string profile;
  std::string sample;
  bool list = false;
  int step = 1;
  std::string dat_prefix;
  std::map<std::string, double> set;
  std::map<std::string, double> scale;
};

BenchReport predict_report(const SimulationConfig& cfg, const PredictArgs& a) {
  PerfProfile base;
  std::string source;
  if (!a.profile.empty()) {
    base = load_profile_file(a.profile);
    source = a.profile;
  } else {
    const std::string name = a.sample.empty() ? "hsw-k80" : a.sample;
    const auto reg = sample_registry();
    const auto it = std::find_if(reg.begin(), reg.end(), [&](const NamedProfile& p) { return p.name == name; });
    if (it == reg.end()) throw ConfigError("unknown sample profile '" + name + "' (see predict --list)");
    base = it->profile;
    source = "sample " + name;
  }
  ProfileOverride o;
  const std::pair<const char*, std::optional<double> ProfileOverride::*> fields[] = {
      {"tau_d", &ProfileOverride::tau_d},
      {"tau_h", &ProfileOverride::tau_h},
      {"tau_c", &ProfileOverride::tau_c},
      {"t_swap", &ProfileOverride::t_swap}};
  const double PerfProfile::*values[] = {&PerfProfile::tau_d, &PerfProfile::tau_h, &PerfProfile::tau_c,
                                         &PerfProfile::t_swap};
  for (int i = 0; i < 4; ++i) {
    const auto& [name, member] = fields[i];
    if (auto it = a.set.find(name); it != a.set.end()) o.*member = it->second;
    if (auto it = a.scale.find(name); it != a.scale.end()) o.*member = (o.*member).value_or(base.*values[i]) * it->second;
  }

  BenchReport r({"curve", "m", "m_frac", "t_acc_us", "t_host_us", "t_mpi_us", "t_swap_us", "t_exe_us", "mlups"});
  r.add_meta("experiment", "predict");
  r.add_meta("profile", source);
  r.add_meta("lattice", std::to_string(cfg.lx) + "x" + std::to_string(cfg.ly));
  std::vector<std::pair<std::string, std::vector<Prediction>>> curves;
  curves.emplace_back("base", sweep(base, cfg.lx, cfg.ly, a.step));
  r.add_meta("base.m_star", std::to_string(optimal_m(base, cfg.lx, cfg.ly)));
  if (!o.empty()) {
    const auto changed = apply_override(base, o);
    curves.emplace_back("whatif", sweep(changed, cfg.lx, cfg.ly, a.step));
    r.add_meta("whatif.m_star", std::to_string(optimal_m(changed, cfg.lx, cfg.ly)));
  }
  for (const auto& [name, preds] : curves) {
    std::ofstream dat;
    if (!a.dat_prefix.empty()) {
      const auto path = a.dat_prefix + "_" + name + ".dat";
      dat.open(path);
      if (!dat) throw RuntimeFault("cannot write '" + path + "'");
      dat << "# m_frac mlups (" << name << ")\n" << std::setprecision(17);
      r.add_meta("dat." + name, path);
    }
    for (const auto& p : preds) {
      const double frac = 2.0 * p.m / cfg.lx;
      r.add_row({name, static_cast<std::int64_t>(p.m), frac, p.t_acc * 1e6, p.t_host * 1e6, p.t_mpi * 1e6,
                 p.t_swap * 1e6, p.t_exe * 1e6, p.mlups});
      if (dat) dat << frac << " " << p.mlups << "\n";
    }
  }
  return r;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"lbhx: heterogeneous lattice Boltzmann benchmark harness"};
  app.fallthrough();
  app.require_subcommand(1);

  std::string config_file;
  app.add_option("--config", config_file, "flat key = value configuration file");
  std::map<std::string, std::string> flag_values;
  std::vector<std::pair<std::string, CLI::Option*>> flag_opts;
  for (const auto& k : config_keys()) {
    flag_opts.emplace_back(k.name, app.add_option("--" + k.name, flag_values[k.name], k.help));
  }
  std::string out_path;
  app.add_option("--out", out_path, "write the report here instead of stdout");

  auto* bench = app.add_subcommand("bench", "time propagate/collide per layout");
  std::string kernels = "propagate,collide";
  std::string layouts = "aos,soa,csoa,caosoa";
  std::string pool = "host";
  int bench_iters = 10;
  int bench_warmup = 2;
  bench->add_option("--kernels", kernels, "comma list of propagate, collide, step")->capture_default_str();
  bench->add_option("--layouts", layouts, "comma list of layouts")->capture_default_str();
  bench->add_option("--pool", pool, "host or device")->capture_default_str();
  bench->add_option("--iters", bench_iters, "measured iterations per cell")->capture_default_str();
  bench->add_option("--warmup", bench_warmup, "untimed iterations per cell")->capture_default_str();

  SweepOptions sweep_opts;
  std::string m_list;
  auto* sb = app.add_subcommand("sweep-balance", "measured vs predicted MLUPS over the border width");
  sb->add_option("--step", sweep_opts.frac_step, "grid step in 2M/LX")->capture_default_str();
  sb->add_option("--m", m_list, "explicit comma list of border widths");
  sb->add_option("--iters", sweep_opts.iters, "measured steps per point")->capture_default_str();
  sb->add_option("--warmup", sweep_opts.warmup, "untimed steps per point")->capture_default_str();

  std::string vl_list = "4,8,16,32,64";
  auto* sv = app.add_subcommand("sweep-vl", "best-M MLUPS per cluster width");
  sv->add_option("--vls", vl_list, "comma list of VL values")->capture_default_str();
  sv->add_option("--step", sweep_opts.frac_step, "grid step in 2M/LX")->capture_default_str();
  sv->add_option("--iters", sweep_opts.iters, "measured steps per point")->capture_default_str();
  sv->add_option("--warmup", sweep_opts.warmup, "untimed steps per point")->capture_default_str();

  std::string rank_list = "1,2,4";
  auto* sc = app.add_subcommand("scale", "v1 (M=0) vs v2 (autotuned M) over rank counts");
  sc->add_option("--rank-list", rank_list, "comma list of rank counts")->capture_default_str();

  bool quick = false;
  std::string inject = "none";
  auto* val = app.add_subcommand("validate", "run the self-check suite");
  val->add_flag("--quick", quick, "sub-second subset");
  val->add_option("--inject", inject, "fault to inject: none or skip-halo-swap")->capture_default_str();

  PredictArgs pa;
  auto* pr = app.add_subcommand("predict", "model sweep from a profile, with what-if overrides");
  pr->add_option("--profile", pa.profile, "profile file (key = value)");
  pr->add_option("--sample", pa.sample, "built-in sample profile name");
  pr->add_flag("--list", pa.list, "list the sample profiles");
  pr->add_option("--m-step", pa.step, "border width step")->capture_default_str();
  pr->add_option("--dat-prefix", pa.dat_prefix, "write <prefix>_<curve>.dat gnuplot files");
  for (const char* f : {"tau_d", "tau_h", "tau_c", "t_swap"}) {
    std::string dash = f;
    std::replace(dash.begin(), dash.end(), '_', '-');
    pr->add_option_function<double>(
        "--" + dash, [&pa, f](double v) { pa.set[f] = v; }, std::string("replace ") + f + " (seconds)");
    pr->add_option_function<double>(
        "--scale-" + dash, [&pa, f](double v) { pa.scale[f] = v; }, std::string("multiply ") + f);
  }

  std::string profile_out;
  int tune_repeats = 20;
  int tune_warmup = 5;
  auto* at = app.add_subcommand("autotune", "measure a performance profile on this machine");
  at->add_option("--profile-out", profile_out, "save the profile file here");
  at->add_option("--repeats", tune_repeats, "timed repeats per sample")->capture_default_str();
  at->add_option("--warmup", tune_warmup, "untimed repeats per sample")->capture_default_str();

  auto* model_cmd = app.add_subcommand("model", "lattice model tables");
  model_cmd->require_subcommand(1);
  std::string model_name;
  auto* show = model_cmd->add_subcommand("show", "print velocities, weights and moment residuals");
  show->add_option("name", model_name, "d2q9 or d2q37 (default: the configured model)");

  auto* dump_cmd = app.add_subcommand("dump", "run the configured simulation and dump the final lattice");
  std::string dump_path;
  dump_cmd->add_option("file", dump_path, "output .lbhx file")->required();

  auto* load_cmd = app.add_subcommand("load", "summarise a dump, optionally comparing it with another");
  std::string load_path;
  std::string compare_path;
  load_cmd->add_option("file", load_path, ".lbhx file")->required();
  load_cmd->add_option("--compare", compare_path, "second dump; exit 3 unless bit-identical");

  auto* run_cmd = app.add_subcommand("run", "run the configured simulation and report timings");

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    SimulationConfig cfg;
    if (!config_file.empty()) apply_config_file(cfg, config_file);
    apply_env_overrides(cfg);
    for (const auto& [key, opt] : flag_opts) {
      if (opt->count() > 0) set_config_value(cfg, key, flag_values[key]);
    }

    if (*bench) {
      BenchOptions o;
      o.kernels.clear();
      for (const auto& k : split_list(kernels)) o.kernels.push_back(parse_kernel(k));
      o.layouts.clear();
      for (const auto& l : split_list(layouts)) o.layouts.push_back(parse_family(l));
      o.pool = parse_pool(pool);
      o.iters = bench_iters;
      o.warmup = bench_warmup;
      emit(bench_kernels(cfg, o), out_path, out);
    } else if (*sb) {
      sweep_opts.m_values = int_list(m_list, "--m");
      emit(sweep_balance(cfg, sweep_opts), out_path, out);
    } else if (*sv) {
      emit(sweep_vl(cfg, int_list(vl_list, "--vls"), sweep_opts), out_path, out);
    } else if (*sc) {
      emit(scale(cfg, int_list(rank_list, "--rank-list")), out_path, out);
    } else if (*val) {
      ValidationOptions o;
      o.quick = quick;
      o.seed = cfg.seed;
      if (inject == "skip-halo-swap") {
        o.inject = Fault::SkipHaloSwap;
      } else if (inject != "none") {
        throw ConfigError("unknown fault '" + inject + "' (expected none or skip-halo-swap)");
      }
      const auto results = run_validation(o);
      emit(validation_report(results), out_path, out);
      bool ok = true;
      for (const auto& r : results) {
        err << (r.pass ? "PASS " : "FAIL ") << r.name << (r.detail.empty() ? "" : ": " + r.detail) << "\n";
        ok = ok && r.pass;
      }
      return ok ? kExitOk : kExitValidation;
    } else if (*pr) {
      if (pa.list) {
        for (const auto& p : sample_registry()) out << p.name << "  " << p.profile.meta.at("device") << "\n";
        return kExitOk;
      }
      emit(predict_report(cfg, pa), out_path, out);
    } else if (*at) {
      cfg.validate();
      check_memory(cfg);
      AutotuneOptions o;
      o.repeats = tune_repeats;
      o.warmup = tune_warmup;
      PeriodicExchanger ex;
      const auto r = autotune_slice(cfg, cfg.lx, ex, &o);
      std::ostringstream text;
      text << format_profile(r.profile);
      text << "# m_star = " << optimal_m(r.profile, cfg.lx, cfg.ly) << " for " << cfg.lx << "x" << cfg.ly << "\n";
      for (const auto& s : r.host) text << "# host columns=" << s.columns << " median=" << s.median << " cv=" << s.cv << "\n";
      for (const auto& s : r.device) {
        text << "# device columns=" << s.columns << " median=" << s.median << " cv=" << s.cv << "\n";
      }
      if (!r.stable) err << "warning: some samples exceeded the CV limit; profile marked unstable\n";
      if (!profile_out.empty()) save_profile_file(profile_out, r.profile);
      out << text.str();
    } else if (*model_cmd) {
      const auto m = builtin_model(model_name.empty() ? cfg.model : model_name);
      out << describe(m);
    } else if (*dump_cmd) {
      SimulationConfig c = cfg;
      c.dump_every = 0;
      const auto res = run_simulation(c);
      if (!res.final_state.values.empty()) write_dump_file(dump_path, res.final_state);
      emit(res.report, out_path, out);
    } else if (*load_cmd) {
      const auto a = read_dump_file(load_path);
      double mass = 0.0;
      for (double v : a.values) mass += v;
      out << "lattice " << a.lx << "x" << a.ly << " q=" << a.q << " layout " << a.desc.label() << "\n"
          << "total population " << std::setprecision(17) << mass << "\n";
      if (!compare_path.empty()) {
        const auto b = read_dump_file(compare_path);
        if (a.lx != b.lx || a.ly != b.ly || a.q != b.q) {
          err << "dimensions differ\n";
          return kExitValidation;
        }
        double worst = 0.0;
        for (std::size_t i = 0; i < a.values.size(); ++i) worst = std::max(worst, std::abs(a.values[i] - b.values[i]));
        out << "max abs difference " << worst << "\n";
        if (a.values != b.values) return kExitValidation;
      }
    } else if (*run_cmd) {
      const auto res = run_simulation(cfg);
      if (cfg.rank_id <= 0) emit(res.report, out_path, out);
    }
    return kExitOk;
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ParseError& e) {
    err << "parse error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "runtime fault: " << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace lbhx
