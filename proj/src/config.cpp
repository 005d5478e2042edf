#include "lbhx/config.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "lbhx/error.hpp"
#include "lbhx/lattice_model.hpp"

namespace lbhx {

std::string_view to_string(TransportKind k) { return k == TransportKind::Tcp ? "tcp" : "in_memory"; }

TransportKind parse_transport(std::string_view s) {
  if (s == "in_memory" || s == "in-memory" || s == "memory") return TransportKind::InMemory;
  if (s == "tcp") return TransportKind::Tcp;
  throw ConfigError("unknown transport '" + std::string(s) + "' (expected in_memory or tcp)");
}

std::string_view to_string(YBoundary y) { return y == YBoundary::Periodic ? "periodic" : "wall"; }

YBoundary parse_y_boundary(std::string_view s) {
  if (s == "periodic") return YBoundary::Periodic;
  if (s == "wall" || s == "wall_bounce_back" || s == "bounce-back") return YBoundary::WallBounceBack;
  throw ConfigError("unknown bc.y '" + std::string(s) + "' (expected periodic or wall)");
}

void SimulationConfig::validate() const {
  if (lx <= 0 || ly <= 0) throw ConfigError("lattice.lx and lattice.ly must be positive");
  const auto mdl = builtin_model(model);
  layout().validate();
  if (layout().clustered() && ly % vl != 0) {
    throw ConfigError("lattice.ly=" + std::to_string(ly) + " is not a multiple of vl=" + std::to_string(vl));
  }
  params().validate();
  pools.validate();
  if (m && autotune) throw ConfigError("hetero.m and hetero.autotune are mutually exclusive; set only one");
  if (m && *m < 0) throw ConfigError("hetero.m must be >= 0");
  if (iterations < 0 || warmup < 0 || dump_every < 0) {
    throw ConfigError("run.iterations, run.warmup and run.dump_every must be >= 0");
  }
  if (flop_scale < 1) throw ConfigError("flop_scale must be >= 1");
  if (!(watchdog > 0.0)) throw ConfigError("watchdog must be positive");
  if (ranks < 1) throw ConfigError("ranks.count must be >= 1");
  if (rank_id >= ranks) throw ConfigError("ranks.id must be below ranks.count");
  if (halo < mdl.reach) {
    throw ConfigError("lattice.halo=" + std::to_string(halo) + " is below the reach of " + model + " (" +
                      std::to_string(mdl.reach) + ")");
  }
  const int width = lx / ranks;
  if (width < 2 * halo) {
    throw ConfigError("slices of " + std::to_string(width) + " columns are thinner than 2H=" +
                      std::to_string(2 * halo));
  }
  if (m && 2 * *m > width) {
    throw ConfigError("hetero.m=" + std::to_string(*m) + " exceeds half the narrowest slice (" +
                      std::to_string(width) + " columns)");
  }
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <typename T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError("'" + key + "' expects a number, got '" + v + "'");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("'" + key + "' expects true or false, got '" + v + "'");
}

std::string fmt(double v) {
  std::ostringstream o;
  o.precision(17);
  o << v;
  return o.str();
}

template <typename T>
ConfigKey int_key(std::string name, std::string help, T SimulationConfig::*field) {
  return {name, std::move(help),
          [name, field](SimulationConfig& c, const std::string& v) { c.*field = parse_number<T>(name, v); },
          [field](const SimulationConfig& c) { return std::to_string(c.*field); }};
}

ConfigKey double_key(std::string name, std::string help, double SimulationConfig::*field) {
  return {name, std::move(help),
          [name, field](SimulationConfig& c, const std::string& v) { c.*field = parse_number<double>(name, v); },
          [field](const SimulationConfig& c) { return fmt(c.*field); }};
}

std::vector<ConfigKey> build_keys() {
  using C = SimulationConfig;
  std::vector<ConfigKey> k;
  k.push_back(int_key("lattice.lx", "global lattice columns", &C::lx));
  k.push_back(int_key("lattice.ly", "lattice rows", &C::ly));
  k.push_back(int_key("lattice.halo", "halo columns per side (>= model reach)", &C::halo));
  k.push_back({"model", "velocity set: d2q9 or d2q37",
               [](C& c, const std::string& v) {
                 builtin_model(v);
                 c.model = v;
               },
               [](const C& c) { return c.model; }});
  k.push_back({"layout", "aos, soa, csoa or caosoa",
               [](C& c, const std::string& v) { c.family = parse_family(v); },
               [](const C& c) { return std::string(to_string(c.family)); }});
  k.push_back(int_key("vl", "cluster size of the clustered layouts", &C::vl));
  k.push_back({"clustering", "interleaved or consecutive",
               [](C& c, const std::string& v) { c.clustering = parse_clustering(v); },
               [](const C& c) { return std::string(to_string(c.clustering)); }});
  k.push_back(double_key("tau", "BGK relaxation time (> 0.5)", &C::tau));
  k.push_back({"bc.y", "periodic or wall (bounce-back)",
               [](C& c, const std::string& v) { c.y_mode = parse_y_boundary(v); },
               [](const C& c) { return std::string(to_string(c.y_mode)); }});
  k.push_back({"hetero.m", "border width M (columns per side)",
               [](C& c, const std::string& v) { c.m = parse_number<int>("hetero.m", v); },
               [](const C& c) { return c.m ? std::to_string(*c.m) : std::string("unset"); }});
  k.push_back({"hetero.autotune", "pick M from an autotuned profile",
               [](C& c, const std::string& v) { c.autotune = parse_bool("hetero.autotune", v); },
               [](const C& c) { return std::string(c.autotune ? "true" : "false"); }});
  k.push_back({"pool.host_workers", "threads of the host pool",
               [](C& c, const std::string& v) { c.pools.host_workers = parse_number<int>("pool.host_workers", v); },
               [](const C& c) { return std::to_string(c.pools.host_workers); }});
  k.push_back({"pool.device_workers", "threads of the emulated accelerator pool",
               [](C& c, const std::string& v) {
                 c.pools.device_workers = parse_number<int>("pool.device_workers", v);
               },
               [](const C& c) { return std::to_string(c.pools.device_workers); }});
  k.push_back({"pool.device_throttle", "accelerator slowdown factor (>= 1)",
               [](C& c, const std::string& v) {
                 c.pools.device_throttle = parse_number<double>("pool.device_throttle", v);
               },
               [](const C& c) { return fmt(c.pools.device_throttle); }});
  k.push_back(int_key("run.iterations", "measured timesteps", &C::iterations));
  k.push_back(int_key("run.warmup", "untimed timesteps before the measured ones", &C::warmup));
  k.push_back(int_key("run.dump_every", "write a lattice dump every N steps (0: never)", &C::dump_every));
  k.push_back({"run.dump_prefix", "path prefix of lattice dumps",
               [](C& c, const std::string& v) { c.dump_prefix = v; }, [](const C& c) { return c.dump_prefix; }});
  k.push_back(int_key("run.seed", "seed of the initial state", &C::seed));
  k.push_back({"init", "initial state: random, rest or taylor-green",
               [](C& c, const std::string& v) { c.init = parse_init(v); },
               [](const C& c) { return std::string(to_string(c.init)); }});
  k.push_back(int_key("flop_scale", "equilibrium evaluations per site in collide", &C::flop_scale));
  k.push_back(double_key("watchdog", "seconds before a stalled device queue is a fault", &C::watchdog));
  k.push_back(int_key("ranks.count", "number of X slices", &C::ranks));
  k.push_back({"ranks.transport", "in_memory or tcp",
               [](C& c, const std::string& v) { c.transport = parse_transport(v); },
               [](const C& c) { return std::string(to_string(c.transport)); }});
  k.push_back({"ranks.endpoints", "host:port of every rank (multi-process tcp)",
               [](C& c, const std::string& v) { c.endpoints = v; }, [](const C& c) { return c.endpoints; }});
  k.push_back(int_key("ranks.id", "rank of this process (multi-process tcp)", &C::rank_id));
  return k;
}

}  // namespace

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = build_keys();
  return keys;
}

void set_config_value(SimulationConfig& cfg, std::string_view key, std::string_view value) {
  for (const auto& k : config_keys()) {
    if (k.name == key) {
      k.set(cfg, trim(value));
      return;
    }
  }
  throw ConfigError("unknown configuration key '" + std::string(key) + "'");
}

std::vector<std::pair<std::string, std::string>> parse_key_values(std::string_view text, std::string_view source) {
  std::vector<std::pair<std::string, std::string>> out;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    const std::string where = std::string(source) + " line " + std::to_string(lineno);
    if (eq == std::string::npos) throw ParseError(where + ": expected 'key = value', got '" + t + "'");
    std::string key = trim(std::string_view(t).substr(0, eq));
    if (key.empty()) throw ParseError(where + ": empty key");
    out.emplace_back(std::move(key), trim(std::string_view(t).substr(eq + 1)));
  }
  return out;
}

void apply_config_text(SimulationConfig& cfg, std::string_view text, std::string_view source) {
  for (const auto& [k, v] : parse_key_values(text, source)) set_config_value(cfg, k, v);
}

void apply_config_file(SimulationConfig& cfg, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  apply_config_text(cfg, ss.str(), path);
}

void apply_env_overrides(SimulationConfig& cfg, const std::function<const char*(const char*)>& getenv_fn) {
  const auto get = [&](const char* name) -> const char* {
    return getenv_fn ? getenv_fn(name) : std::getenv(name);
  };
  const std::pair<const char*, const char*> vars[] = {
      {"LBHX_HOST_WORKERS", "pool.host_workers"},
      {"LBHX_DEVICE_WORKERS", "pool.device_workers"},
      {"LBHX_DEVICE_THROTTLE", "pool.device_throttle"},
  };
  for (const auto& [env, key] : vars) {
    if (const char* v = get(env); v && *v) {
      try {
        set_config_value(cfg, key, v);
      } catch (const ConfigError& e) {
        throw ConfigError(std::string(env) + ": " + e.what());
      }
    }
  }
}

std::vector<std::pair<std::string, std::string>> config_echo(const SimulationConfig& cfg) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& k : config_keys()) out.emplace_back(k.name, k.get(cfg));
  return out;
}

}  // namespace lbhx
