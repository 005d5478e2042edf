#include "lbhx/perf_model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "lbhx/error.hpp"

namespace lbhx {

void PerfProfile::validate() const {
  if (!(tau_d > 0.0) || !(tau_h > 0.0)) throw ConfigError("profile needs tau_d > 0 and tau_h > 0");
  if (!(tau_c >= 0.0) || !(t_swap >= 0.0)) throw ConfigError("profile needs tau_c >= 0 and t_swap >= 0");
}

Prediction predict(const PerfProfile& profile, int lx, int ly, double m) {
  if (m < 0.0 || 2.0 * m > lx) throw ContractViolation("predict: border width must satisfy 0 <= 2M <= LX");
  Prediction p;
  p.m = m;
  p.t_acc = (lx - 2.0 * m) * ly * profile.tau_d;
  p.t_host = 2.0 * m * ly * profile.tau_h;
  p.t_mpi = profile.tau_c;
  p.t_swap = profile.t_swap;
  p.t_exe = std::max(p.t_acc, p.t_host + p.t_mpi) + p.t_swap;
  p.mlups = p.t_exe > 0.0 ? mlups(lx, ly, p.t_exe) : 0.0;
  return p;
}

double balance_point(const PerfProfile& profile, int lx, int ly) {
  return (static_cast<double>(lx) * ly * profile.tau_d - profile.tau_c) /
         (2.0 * ly * (profile.tau_d + profile.tau_h));
}

int optimal_m(const PerfProfile& profile, int lx, int ly) {
  const int m_max = lx / 2;
  const double m0 = std::clamp(balance_point(profile, lx, ly), 0.0, static_cast<double>(m_max));
  std::vector<int> candidates{static_cast<int>(std::floor(m0)), static_cast<int>(std::ceil(m0)), 0, m_max};
  std::sort(candidates.begin(), candidates.end());
  int best = candidates.front();
  double best_t = predict(profile, lx, ly, best).t_exe;
  for (int c : candidates) {
    c = std::clamp(c, 0, m_max);
    const double t = predict(profile, lx, ly, c).t_exe;
    if (t < best_t) {
      best = c;
      best_t = t;
    }
  }
  return best;
}

double mlups(double lx, double ly, double seconds_per_iteration) {
  if (!(seconds_per_iteration > 0.0)) throw ContractViolation("mlups: time must be positive");
  return lx * ly / (seconds_per_iteration * 1e6);
}

PerfProfile apply_override(const PerfProfile& profile, const ProfileOverride& o) {
  PerfProfile p = profile;
  if (o.tau_d) p.tau_d = *o.tau_d;
  if (o.tau_h) p.tau_h = *o.tau_h;
  if (o.tau_c) p.tau_c = *o.tau_c;
  if (o.t_swap) p.t_swap = *o.t_swap;
  for (double v : {p.tau_d, p.tau_h, p.tau_c, p.t_swap}) {
    if (v < 0.0) throw ConfigError("profile overrides must be non-negative");
  }
  return p;
}

std::vector<Prediction> sweep(const PerfProfile& profile, int lx, int ly, int step) {
  if (step < 1) throw ConfigError("sweep step must be >= 1");
  std::vector<Prediction> out;
  const int m_max = lx / 2;
  for (int m = 0; m <= m_max; m += step) out.push_back(predict(profile, lx, ly, m));
  if (m_max % step != 0) out.push_back(predict(profile, lx, ly, m_max));
  return out;
}

std::vector<Prediction> whatif(const PerfProfile& profile, const ProfileOverride& o, int lx, int ly, int step) {
  return sweep(apply_override(profile, o), lx, ly, step);
}

std::string format_profile(const PerfProfile& profile) {
  std::ostringstream out;
  out.precision(17);
  out << "# lbhx performance profile (seconds)\n"
      << "tau_d = " << profile.tau_d << "\n"
      << "tau_h = " << profile.tau_h << "\n"
      << "tau_c = " << profile.tau_c << "\n"
      << "t_swap = " << profile.t_swap << "\n";
  for (const auto& [k, v] : profile.meta) out << k << " = " << v << "\n";
  return out.str();
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace

PerfProfile parse_profile(std::string_view text) {
  PerfProfile p;
  bool seen[4] = {false, false, false, false};
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ParseError("profile line " + std::to_string(lineno) + ": expected 'key = value', got '" + t + "'");
    }
    const std::string key = trim(std::string_view(t).substr(0, eq));
    const std::string value = trim(std::string_view(t).substr(eq + 1));
    if (key.empty()) throw ParseError("profile line " + std::to_string(lineno) + ": empty key");
    static const char* const numeric[] = {"tau_d", "tau_h", "tau_c", "t_swap"};
    double* targets[] = {&p.tau_d, &p.tau_h, &p.tau_c, &p.t_swap};
    bool handled = false;
    for (int i = 0; i < 4; ++i) {
      if (key != numeric[i]) continue;
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
      if (ec != std::errc() || ptr != value.data() + value.size() || !std::isfinite(v) || v < 0.0) {
        throw ParseError("profile line " + std::to_string(lineno) + ": '" + key +
                         "' needs a non-negative number, got '" + value + "'");
      }
      *targets[i] = v;
      seen[i] = true;
      handled = true;
    }
    if (!handled) p.meta[key] = value;
  }
  static const char* const names[] = {"tau_d", "tau_h", "tau_c", "t_swap"};
  for (int i = 0; i < 4; ++i) {
    if (!seen[i]) throw ParseError(std::string("profile is missing required key '") + names[i] + "'");
  }
  try {
    p.validate();
  } catch (const ConfigError& e) {
    throw ParseError(std::string("profile: ") + e.what());
  }
  return p;
}

PerfProfile load_profile_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open profile '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_profile(ss.str());
}

void save_profile_file(const std::string& path, const PerfProfile& profile) {
  std::ofstream out(path);
  if (!out) throw RuntimeFault("cannot write profile '" + path + "'");
  out << format_profile(profile);
}

std::vector<NamedProfile> sample_registry() {
  // D2Q37, double precision: propagate and collide each stream 37 * 8 bytes
  // in and out per site, so about 1184 bytes of memory traffic per update.
  constexpr double kBytesPerSite = 1184.0;
  // Halo swap over a 16-lane PCIe link at 8 GB/s: 2 sides x 2 directions x
  // 3 columns x 8192 rows x 37 populations x 8 bytes.
  constexpr double kSwapBytes = 4.0 * 3 * 8192 * 37 * 8;
  constexpr double kPcie = 8e9;
  struct Row {
    const char* name;
    const char* device;
    double device_bw;
  };
  const Row rows[] = {
      {"hsw-k80", "Tesla K80 (2 x 240 GB/s)", 480e9},
      {"hsw-knc", "Xeon Phi 7120P (352 GB/s)", 352e9},
      {"hsw-hawaii", "FirePro W9100 (320 GB/s)", 320e9},
  };
  constexpr double kHostBw = 59e9;  // Xeon E5-2630 v3
  std::vector<NamedProfile> out;
  for (const auto& r : rows) {
    PerfProfile p;
    p.tau_d = kBytesPerSite / r.device_bw;
    p.tau_h = kBytesPerSite / kHostBw;
    p.tau_c = 0.0;
    p.t_swap = kSwapBytes / kPcie;
    p.meta["source"] = "illustrative: peak memory bandwidth, not measured";
    p.meta["host"] = "Xeon E5-2630 v3 (59 GB/s)";
    p.meta["device"] = r.device;
    p.meta["lattice"] = "2160x8192 d2q37";
    out.push_back({r.name, p});
  }
  return out;
}

}  // namespace lbhx
