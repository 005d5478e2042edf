#include "lbhx/lattice_model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numbers>
#include <set>
#include <sstream>
#include <utility>

#include "lbhx/error.hpp"

namespace lbhx {

namespace {

// Versioned model table. D2Q37 shell weights solve the Gaussian moment system
// through order 8 (8 shell weights + cs2); generated by tools/gen/d2q37_weights.py
// at 50-digit precision.
constexpr std::string_view kModelTable = R"(# lbhx lattice model table
version 1
model d2q9
cs2 1/3
shell 0 0 4/9
shell 1 0 1/9
shell 1 1 1/36
end
model d2q37
cs2 0.6979533220196830882384091
shell 0 0 0.2331506691323525022865067
shell 1 0 0.1073060915422190024124643
shell 1 1 0.05766785988879488203006922
shell 2 0 0.01420821615845075026469894
shell 2 1 0.005353049000513775232731502
shell 2 2 0.001011937592673575475410909
shell 3 0 0.0002453010277577173454659166
shell 3 1 0.0002834142529941982174005253
end
)";

double parse_number(const std::string& token) {
  const auto slash = token.find('/');
  if (slash != std::string::npos) {
    return std::strtod(token.substr(0, slash).c_str(), nullptr) /
           std::strtod(token.substr(slash + 1).c_str(), nullptr);
  }
  return std::strtod(token.c_str(), nullptr);
}

double angle_of(const Velocity& c) {
  double a = std::atan2(static_cast<double>(c.y), static_cast<double>(c.x));
  if (a < 0.0) a += 2.0 * std::numbers::pi;
  return a;
}

double double_factorial(int n) {
  double r = 1.0;
  for (int k = n; k > 1; k -= 2) r *= k;
  return r;
}

}  // namespace

void ModelParams::validate() const {
  if (dt != 1.0) throw ConfigError("dt is fixed to 1 timestep");
  if (!(tau > 0.5 * dt)) {
    throw ConfigError("relaxation time tau must exceed dt/2 (got " + std::to_string(tau) + ")");
  }
  if (eq_order != 2) throw ConfigError("only the order-2 equilibrium is supported");
}

LatticeModel make_model(std::string name, const std::vector<Shell>& shells, double cs2) {
  struct Entry {
    Velocity c;
    double w;
  };
  std::vector<Entry> entries;
  for (const auto& s : shells) {
    std::set<std::pair<int, int>> members;
    for (int sx : {1, -1}) {
      for (int sy : {1, -1}) {
        members.emplace(sx * s.a, sy * s.b);
        members.emplace(sx * s.b, sy * s.a);
      }
    }
    for (const auto& [x, y] : members) entries.push_back({{x, y}, s.weight});
  }
  std::sort(entries.begin(), entries.end(), [](const Entry& l, const Entry& r) {
    const int nl = l.c.x * l.c.x + l.c.y * l.c.y;
    const int nr = r.c.x * r.c.x + r.c.y * r.c.y;
    if (nl != nr) return nl < nr;
    return angle_of(l.c) < angle_of(r.c);
  });

  LatticeModel m;
  m.name = std::move(name);
  m.cs2 = cs2;
  for (const auto& e : entries) {
    m.velocities.push_back(e.c);
    m.weights.push_back(e.w);
    m.reach = std::max({m.reach, std::abs(e.c.x), std::abs(e.c.y)});
  }
  const int q = m.q();
  m.opposite.assign(q, -1);
  for (int l = 0; l < q; ++l) {
    for (int k = 0; k < q; ++k) {
      if (m.velocities[k] == Velocity{-m.velocities[l].x, -m.velocities[l].y}) m.opposite[l] = k;
    }
    if (m.opposite[l] < 0) throw ConfigError("velocity set of " + m.name + " is not symmetric");
  }
  return m;
}

LatticeModel builtin_model(std::string_view name) {
  std::istringstream in{std::string(kModelTable)};
  std::string line;
  bool active = false;
  double cs2 = 0.0;
  std::vector<Shell> shells;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string key;
    if (!(ls >> key) || key[0] == '#') continue;
    if (key == "model") {
      std::string id;
      ls >> id;
      active = (id == name);
    } else if (!active) {
      continue;
    } else if (key == "cs2") {
      std::string v;
      ls >> v;
      cs2 = parse_number(v);
    } else if (key == "shell") {
      Shell s;
      std::string w;
      ls >> s.a >> s.b >> w;
      s.weight = parse_number(w);
      shells.push_back(s);
    } else if (key == "end") {
      return make_model(std::string(name), shells, cs2);
    }
  }
  throw ConfigError("unknown lattice model '" + std::string(name) + "' (expected d2q9 or d2q37)");
}

bool MomentReport::valid_to(int order, double tol) const {
  if (order >= static_cast<int>(residual.size())) return false;
  for (int k = 0; k <= order; ++k) {
    if (!(residual[k] <= tol)) return false;
  }
  return true;
}

MomentReport validate_moments(const LatticeModel& model, int max_order) {
  if (max_order < 0 || max_order > 4) {
    throw ContractViolation("validate_moments: max_order must be in [0, 4]");
  }
  MomentReport report;
  for (int n = 0; n <= max_order; ++n) {
    double worst = 0.0;
    for (int i = 0; i <= n; ++i) {
      const int j = n - i;
      double sum = 0.0;
      for (int l = 0; l < model.q(); ++l) {
        sum += model.weights[l] * std::pow(model.velocities[l].x, i) * std::pow(model.velocities[l].y, j);
      }
      double target = 0.0;
      if (i % 2 == 0 && j % 2 == 0) {
        target = std::pow(model.cs2, n / 2) * double_factorial(i - 1) * double_factorial(j - 1);
      }
      worst = std::max(worst, std::abs(sum - target));
    }
    report.residual.push_back(worst);
  }
  return report;
}

std::string_view model_table_text() { return kModelTable; }

std::string describe(const LatticeModel& model) {
  std::ostringstream out;
  out.precision(17);
  out << "model " << model.name << "\n"
      << "D " << model.dim << "  Q " << model.q() << "  R " << model.reach << "  cs2 " << model.cs2 << "\n"
      << "#  l    cx  cy  opposite  weight\n";
  for (int l = 0; l < model.q(); ++l) {
    out << "  " << l << (l < 10 ? "  " : " ") << "  " << model.velocities[l].x << "  " << model.velocities[l].y
        << "  " << model.opposite[l] << "  " << model.weights[l] << "\n";
  }
  const auto rep = validate_moments(model, 4);
  out << "# moment residuals (order 0..4):";
  for (double r : rep.residual) out << " " << r;
  out << "\n";
  return out.str();
}

}  // namespace lbhx
