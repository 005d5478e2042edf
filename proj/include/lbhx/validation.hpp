#pragma once

#include <string>
#include <vector>

#include "lbhx/hetero.hpp"
#include "lbhx/report.hpp"

namespace lbhx {

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
  double seconds = 0.0;
};

struct ValidationOptions {
  bool quick = false;  ///< small lattices, no Taylor-Green, no tcp
  Fault inject = Fault::None;
  std::uint64_t seed = 1;
};

/// Runs every self-check; failures are reported, not thrown.
std::vector<CheckResult> run_validation(const ValidationOptions& opts);

/// name, pass, seconds, detail rows.
BenchReport validation_report(const std::vector<CheckResult>& results);

struct TaylorGreenFit {
  double nu_fit = 0.0;
  double nu_theory = 0.0;  ///< cs2 (tau - 1/2)
  double rel_error = 0.0;
  std::vector<double> times;
  std::vector<double> amplitudes;
};

/// Decays a Taylor-Green vortex on an n x n periodic lattice and fits the
/// viscosity from ln A(t) = ln A0 - nu (kx^2 + ky^2) t, where A is the
/// projection of ux onto -cos(kx x) sin(ky y).
TaylorGreenFit taylor_green_viscosity(const std::string& model, int n, double tau, int steps, int sample_every = 10,
                                      double amplitude = 0.01);

}  // namespace lbhx
