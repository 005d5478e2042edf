// Serial reference kernels vs the OpenMP kernels, per layout.
//
//   lbhx_bench --benchmark_filter='collide/.*caosoa'

#include <benchmark/benchmark.h>
#include <omp.h>

#include <string>

#include "lbhx/init.hpp"
#include "lbhx/kernels.hpp"

using namespace lbhx;

namespace {

constexpr int kLx = 128;
constexpr int kLy = 256;

const LayoutDescriptor kLayouts[] = {
    {Family::AoS, 1, Clustering::Interleaved},
    {Family::SoA, 1, Clustering::Interleaved},
    {Family::CSoA, 8, Clustering::Interleaved},
    {Family::CAoSoA, 8, Clustering::Interleaved},
};

enum class Op { Propagate, Collide, Step };

struct Case {
  LatticeModel model;
  ModelParams params;
  FieldBuffer buf;

  Case(const std::string& name, LayoutDescriptor d)
      : model(builtin_model(name)), buf(d, {kLx, kLy, model.reach}, model.q()) {
    params.tau = 0.8;
    initialize(buf, model, {InitKind::Random, 3, 0.05});
    fill_periodic_halos(buf);
    buf.set_halo_checks(false);
  }
};

void run(benchmark::State& state, const std::string& model, LayoutDescriptor d, Op op, bool omp) {
  Case c(model, d);
  const Region all = Region::interior(c.buf.geom());
  const Exec exec{omp_get_max_threads()};
  const BoundaryPolicy periodic;
  for (auto _ : state) {
    switch (op) {
      case Op::Propagate:
        omp ? propagate_region(c.model, c.buf, all, exec) : reference::propagate(c.model, c.buf, all);
        break;
      case Op::Collide:
        omp ? collide_region(c.model, c.params, c.buf, all, exec) : reference::collide(c.model, c.params, c.buf, all);
        break;
      case Op::Step:
        omp ? step_periodic(c.model, c.params, c.buf, periodic, exec)
            : reference::step(c.model, c.params, c.buf, periodic);
        break;
    }
    benchmark::ClobberMemory();
  }
  const double sites = static_cast<double>(kLx) * kLy;
  state.counters["MLUPS"] =
      benchmark::Counter(sites * 1e-6, benchmark::Counter::kIsIterationInvariantRate);
}

void register_all() {
  const std::pair<Op, const char*> ops[] = {{Op::Propagate, "propagate"}, {Op::Collide, "collide"}, {Op::Step, "step"}};
  for (const char* model : {"d2q9", "d2q37"}) {
    for (auto [op, op_name] : ops) {
      for (const auto& d : kLayouts) {
        for (bool omp : {false, true}) {
          const std::string name = std::string(op_name) + "/" + model + "/" + d.label() + (omp ? "/omp" : "/reference");
          benchmark::RegisterBenchmark(name.c_str(), run, std::string(model), d, op, omp)->Unit(benchmark::kMillisecond);
        }
      }
    }
  }
}

}  // namespace

int main(int argc, char** argv) {
  register_all();
  benchmark::Initialize(&argc, argv);
  if (benchmark::ReportUnrecognizedArguments(argc, argv)) return 1;
  benchmark::RunSpecifiedBenchmarks();
  benchmark::Shutdown();
}
