#pragma once

#include <condition_variable>
#include <deque>
#include <exception>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

#include "lbhx/autotune.hpp"
#include "lbhx/dump.hpp"
#include "lbhx/kernels.hpp"

namespace lbhx {

/// Half-open column range in allocation coordinates.
struct ColumnRange {
  int begin = 0;
  int end = 0;

  int size() const { return end > begin ? end - begin : 0; }
  bool contains(int x) const { return x >= begin && x < end; }

  friend bool operator==(const ColumnRange&, const ColumnRange&) = default;
};

/// Split of one rank's slice into left border | bulk | right border. The
/// borders run on the host pool, the bulk on the accelerator pool.
struct PartitionPlan {
  Geometry geom;
  int m = 0;
  Region left;
  Region bulk;
  Region right;
  ColumnRange rank_halo_left;   ///< [0, H): filled from the left neighbour rank
  ColumnRange rank_halo_right;  ///< [H+LX, LX+2H)
  // Host<->device edges: the H bulk columns next to each border (device side)
  // and the H columns each border exposes to the bulk (host side).
  ColumnRange device_edge_left;
  ColumnRange device_edge_right;
  ColumnRange host_edge_left;
  ColumnRange host_edge_right;

  bool has_device() const { return !bulk.empty(); }
  bool has_borders() const { return m > 0; }
  /// True when the device halos reach into the rank halos (M < H), so the
  /// rank exchange must finish before the device can start.
  bool device_needs_rank_halos() const { return has_device() && m < geom.halo; }
  /// Geometry of the accelerator's private buffer: the bulk plus H halo
  /// columns per side. Device column d mirrors host column d + M.
  Geometry device_geometry() const { return {geom.lx - 2 * m, geom.ly, geom.halo}; }
};

/// Throws ConfigError unless 0 <= 2M <= LX.
PartitionPlan make_partition(const Geometry& geom, int m);

struct PoolConfig {
  int host_workers = 1;
  int device_workers = 1;
  /// Emulated slowdown of the accelerator pool: each device task takes at
  /// least throttle x its CPU time of wall time.
  double device_throttle = 1.0;

  void validate() const;
};

/// Copies the edge columns between the host and device buffers in both
/// directions (plus the rank-edge columns the host needs from the bulk when
/// M < H). Idempotent on quiescent buffers.
void halo_swap_device_host(const PartitionPlan& plan, FieldBuffer& host, FieldBuffer& device);

/// Refreshes the rank-halo columns of a host buffer from the neighbour ranks.
/// Implementations only ever see the host buffer, so message payloads are
/// sourced from host-resident columns.
class HaloExchanger {
 public:
  virtual ~HaloExchanger() = default;
  virtual void exchange(FieldBuffer& host) = 0;
};

/// Single-rank exchanger: X-periodic wrap within the slice.
class PeriodicExchanger final : public HaloExchanger {
 public:
  void exchange(FieldBuffer& host) override;
};

/// Ordered single-queue executor standing in for an accelerator. Tasks run
/// one at a time on a dedicated thread in submission order.
class DeviceQueue {
 public:
  using Task = std::function<void(const Exec&)>;

  DeviceQueue(int workers, double throttle);
  ~DeviceQueue();
  DeviceQueue(const DeviceQueue&) = delete;
  DeviceQueue& operator=(const DeviceQueue&) = delete;

  void enqueue(std::string phase, Task task);
  /// Waits until every queued task finished and returns the wall time from
  /// the first task start to the last task end since the previous drain.
  /// Throws RuntimeFault naming the pending phase if the queue does not drain
  /// within `timeout_s`; rethrows a task's exception.
  double drain(double timeout_s);

 private:
  void worker();

  struct Item {
    std::string phase;
    Task task;
  };

  int workers_;
  double throttle_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::condition_variable idle_cv_;
  std::deque<Item> items_;
  bool busy_ = false;
  bool stop_ = false;
  std::string phase_;
  std::exception_ptr error_;
  std::optional<std::chrono::steady_clock::time_point> first_start_;
  std::chrono::steady_clock::time_point last_end_;
  CpuMeter meter_;
  std::thread thread_;
};

enum class Fault { None, SkipHaloSwap };

struct RuntimeOptions {
  double watchdog_seconds = 60.0;
  CollideOptions collide;
  Fault inject = Fault::None;
};

/// Wall-clock breakdown of one timestep (seconds).
struct StepTiming {
  double t_exe = 0.0;
  double t_acc = 0.0;
  double t_host = 0.0;
  double t_mpi = 0.0;
  double t_swap = 0.0;
};

/// One rank's heterogeneous timestep driver. The host buffer holds the whole
/// slice geometry; only its border columns (and the edge copies it receives)
/// are current between steps, the bulk lives in the device buffer.
class HeteroRuntime {
 public:
  HeteroRuntime(const LatticeModel& model, const ModelParams& params, const BoundaryPolicy& policy,
                const LayoutDescriptor& desc, const Geometry& geom, int m, const PoolConfig& pools,
                const RuntimeOptions& opts = {});

  const PartitionPlan& plan() const { return plan_; }
  const PoolConfig& pools() const { return pools_; }
  int m() const { return plan_.m; }

  /// Full-slice host buffer. After writing an initial state into its
  /// interior call prime().
  FieldBuffer& host() { return host_; }
  const FieldBuffer& host() const { return host_; }
  const FieldBuffer* device() const { return device_.get(); }

  /// Distributes the host interior to the device (call after initialising).
  void prime();
  /// Copies the device bulk back so the host buffer holds the whole state.
  void sync_to_host();
  /// Re-partitions at a new border width, preserving the state.
  void set_m(int m);

  /// One Fig. 8 timestep: device bulk in the background, rank-halo exchange
  /// then borders on the host, barrier, edge swap.
  StepTiming step(HaloExchanger& exchanger);

  /// Interior state of the slice in canonical order.
  CanonicalField snapshot();

  // Mini-benchmarks used by the autotuner; they compute on the state in
  // place, so re-initialise before a real run.
  double time_host_columns(int columns);
  double time_device_columns(int columns);
  double time_exchange(HaloExchanger& exchanger);
  double time_swap();

 private:
  void launch_device();
  void push_rank_halos_to_device();
  void rebuild_device();

  const LatticeModel& model_;
  ModelParams params_;
  BoundaryPolicy policy_;
  PoolConfig pools_;
  RuntimeOptions opts_;
  PartitionPlan plan_;
  FieldBuffer host_;
  std::unique_ptr<FieldBuffer> device_;
  DeviceQueue queue_;
};

/// TuneRunner backed by a runtime partitioned at M = H (so the swap cost is
/// the steady-state one).
class RuntimeTuneRunner final : public TuneRunner {
 public:
  RuntimeTuneRunner(HeteroRuntime& runtime, HaloExchanger& exchanger) : rt_(runtime), ex_(exchanger) {}

  int rows() const override { return rt_.plan().geom.ly; }
  double run_host(int columns) override { return rt_.time_host_columns(columns); }
  double run_device(int columns) override { return rt_.time_device_columns(columns); }
  double run_exchange() override { return rt_.time_exchange(ex_); }
  double run_swap() override { return rt_.time_swap(); }

 private:
  HeteroRuntime& rt_;
  HaloExchanger& ex_;
};

/// Evenly spaced column counts in [lo, hi] (at least three distinct).
std::vector<int> sample_sizes(int lo, int hi, int count);

}  // namespace lbhx
