#include "lbhx/hetero.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <vector>

#include "lbhx/error.hpp"

namespace lbhx {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

template <typename F>
double timed(F&& f) {
  const auto t0 = Clock::now();
  f();
  return seconds_since(t0);
}

// Copies every column of [begin, end) that satisfies `pick`, in maximal runs.
template <typename Pick, typename Copy>
void copy_runs(int begin, int end, Pick pick, Copy copy) {
  int x = begin;
  while (x < end) {
    if (!pick(x)) {
      ++x;
      continue;
    }
    int e = x + 1;
    while (e < end && pick(e)) ++e;
    copy(x, e - x);
    x = e;
  }
}

}  // namespace

PartitionPlan make_partition(const Geometry& geom, int m) {
  if (m < 0 || 2 * m > geom.lx) {
    throw ConfigError("border width M=" + std::to_string(m) + " needs 0 <= 2M <= LX=" + std::to_string(geom.lx));
  }
  const int h = geom.halo;
  const int lx = geom.lx;
  PartitionPlan p;
  p.geom = geom;
  p.m = m;
  p.left = Region::columns(h, h + m, geom);
  p.bulk = Region::columns(h + m, h + lx - m, geom);
  p.right = Region::columns(h + lx - m, h + lx, geom);
  p.rank_halo_left = {0, h};
  p.rank_halo_right = {h + lx, lx + 2 * h};
  if (p.has_device() && m > 0) {
    p.device_edge_left = {h + m, std::min(2 * h + m, h + lx - m)};
    p.device_edge_right = {std::max(lx - m, h + m), h + lx - m};
    p.host_edge_left = {std::max(m, h), h + m};
    p.host_edge_right = {h + lx - m, std::min(h + lx - m + h, h + lx)};
  }
  return p;
}

void PoolConfig::validate() const {
  if (host_workers < 1 || device_workers < 1) throw ConfigError("pool worker counts must be >= 1");
  if (!(device_throttle >= 1.0) || !std::isfinite(device_throttle)) {
    throw ConfigError("pool.device_throttle must be a finite number >= 1");
  }
}

void halo_swap_device_host(const PartitionPlan& plan, FieldBuffer& host, FieldBuffer& device) {
  if (!plan.has_device()) return;
  const auto& g = plan.geom;
  const int h = g.halo;
  const int m = plan.m;
  const auto in_bulk = [&](int x) { return x >= h + m && x < h + g.lx - m; };
  const auto in_border = [&](int x) {
    return (x >= plan.left.x_begin && x < plan.left.x_end) || (x >= plan.right.x_begin && x < plan.right.x_end);
  };
  // device -> host: bulk columns read by the border kernels, plus the rank
  // edges the next exchange will send.
  const ColumnRange need[] = {{h + m, 2 * h + m}, {g.lx - m, h + g.lx - m}, {h, 2 * h}, {g.lx, g.lx + h}};
  copy_runs(
      0, g.alloc_lx(),
      [&](int x) {
        if (!in_bulk(x)) return false;
        for (const auto& r : need) {
          if (r.contains(x)) return true;
        }
        return false;
      },
      [&](int x, int n) { copy_columns(device, x - m, host, x, n); });
  // host -> device: device halo columns that mirror border columns.
  const int dev_alloc = plan.device_geometry().alloc_lx();
  copy_runs(
      0, dev_alloc,
      [&](int d) { return (d < h || d >= dev_alloc - h) && in_border(d + m); },
      [&](int d, int n) { copy_columns(host, d + m, device, d, n); });
}

void PeriodicExchanger::exchange(FieldBuffer& host) { fill_periodic_halos(host); }

// ---------------------------------------------------------------------------

DeviceQueue::DeviceQueue(int workers, double throttle)
    : workers_(workers), throttle_(throttle), thread_([this] { worker(); }) {}

DeviceQueue::~DeviceQueue() {
  {
    std::lock_guard lk(mu_);
    stop_ = true;
  }
  cv_.notify_all();
  thread_.join();
}

void DeviceQueue::enqueue(std::string phase, Task task) {
  {
    std::lock_guard lk(mu_);
    items_.push_back({std::move(phase), std::move(task)});
  }
  cv_.notify_one();
}

double DeviceQueue::drain(double timeout_s) {
  std::unique_lock lk(mu_);
  const bool done = idle_cv_.wait_for(lk, std::chrono::duration<double>(timeout_s),
                                      [&] { return items_.empty() && !busy_; });
  if (!done) {
    throw RuntimeFault("watchdog: device queue did not drain within " + std::to_string(timeout_s) +
                       " s (phase: " + (busy_ ? phase_ : items_.front().phase) + ", " +
                       std::to_string(items_.size()) + " task(s) pending)");
  }
  if (error_) {
    auto e = error_;
    error_ = nullptr;
    first_start_.reset();
    std::rethrow_exception(e);
  }
  double span = 0.0;
  if (first_start_) span = std::chrono::duration<double>(last_end_ - *first_start_).count();
  first_start_.reset();
  return span;
}

void DeviceQueue::worker() {
  std::unique_lock lk(mu_);
  for (;;) {
    cv_.wait(lk, [&] { return stop_ || !items_.empty(); });
    if (items_.empty()) return;
    Item item = std::move(items_.front());
    items_.pop_front();
    busy_ = true;
    phase_ = item.phase;
    const auto t0 = Clock::now();
    if (!first_start_) first_start_ = t0;
    const bool skip = error_ != nullptr;
    lk.unlock();

    if (!skip) {
      meter_.total = 0.0;
      try {
        item.task(Exec{workers_, &meter_});
      } catch (...) {
        lk.lock();
        error_ = std::current_exception();
        lk.unlock();
      }
      if (throttle_ > 1.0 && meter_.total > 0.0) {
        std::this_thread::sleep_until(t0 + std::chrono::duration_cast<Clock::duration>(
                                                std::chrono::duration<double>(throttle_ * meter_.total)));
      }
    }

    lk.lock();
    last_end_ = Clock::now();
    busy_ = false;
    if (items_.empty()) idle_cv_.notify_all();
  }
}

// ---------------------------------------------------------------------------

HeteroRuntime::HeteroRuntime(const LatticeModel& model, const ModelParams& params, const BoundaryPolicy& policy,
                             const LayoutDescriptor& desc, const Geometry& geom, int m, const PoolConfig& pools,
                             const RuntimeOptions& opts)
    : model_(model),
      params_(params),
      policy_(policy),
      pools_(pools),
      opts_(opts),
      plan_(make_partition(geom, m)),
      host_(desc, geom, model.q()),
      queue_((pools.validate(), pools.device_workers), pools.device_throttle) {
  params_.validate();
  if (geom.halo < model.reach) throw ConfigError("halo width must be at least the model reach");
  rebuild_device();
}

void HeteroRuntime::rebuild_device() {
  device_.reset();
  if (plan_.has_device()) {
    device_ = std::make_unique<FieldBuffer>(host_.desc(), plan_.device_geometry(), model_.q());
    device_->set_halo_checks(host_.halo_checks());
  }
}

void HeteroRuntime::prime() {
  if (!device_) return;
  copy_columns(host_, plan_.m, *device_, 0, device_->geom().alloc_lx());
  device_->mark_halos_current();
}

void HeteroRuntime::sync_to_host() {
  if (!device_) return;
  const int h = plan_.geom.halo;
  copy_columns(*device_, h, host_, h + plan_.m, device_->geom().lx);
}

void HeteroRuntime::set_m(int m) {
  sync_to_host();
  plan_ = make_partition(host_.geom(), m);
  rebuild_device();
  prime();
}

void HeteroRuntime::launch_device() {
  FieldBuffer& dev = *device_;
  const Region all = Region::interior(dev.geom());
  const auto& model = model_;
  const auto params = params_;
  const auto policy = policy_;
  const auto collide = opts_.collide;
  queue_.enqueue("bulk propagate", [&dev, &model, all](const Exec& e) { propagate_region(model, dev, all, e); });
  queue_.enqueue("bulk bc", [&dev, &model, all, policy](const Exec& e) { apply_bc(model, dev, policy, all, e); });
  queue_.enqueue("bulk collide", [&dev, &model, all, params, collide](const Exec& e) {
    collide_region(model, params, dev, all, e, collide);
  });
}

void HeteroRuntime::push_rank_halos_to_device() {
  const int m = plan_.m;
  const int dev_alloc = device_->geom().alloc_lx();
  copy_runs(
      0, dev_alloc,
      [&](int d) { return plan_.rank_halo_left.contains(d + m) || plan_.rank_halo_right.contains(d + m); },
      [&](int d, int n) { copy_columns(host_, d + m, *device_, d, n); });
}

StepTiming HeteroRuntime::step(HaloExchanger& exchanger) {
  StepTiming t;
  const auto t0 = Clock::now();
  const bool dev = plan_.has_device();
  const bool serial = plan_.device_needs_rank_halos();

  if (dev && !serial) launch_device();
  t.t_mpi = timed([&] {
    exchanger.exchange(host_);
    host_.mark_halos_current();
  });
  if (dev && serial) {
    push_rank_halos_to_device();
    device_->mark_halos_current();
    launch_device();
  }
  if (plan_.has_borders()) {
    const Region borders[] = {plan_.left, plan_.right};
    const Exec host_exec{pools_.host_workers, nullptr};
    t.t_host = timed([&] { step_region(model_, params_, host_, borders, policy_, host_exec, opts_.collide); });
  }
  if (dev) t.t_acc = queue_.drain(opts_.watchdog_seconds);

  host_.advance_generation();
  if (dev) {
    if (opts_.inject != Fault::SkipHaloSwap) {
      t.t_swap = timed([&] { halo_swap_device_host(plan_, host_, *device_); });
    }
    device_->advance_generation();
    device_->mark_halos_current();
  }
  t.t_exe = seconds_since(t0);
  return t;
}

CanonicalField HeteroRuntime::snapshot() {
  sync_to_host();
  return to_canonical(host_);
}

double HeteroRuntime::time_host_columns(int columns) {
  const auto& g = plan_.geom;
  if (columns < 1 || columns > g.lx) throw ContractViolation("time_host_columns: column count out of range");
  host_.mark_halos_current();
  const Region r = Region::columns(g.halo, g.halo + columns, g);
  const Exec e{pools_.host_workers, nullptr};
  return timed([&] { step_region(model_, params_, host_, std::span<const Region>(&r, 1), policy_, e, opts_.collide); });
}

double HeteroRuntime::time_device_columns(int columns) {
  if (!device_ || columns < 1 || columns > device_->geom().lx) {
    throw ContractViolation("time_device_columns: column count exceeds the device slice");
  }
  FieldBuffer& dev = *device_;
  dev.mark_halos_current();
  const Region r = Region::columns(dev.geom().halo, dev.geom().halo + columns, dev.geom());
  const auto& model = model_;
  const auto params = params_;
  const auto policy = policy_;
  const auto collide = opts_.collide;
  const auto t0 = Clock::now();
  queue_.enqueue("tune propagate", [&dev, &model, r](const Exec& e) { propagate_region(model, dev, r, e); });
  queue_.enqueue("tune bc", [&dev, &model, r, policy](const Exec& e) { apply_bc(model, dev, policy, r, e); });
  queue_.enqueue("tune collide",
                 [&dev, &model, r, params, collide](const Exec& e) { collide_region(model, params, dev, r, e, collide); });
  queue_.drain(opts_.watchdog_seconds);
  return seconds_since(t0);
}

double HeteroRuntime::time_exchange(HaloExchanger& exchanger) {
  return timed([&] {
    exchanger.exchange(host_);
    host_.mark_halos_current();
  });
}

double HeteroRuntime::time_swap() {
  if (!device_) return 0.0;
  return timed([&] { halo_swap_device_host(plan_, host_, *device_); });
}

std::vector<int> sample_sizes(int lo, int hi, int count) {
  if (lo < 1 || hi < lo || count < 3 || hi - lo + 1 < 3) {
    throw TuningError("cannot pick three distinct sample sizes in [" + std::to_string(lo) + ", " +
                      std::to_string(hi) + "]");
  }
  std::vector<int> out;
  for (int i = 0; i < count; ++i) {
    const int v = lo + static_cast<int>(std::lround(static_cast<double>(hi - lo) * i / (count - 1)));
    if (out.empty() || out.back() != v) out.push_back(v);
  }
  return out;
}

}  // namespace lbhx
