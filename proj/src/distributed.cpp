#include "lbhx/distributed.hpp"

#include "lbhx/error.hpp"

namespace lbhx {

std::vector<RankLayout> decompose_x(int lx_global, int n_ranks, int halo) {
  if (n_ranks < 1) throw ConfigError("need at least one rank");
  const int base = lx_global / n_ranks;
  if (base < 2 * halo || base < 1) {
    throw ConfigError("lattice.lx=" + std::to_string(lx_global) + " over " + std::to_string(n_ranks) +
                      " ranks gives slices of " + std::to_string(base) + " columns; each needs at least 2H=" +
                      std::to_string(2 * halo));
  }
  const int extra = lx_global % n_ranks;
  std::vector<RankLayout> out;
  int x = 0;
  for (int r = 0; r < n_ranks; ++r) {
    const int w = base + (r < extra ? 1 : 0);
    out.push_back({n_ranks, r, x, x + w, (r + n_ranks - 1) % n_ranks, (r + 1) % n_ranks});
    x += w;
  }
  return out;
}

void RankHaloExchanger::exchange(FieldBuffer& host) {
  const auto& g = host.geom();
  const int h = g.halo;
  const Bytes to_right = to_bytes(pack_columns(host, g.lx, h));
  const Bytes to_left = to_bytes(pack_columns(host, h, h));
  const std::size_t expected = static_cast<std::size_t>(h) * g.ly * host.q() * sizeof(double);

  Bytes from_left;
  Bytes from_right;
  const auto send_both = [&] {
    transport_.send(layout_.right, kTagRightGoing, to_right);
    transport_.send(layout_.left, kTagLeftGoing, to_left);
  };
  const auto recv_both = [&] {
    from_left = transport_.recv(layout_.left, kTagRightGoing, timeout_s_);
    from_right = transport_.recv(layout_.right, kTagLeftGoing, timeout_s_);
  };
  // even ranks send first, odd ranks receive first: no cycle of blocked
  // receives even on a synchronous transport
  if (layout_.rank % 2 == 0) {
    send_both();
    recv_both();
  } else {
    recv_both();
    send_both();
  }
  if (from_left.size() != expected) {
    throw CommError("halo from rank " + std::to_string(layout_.left) + " has " + std::to_string(from_left.size()) +
                    " bytes, expected " + std::to_string(expected));
  }
  if (from_right.size() != expected) {
    throw CommError("halo from rank " + std::to_string(layout_.right) + " has " +
                    std::to_string(from_right.size()) + " bytes, expected " + std::to_string(expected));
  }
  unpack_columns(host, 0, h, to_doubles(from_left));
  unpack_columns(host, h + g.lx, h, to_doubles(from_right));
}

void barrier(Transport& t, double timeout_s) {
  if (t.size() == 1) return;
  if (t.rank() == 0) {
    for (int r = 1; r < t.size(); ++r) t.recv(r, kTagBarrier, timeout_s);
    for (int r = 1; r < t.size(); ++r) t.send(r, kTagBarrier, {});
  } else {
    t.send(0, kTagBarrier, {});
    t.recv(0, kTagBarrier, timeout_s);
  }
}

std::vector<std::vector<double>> gather_values(Transport& t, const std::vector<double>& local, double timeout_s) {
  std::vector<std::vector<double>> out;
  if (t.rank() != 0) {
    t.send(0, kTagTimings, to_bytes(local));
    return out;
  }
  out.push_back(local);
  for (int r = 1; r < t.size(); ++r) out.push_back(to_doubles(t.recv(r, kTagTimings, timeout_s)));
  return out;
}

CanonicalField gather_field(Transport& t, const CanonicalField& local, int lx_global, double timeout_s) {
  if (t.rank() != 0) {
    t.send(0, kTagGather, to_bytes(local.values));
    return {};
  }
  const auto layouts = decompose_x(lx_global, t.size(), 0);
  CanonicalField global;
  global.lx = lx_global;
  global.ly = local.ly;
  global.q = local.q;
  global.desc = local.desc;
  global.values.resize(static_cast<std::size_t>(local.q) * lx_global * local.ly);
  for (int r = 0; r < t.size(); ++r) {
    const auto& lay = layouts[r];
    std::vector<double> vals = r == 0 ? local.values : to_doubles(t.recv(r, kTagGather, timeout_s));
    const std::size_t want = static_cast<std::size_t>(local.q) * lay.width() * local.ly;
    if (vals.size() != want) {
      throw CommError("gathered slice from rank " + std::to_string(r) + " has " + std::to_string(vals.size()) +
                      " values, expected " + std::to_string(want));
    }
    for (int p = 0; p < local.q; ++p) {
      for (int x = 0; x < lay.width(); ++x) {
        for (int y = 0; y < local.ly; ++y) {
          global.value(p, lay.x_begin + x, y) = vals[(static_cast<std::size_t>(p) * lay.width() + x) * local.ly + y];
        }
      }
    }
  }
  return global;
}

}  // namespace lbhx
