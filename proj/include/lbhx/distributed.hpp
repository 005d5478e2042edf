#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "lbhx/hetero.hpp"
#include "lbhx/transport.hpp"

namespace lbhx {

/// One rank's X slice in a periodic ring.
struct RankLayout {
  int n_ranks = 1;
  int rank = 0;
  int x_begin = 0;  ///< first owned global column
  int x_end = 0;
  int left = 0;   ///< neighbour owning the columns just below x_begin
  int right = 0;  ///< neighbour owning x_end

  int width() const { return x_end - x_begin; }

  friend bool operator==(const RankLayout&, const RankLayout&) = default;
};

/// Widths differ by at most one; remainder columns go to the lowest ranks.
/// ConfigError when a slice would be narrower than 2H.
std::vector<RankLayout> decompose_x(int lx_global, int n_ranks, int halo);

// Message tags.
inline constexpr std::uint32_t kTagRightGoing = 1;  ///< sender's right edge -> receiver's left halo
inline constexpr std::uint32_t kTagLeftGoing = 2;   ///< sender's left edge -> receiver's right halo
inline constexpr std::uint32_t kTagGather = 100;
inline constexpr std::uint32_t kTagTimings = 101;
inline constexpr std::uint32_t kTagBarrier = 102;

/// Halo exchange with the ring neighbours. Each message is the canonical
/// serialization of H edge columns; both messages are size-checked before
/// either halo is written.
class RankHaloExchanger final : public HaloExchanger {
 public:
  RankHaloExchanger(Transport& transport, const RankLayout& layout, double timeout_s = 60.0)
      : transport_(transport), layout_(layout), timeout_s_(timeout_s) {}

  void exchange(FieldBuffer& host) override;

 private:
  Transport& transport_;
  RankLayout layout_;
  double timeout_s_;
};

/// Collective barrier through rank 0.
void barrier(Transport& t, double timeout_s = 60.0);

/// Sends every rank's interior to rank 0, which returns the global field
/// (other ranks get an empty field).
CanonicalField gather_field(Transport& t, const CanonicalField& local, int lx_global, double timeout_s = 60.0);

/// Sends every rank's values to rank 0; rank 0 gets one vector per rank.
std::vector<std::vector<double>> gather_values(Transport& t, const std::vector<double>& local,
                                               double timeout_s = 60.0);

}  // namespace lbhx
