#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>

namespace snndelay {

/// Seedable xoshiro256** stream. The 256-bit state is filled from the seed
/// by four successive splitmix64 outputs, so a given seed yields the same
/// sequence on every platform. All derived draws below are defined only in
/// terms of next_u64() and IEEE double arithmetic:
///
///   uniform_open_closed(lo, hi) = lo + (hi - lo) * ((next >> 11) + 1) * 2^-53
///   uniform01()                 = (next >> 11) * 2^-53                 in [0, 1)
///   uniform_int(n)              = Lemire multiply-shift with rejection  in [0, n)
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed = 0);

  /// Independent stream for worker `index` of a run seeded with `base`.
  static RngStream derive(std::uint64_t base, std::uint64_t index);

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64();
  double uniform01();
  /// Draw from (lo, hi]. Throws std::invalid_argument unless lo < hi.
  double uniform(double lo, double hi);
  std::uint64_t uniform_int(std::uint64_t n);
  bool bernoulli(double p);

  /// Fisher-Yates shuffle driven by uniform_int (std::shuffle is not
  /// reproducible across standard libraries).
  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(uniform_int(i));
      std::swap(items[i - 1], items[j]);
    }
  }

  const std::array<std::uint64_t, 4>& state() const { return s_; }

 private:
  std::uint64_t seed_;
  std::array<std::uint64_t, 4> s_{};
};

/// Free-function form of RngStream::uniform.
double uniform(RngStream& rng, double lo, double hi);

}  // namespace snndelay
