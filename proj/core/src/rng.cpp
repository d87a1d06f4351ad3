#include "snndelay/rng.hpp"

#include <stdexcept>

namespace snndelay {
namespace {

std::uint64_t splitmix64(std::uint64_t& x) {
  std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

constexpr double kTwoPowMinus53 = 1.0 / 9007199254740992.0;

}  // namespace

RngStream::RngStream(std::uint64_t seed) : seed_(seed) {
  std::uint64_t x = seed;
  for (auto& word : s_) word = splitmix64(x);
}

RngStream RngStream::derive(std::uint64_t base, std::uint64_t index) {
  std::uint64_t x = base ^ (0xd1b54a32d192ed03ULL * (index + 1));
  return RngStream(splitmix64(x));
}

std::uint64_t RngStream::next_u64() {
  const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double RngStream::uniform01() { return static_cast<double>(next_u64() >> 11) * kTwoPowMinus53; }

double RngStream::uniform(double lo, double hi) {
  if (!(lo < hi)) throw std::invalid_argument("uniform: requires lo < hi");
  const double u = static_cast<double>((next_u64() >> 11) + 1) * kTwoPowMinus53;
  return lo + (hi - lo) * u;
}

namespace {
__extension__ using u128 = unsigned __int128;
}  // namespace

std::uint64_t RngStream::uniform_int(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("uniform_int: empty range");
  // Lemire's nearly-divisionless bounded draw.
  u128 m = static_cast<u128>(next_u64()) * n;
  auto low = static_cast<std::uint64_t>(m);
  if (low < n) {
    const std::uint64_t threshold = (0 - n) % n;
    while (low < threshold) {
      m = static_cast<u128>(next_u64()) * n;
      low = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::uint64_t>(m >> 64);
}

bool RngStream::bernoulli(double p) { return uniform01() < p; }

double uniform(RngStream& rng, double lo, double hi) { return rng.uniform(lo, hi); }

}  // namespace snndelay
