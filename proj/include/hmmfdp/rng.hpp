#ifndef HMMFDP_RNG_HPP
#define HMMFDP_RNG_HPP

#include <cmath>
#include <cstdint>
#include <random>
#include <span>

namespace hmmfdp {

// splitmix64 step; used to derive well-separated seeds from a master seed.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Deterministic seed for stream (tag, index) under a master seed.  Streams
// derived for distinct (tag, index) pairs are independent for all practical
// purposes; the derivation does not depend on evaluation order, which is what
// makes parallel schedules reproducible.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t tag,
                                 std::uint64_t index = 0) {
  std::uint64_t s = master;
  std::uint64_t a = splitmix64(s);
  s ^= tag * 0xd1342543de82ef95ULL;
  std::uint64_t b = splitmix64(s);
  s ^= index * 0xaf251af3b0f025b5ULL;
  std::uint64_t c = splitmix64(s);
  return a ^ (b + 0x9e3779b97f4a7c15ULL) ^ c;
}

// Stream tags used throughout the library (one per kind of consumer so that
// the same master seed never feeds two different purposes the same stream).
namespace stream {
inline constexpr std::uint64_t kData = 1;       // simulating (theta, x)
inline constexpr std::uint64_t kEmInit = 2;     // EM initialization draw
inline constexpr std::uint64_t kReplicate = 3;  // bootstrap replicates
inline constexpr std::uint64_t kRun = 4;        // experiment runs
inline constexpr std::uint64_t kCn = 5;         // synthetic CN profiles
}  // namespace stream

// Self-contained random generator with explicitly implemented sampling
// transforms, so that identical seeds give identical draws on every platform
// this builds on.  Not cryptographic.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1).
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  // Uniform on (0, 1]; never zero, safe as a log argument.
  double uniform_pos() {
    return static_cast<double>((engine_() >> 11) + 1) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller (no caching, so the consumption pattern
  // is two 64-bit draws per variate, independent of call history).
  double normal() {
    const double u1 = uniform_pos();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  // Uniform integer in [0, bound), bound >= 1.
  std::uint64_t integer(std::uint64_t bound) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(engine_()) * bound) >> 64);
  }

  // Index i with probability (cum[i] - cum[i-1]) / cum.back(), where cum is a
  // nondecreasing cumulative-weight vector with positive total.
  std::size_t categorical(std::span<const double> cum) {
    const double u = uniform() * cum.back();
    std::size_t lo = 0, hi = cum.size() - 1;
    while (lo < hi) {
      const std::size_t mid = (lo + hi) / 2;
      if (cum[mid] <= u)
        lo = mid + 1;
      else
        hi = mid;
    }
    return lo;
  }

  bool bernoulli(double p) { return uniform() < p; }

private:
  std::mt19937_64 engine_;
};

}  // namespace hmmfdp

#endif
