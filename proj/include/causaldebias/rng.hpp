#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

namespace cdb {

// Counter-based random source. Every draw is a pure function of
// (seed, stream, row, term), so results never depend on evaluation order.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed) : seed_(seed) {}

  static constexpr std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // FNV-1a; stable across platforms unlike std::hash.
  static constexpr std::uint64_t stream_id(std::string_view name) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : name) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
    return h;
  }

  std::uint64_t bits(std::uint64_t stream, std::uint64_t row,
                     std::uint64_t term, std::uint64_t draw = 0) const {
    std::uint64_t h = mix(seed_ ^ 0x5851f42d4c957f2dULL);
    h = mix(h ^ stream);
    h = mix(h ^ (row * 0x2545f4914f6cdd1dULL));
    h = mix(h ^ (term * 0x9e6c63d0676a9a99ULL));
    return mix(h ^ draw);
  }

  /// Uniform in the open interval (0, 1).
  double uniform(std::uint64_t stream, std::uint64_t row, std::uint64_t term,
                 std::uint64_t draw = 0) const {
    return (static_cast<double>(bits(stream, row, term, draw) >> 11) + 0.5) *
           0x1.0p-53;
  }

  double normal(std::uint64_t stream, std::uint64_t row, std::uint64_t term,
                double mean = 0.0, double sd = 1.0) const {
    const double u1 = uniform(stream, row, term, 0);
    const double u2 = uniform(stream, row, term, 1);
    const double z = std::sqrt(-2.0 * std::log(u1)) *
                     std::cos(2.0 * std::numbers::pi * u2);
    return mean + sd * z;
  }

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
};

}  // namespace cdb
