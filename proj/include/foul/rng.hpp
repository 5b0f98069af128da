#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>
#include <utility>

namespace foul {

/// Deterministic counter-based random stream keyed by
/// (seed, client id, round, purpose tag).
///
/// Every stream owns its full state, so the sequence produced for a given
/// key never depends on how calls to other streams are interleaved.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t client, std::uint64_t round,
            std::string_view purpose)
      : state_(derive_state(seed, client, round, purpose)) {}

  /// Stream keyed only by seed and purpose (server-side streams).
  RngStream(std::uint64_t seed, std::string_view purpose)
      : RngStream(seed, 0, 0, purpose) {}

  std::uint64_t next_u64() {
    // splitmix64
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1).
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Standard normal via Box-Muller; consumes exactly two uniforms.
  double next_normal() {
    const double u1 = 1.0 - next_double();  // (0, 1]
    const double u2 = next_double();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

  /// Uniform integer in [0, bound). bound must be > 0.
  std::uint64_t next_below(std::uint64_t bound) { return next_u64() % bound; }

  template <class RandomIt>
  void shuffle(RandomIt first, RandomIt last) {
    const auto n = static_cast<std::uint64_t>(last - first);
    for (std::uint64_t i = n; i > 1; --i) {
      std::swap(first[i - 1], first[next_below(i)]);
    }
  }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  static std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const char c : s) {
      h ^= static_cast<unsigned char>(c);
      h *= 0x100000001b3ULL;
    }
    return h;
  }

  static std::uint64_t derive_state(std::uint64_t seed, std::uint64_t client,
                                    std::uint64_t round,
                                    std::string_view purpose) {
    std::uint64_t s = mix(seed);
    s = mix(s ^ client);
    s = mix(s ^ round);
    s = mix(s ^ fnv1a(purpose));
    return s;
  }

  std::uint64_t state_;
};

}  // namespace foul
