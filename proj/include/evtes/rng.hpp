#pragma once

#include <cstdint>
#include <limits>

namespace evtes {

/// Counter-based generator: the output is SplitMix64 of (key, counter), where
/// the key mixes (seed, stream index, substream). Every pulse owns its own
/// stream, so results do not depend on evaluation order or threading.
class Stream {
 public:
  using result_type = std::uint64_t;

  Stream(std::uint64_t seed, std::uint64_t index, std::uint64_t substream = 0)
      : key_(mix(mix(seed ^ 0x6a09e667f3bcc909ull) ^ mix(index + 0x3c6ef372fe94f82bull) ^
                 mix(substream + 0xa54ff53a5f1d36f1ull))) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() { return mix(key_ + 0x9e3779b97f4a7c15ull * ++counter_); }

  /// Uniform in (0, 1).
  double uniform() { return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53; }

  static constexpr std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace evtes
