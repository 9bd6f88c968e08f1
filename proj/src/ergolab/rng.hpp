#pragma once

#include <cstdint>
#include <random>

namespace ergolab {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Seed for stream `index` of a run seeded with `seed`. Streams depend only on
/// the pair, never on which worker consumes them.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  return splitmix64(splitmix64(seed) ^ splitmix64(index + 0x632BE59BD9B4E019ULL));
}

class StreamRng {
 public:
  StreamRng(std::uint64_t seed, std::uint64_t index) : gen_(derive_seed(seed, index)) {}

  std::uint64_t bits() { return gen_(); }
  /// Uniform on [0,1) with 53 random bits.
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }
  /// Uniform on (0,1).
  double open_uniform() {
    double u;
    do u = uniform();
    while (u == 0.0);
    return u;
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace ergolab
