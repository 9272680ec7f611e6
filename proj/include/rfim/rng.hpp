#pragma once

#include <cmath>
#include <cstdint>
#include <limits>

namespace rfim {

/// Stream purposes; the tag enters the key so that streams never collide.
enum class Purpose : std::uint64_t {
  Disorder = 1,
  WhiteNoise = 2,
  Refinement = 3,
  Spins = 4,
  Bootstrap = 5,
  Tilt = 6,
  Replica = 7,
  Field = 8,
  Test = 9,
};

inline constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline constexpr std::uint64_t golden = 0x9e3779b97f4a7c15ULL;

/// Hash of (master_seed, purpose, replica, site).
inline constexpr std::uint64_t derive_key(std::uint64_t seed, Purpose p, std::uint64_t replica = 0,
                                          std::uint64_t site = 0) {
  std::uint64_t k = mix64(seed + golden);
  k = mix64(k ^ (static_cast<std::uint64_t>(p) * 0xd1b54a32d192ed03ULL));
  k = mix64(k ^ (replica + 0x8cb92ba72f3d8dd7ULL));
  k = mix64(k ^ (site * golden + 0x632be59bd9b4e019ULL));
  return k;
}

/// Value number `counter` of the stream keyed by `key`.
inline constexpr std::uint64_t counter_bits(std::uint64_t key, std::uint64_t counter) {
  return mix64(key + (counter + 1) * golden);
}

inline double bits_to_unit(std::uint64_t b) {
  return static_cast<double>(b >> 11) * 0x1.0p-53;
}

/// Uniform on (0,1), never 0.
inline double uniform_at(std::uint64_t key, std::uint64_t counter) {
  return (static_cast<double>(counter_bits(key, counter) >> 11) + 0.5) * 0x1.0p-53;
}

/// Standard normal addressed by (key, counter) via Box-Muller on counters 2c, 2c+1.
inline double normal_at(std::uint64_t key, std::uint64_t counter) {
  const double u1 = uniform_at(key, 2 * counter);
  const double u2 = uniform_at(key, 2 * counter + 1);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925 * u2);
}

/// Counter-based generator satisfying UniformRandomBitGenerator.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  CounterRng() = default;
  explicit CounterRng(std::uint64_t key) : key_(key) {}
  CounterRng(std::uint64_t seed, Purpose p, std::uint64_t replica = 0, std::uint64_t site = 0)
      : key_(derive_key(seed, p, replica, site)) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() { return counter_bits(key_, counter_++); }

  double uniform() { return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53; }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double t = 6.283185307179586476925 * u2;
    spare_ = r * std::sin(t);
    has_spare_ = true;
    return r * std::cos(t);
  }

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    return static_cast<std::uint64_t>((static_cast<unsigned __int128>((*this)()) * n) >> 64);
  }

  std::uint64_t key() const { return key_; }
  std::uint64_t position() const { return counter_; }

 private:
  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace rfim
