#pragma once

#include <cstdint>
#include <random>

namespace sagdmix {

/// Seedable, splittable generator.
///
/// Algorithm: std::mt19937_64 seeded through std::seed_seq with SplitMix64
/// outputs of (seed, stream). Independent streams for runs, trials and label
/// noise are obtained with `Rng::stream(seed, id...)`. Scalar draws go through
/// the <random> distributions, so bit-reproducibility holds per standard
/// library implementation (libstdc++ for the shipped tests).
class Rng {
 public:
  using result_type = std::mt19937_64::result_type;

  explicit Rng(std::uint64_t seed) : Rng(seed, 0) {}

  static Rng stream(std::uint64_t seed, std::uint64_t id) { return Rng(seed, id); }
  static Rng stream(std::uint64_t seed, std::uint64_t id, std::uint64_t sub) {
    return Rng(mix(seed, id), sub);
  }

  static constexpr result_type min() { return std::mt19937_64::min(); }
  static constexpr result_type max() { return std::mt19937_64::max(); }
  result_type operator()() { return engine_(); }

  double normal() { return normal_(engine_); }
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(engine_); }
  bool coin() { return (engine_() >> 63) != 0; }

  /// SplitMix64 finalizer.
  static constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  }

  static constexpr std::uint64_t mix(std::uint64_t seed, std::uint64_t id) {
    return splitmix64(seed ^ splitmix64(id + 0x632be59bd9b4e019ULL));
  }

 private:
  Rng(std::uint64_t seed, std::uint64_t id) {
    std::uint64_t s = mix(seed, id);
    std::seed_seq seq{static_cast<std::uint32_t>(s), static_cast<std::uint32_t>(s >> 32),
                      static_cast<std::uint32_t>(splitmix64(s)), static_cast<std::uint32_t>(splitmix64(s) >> 32),
                      static_cast<std::uint32_t>(splitmix64(s + 1)), static_cast<std::uint32_t>(splitmix64(s + 2))};
    engine_.seed(seq);
  }

  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace sagdmix
