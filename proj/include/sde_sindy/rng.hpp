#pragma once

#include <cstdint>
#include <random>

namespace sde_sindy {

/// SplitMix64 output function.
constexpr std::uint64_t splitmix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Seed of an independent sub-stream keyed by (parent, index).
constexpr std::uint64_t derive_seed(std::uint64_t parent,
                                    std::uint64_t index) noexcept {
  return splitmix64(splitmix64(parent) ^ splitmix64(~index));
}

/// Seed of Monte Carlo trial `trial`. A pure function of its arguments, so a
/// trial reproduces regardless of which other trials run or in what order.
constexpr std::uint64_t trial_seed(std::uint64_t base_seed,
                                   std::uint64_t trial) noexcept {
  return derive_seed(base_seed, trial);
}

/// Deterministic stream of standard normal draws.
class GaussianStream {
 public:
  explicit GaussianStream(std::uint64_t seed) : engine_(seed) {}

  double operator()() { return dist_(engine_); }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> dist_{0.0, 1.0};
};

}  // namespace sde_sindy
