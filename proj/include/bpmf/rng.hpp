#ifndef BPMF_RNG_HPP
#define BPMF_RNG_HPP

#include <cstdint>
#include <random>

namespace bpmf {

// mt19937_64 output is fully specified by the standard; the std
// distributions are not, so draws go through the helpers below to keep
// trajectories identical across standard libraries.
using Rng = std::mt19937_64;

/// Uniform on [0, 1) with 53 random bits.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

/// Exponential waiting time with the given rate (> 0).
double exponential(Rng& rng, double rate);

/// Seed for replica `index` of an ensemble started from `base_seed`.
std::uint64_t derive_seed(std::uint64_t base_seed, std::uint64_t index);

}  // namespace bpmf

#endif  // BPMF_RNG_HPP
