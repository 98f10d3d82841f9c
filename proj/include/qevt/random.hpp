#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>
#include <random>

namespace qevt {

using Rng = std::mt19937_64;

// splitmix64 finalizer; good avalanche for counter-based seed derivation.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Seed for a (component, stage, index, ...) path below a master seed.
inline std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> path) noexcept {
  std::uint64_t s = mix64(master);
  for (std::uint64_t p : path) s = mix64(s ^ mix64(p + 0x632be59bd9b4e019ULL));
  return s;
}

// Stable component ids for seed derivation.
namespace stream {
inline constexpr std::uint64_t kGenerator = 1;
inline constexpr std::uint64_t kAnneal = 2;
inline constexpr std::uint64_t kQaoaOptimizer = 3;
inline constexpr std::uint64_t kShots = 4;
inline constexpr std::uint64_t kJitter = 5;
inline constexpr std::uint64_t kBootstrap = 6;
inline constexpr std::uint64_t kCalibration = 7;
inline constexpr std::uint64_t kValidation = 8;
inline constexpr std::uint64_t kSweep = 9;
inline constexpr std::uint64_t kPool = 10;
}  // namespace stream

// Uniform on [0, 1) from the top 53 bits; identical on every platform.
inline double uniform01(Rng& rng) noexcept {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Uniform on the open interval (0, 1).
inline double uniform_open01(Rng& rng) noexcept {
  return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

inline double standard_normal(Rng& rng) noexcept {
  const double u1 = uniform_open01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace qevt
