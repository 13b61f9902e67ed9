#pragma once

#include <cstdint>
#include <random>

namespace marcus {

using Engine = std::mt19937_64;

/// Independent sub-streams used inside one realization.
enum class SubStream : std::uint64_t {
  brownian = 1,
  jumps = 2,
  small_jumps = 3,
  stable_path = 4,
};

/// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t v) noexcept {
  v += 0x9e3779b97f4a7c15ULL;
  v = (v ^ (v >> 30)) * 0xbf58476d1ce4e5b9ULL;
  v = (v ^ (v >> 27)) * 0x94d049bb133111ebULL;
  return v ^ (v >> 31);
}

constexpr std::uint64_t hash_combine(std::uint64_t seed, std::uint64_t value) noexcept {
  return mix64(mix64(seed) ^ mix64(value + 0x632be59bd9b4e019ULL));
}

/// Seed for realization `index` of master `seed`; depends on nothing else,
/// so parallel generation order never changes the draws.
constexpr std::uint64_t realization_seed(std::uint64_t seed, std::uint64_t index) noexcept {
  return hash_combine(seed, index);
}

inline Engine make_stream(std::uint64_t seed, std::uint64_t index, SubStream sub) {
  return Engine(hash_combine(realization_seed(seed, index), static_cast<std::uint64_t>(sub)));
}

}  // namespace marcus
