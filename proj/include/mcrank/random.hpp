#pragma once

// Seeded sampling helpers with platform-independent output. The standard
// distributions (and therefore std::shuffle / std::sample) are allowed to
// differ between library implementations, so everything that must be
// reproducible from a seed goes through these instead.

#include <cstdint>
#include <random>
#include <span>
#include <utility>
#include <vector>

namespace mcrank {

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t seed) { return Rng(seed); }

/// Generator for a sub-stream identified by (seed, stream), e.g. one per epoch.
inline Rng make_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream),
                    static_cast<std::uint32_t>(stream >> 32)};
  return Rng(seq);
}

/// Uniform integer in [0, bound) by rejection; bound must be > 0.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t bound) {
  const std::uint64_t limit = Rng::max() - Rng::max() % bound;
  std::uint64_t draw = rng();
  while (draw >= limit) draw = rng();
  return draw % bound;
}

/// Uniform double in [0, 1) with 53 random bits.
inline double uniform_unit(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

template <typename T>
void shuffle(std::span<T> items, Rng& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(uniform_index(rng, i));
    using std::swap;
    swap(items[i - 1], items[j]);
  }
}

template <typename T>
void shuffle(std::vector<T>& items, Rng& rng) {
  shuffle(std::span<T>(items), rng);
}

/// `count` distinct indices from [0, n), uniformly, in selection order
/// (partial Fisher-Yates). Requires count <= n.
inline std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t count,
                                                           Rng& rng) {
  std::vector<std::size_t> pool(n);
  for (std::size_t i = 0; i < n; ++i) pool[i] = i;
  for (std::size_t i = 0; i < count; ++i) {
    const auto j = i + static_cast<std::size_t>(uniform_index(rng, n - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(count);
  return pool;
}

}  // namespace mcrank
