#pragma once

#include <cstdint>

namespace sktap {

// SplitMix64 finalizer.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Seed of substream `stream` under `master`. Depends only on the pair, so
// results do not depend on the order in which substreams are consumed.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) noexcept {
  return splitmix64(splitmix64(master) ^ (stream * 0xd1342543de82ef95ULL + 0x632be59bd9b4e019ULL));
}

template <class... Rest>
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream, Rest... rest) noexcept {
  return derive_seed(derive_seed(master, stream), static_cast<std::uint64_t>(rest)...);
}

}  // namespace sktap
