#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

namespace shortlong {

using Rng = std::mt19937_64;

/// Stable 64-bit hash of a purpose label (FNV-1a), used to name RNG streams.
std::uint64_t stream_id(std::string_view purpose) noexcept;

/// Mixes a list of integers into one seed with SplitMix64 finalizers.
/// Order matters; the result is platform independent.
std::uint64_t derive_seed(std::initializer_list<std::uint64_t> parts) noexcept;

/// Generator for the stream named `purpose` under `seed`.
inline Rng make_stream(std::uint64_t seed, std::string_view purpose) {
  return Rng(derive_seed({seed, stream_id(purpose)}));
}

}  // namespace shortlong
