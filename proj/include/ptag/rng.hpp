#pragma once

#include <cstdint>
#include <random>

namespace ptag {

/// splitmix64 step, used to derive independent sub-stream seeds from one
/// user-facing seed so that emitter, background, routing and detector draws
/// never share a generator.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream_id) {
  std::uint64_t s = base ^ (0xd1342543de82ef95ULL * (stream_id + 1));
  std::uint64_t a = splitmix64(s);
  std::uint64_t b = splitmix64(s);
  return a ^ (b << 1);
}

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t base, std::uint64_t stream_id) {
  return Rng(derive_seed(base, stream_id));
}

}  // namespace ptag
