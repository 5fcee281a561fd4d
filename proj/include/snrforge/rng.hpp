#pragma once

#include <cstdint>
#include <random>
#include <sstream>
#include <string>

namespace snrforge {

/// SplitMix64 finalizer; used to derive independent stream seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Named streams, so an ablation can vary exactly one source of randomness.
enum class Stream : std::uint64_t {
  data = 1,
  time = 2,
  noise = 3,
  init = 4,
  dataset = 5,
  sampling = 6,
  projections = 7,
  uniform = 8,
};

using Engine = std::mt19937_64;

inline Engine make_engine(std::uint64_t seed, Stream stream, std::uint64_t index = 0) {
  const std::uint64_t s =
      splitmix64(splitmix64(seed) ^ splitmix64(static_cast<std::uint64_t>(stream) << 32 | index));
  return Engine(s);
}

inline std::string engine_state(const Engine &e) {
  std::ostringstream os;
  os << e;
  return os.str();
}

inline Engine engine_from_state(const std::string &state) {
  Engine e;
  std::istringstream is(state);
  is >> e;
  return e;
}

/// Uniform double on the open interval (0, 1) from the top 53 bits.
inline double uniform_open(Engine &e) {
  return (static_cast<double>(e() >> 11) + 0.5) * 0x1.0p-53;
}

} // namespace snrforge
