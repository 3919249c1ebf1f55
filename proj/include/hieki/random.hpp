#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace hieki {

using Rng = std::mt19937_64;

/// splitmix64 finalizer; used to derive independent stream seeds.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Seed for the stream addressed by (master, c0, c1, ...). Distinct counters
/// give distinct seeds, and the result does not depend on evaluation order.
inline std::uint64_t stream_seed(std::uint64_t master,
                                 std::initializer_list<std::uint64_t> counters) {
  std::uint64_t s = mix64(master);
  for (auto c : counters) s = mix64(s ^ mix64(c + 0x632BE59BD9B4E019ULL));
  return s;
}

inline Rng make_stream(std::uint64_t master,
                       std::initializer_list<std::uint64_t> counters) {
  return Rng(stream_seed(master, counters));
}

template <typename Scalar, typename URBG>
Scalar standard_normal(URBG& rng) {
  std::normal_distribution<Scalar> dist(Scalar(0), Scalar(1));
  return dist(rng);
}

}  // namespace hieki
