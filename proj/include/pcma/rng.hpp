#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace pcma {

using Engine = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Derives an independent stream seed from a master seed and a path of
// indices, e.g. (seed, component, draw). Streams depend only on the path,
// never on the order in which tasks are scheduled.
inline std::uint64_t derive_seed(std::uint64_t master,
                                 std::initializer_list<std::uint64_t> path) {
  std::uint64_t h = splitmix64(master);
  for (std::uint64_t v : path) h = splitmix64(h ^ splitmix64(v + 0x632BE59BD9B4E019ULL));
  return h;
}

inline Engine make_engine(std::uint64_t master,
                          std::initializer_list<std::uint64_t> path) {
  return Engine(derive_seed(master, path));
}

}  // namespace pcma
