#pragma once

#include <cstdint>
#include <random>

namespace chebtt {

// splitmix64: cheap, well-mixed 64-bit finalizer. Used to derive independent
// substreams from a single root seed so results never depend on scheduling:
// stream(seed, tag, block) is a pure function of its arguments.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Named substreams of the experiment root seed. One tag per purpose; blocks
// within a purpose (e.g. Monte Carlo path blocks) key off the block index.
enum class StreamTag : std::uint64_t {
  kThetaSampling = 1,
  kMonteCarlo = 2,
  kCompletion = 3,
  kCalibration = 4,
  kSampleSelection = 5,
  kBenchmark = 6,
};

inline std::uint64_t derive_stream(std::uint64_t root_seed, StreamTag tag,
                                   std::uint64_t block = 0) {
  std::uint64_t s = splitmix64(root_seed ^ (0x517cc1b727220a95ULL * static_cast<std::uint64_t>(tag)));
  return splitmix64(s ^ (0xd1342543de82ef95ULL * (block + 1)));
}

inline std::mt19937_64 make_engine(std::uint64_t root_seed, StreamTag tag,
                                   std::uint64_t block = 0) {
  return std::mt19937_64(derive_stream(root_seed, tag, block));
}

}  // namespace chebtt
