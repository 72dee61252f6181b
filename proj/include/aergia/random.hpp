#pragma once

#include <cstdint>
#include <initializer_list>

namespace aergia {

// splitmix64 finaliser
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Independent stream seed for (master, tag, indices...). Tags keep streams for
// different purposes apart even when their indices coincide.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> parts) {
  std::uint64_t h = mix64(master);
  for (std::uint64_t p : parts) h = mix64(h ^ mix64(p + 0x632BE59BD9B4E019ULL));
  return h;
}

namespace stream {
inline constexpr std::uint64_t kDataset = 1;
inline constexpr std::uint64_t kSplit = 2;
inline constexpr std::uint64_t kPartition = 3;
inline constexpr std::uint64_t kSpeeds = 4;
inline constexpr std::uint64_t kSelection = 5;
inline constexpr std::uint64_t kModelInit = 6;
inline constexpr std::uint64_t kClientBatches = 7;
inline constexpr std::uint64_t kProfiler = 8;
}  // namespace stream

}  // namespace aergia
