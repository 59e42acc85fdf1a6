#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace selectnet {

using Rng = std::mt19937_64;

/// Engine seeded from a base seed plus stream identifiers, so that
/// independent consumers of one seed draw unrelated sequences.
inline Rng make_rng(std::uint64_t seed, std::initializer_list<std::uint64_t> streams = {}) {
  std::vector<std::uint32_t> words;
  words.push_back(static_cast<std::uint32_t>(seed));
  words.push_back(static_cast<std::uint32_t>(seed >> 32));
  for (auto s : streams) {
    words.push_back(static_cast<std::uint32_t>(s));
    words.push_back(static_cast<std::uint32_t>(s >> 32));
  }
  std::seed_seq seq(words.begin(), words.end());
  return Rng(seq);
}

// Stream tags for make_rng.
namespace stream {
inline constexpr std::uint64_t kCarve = 1;
inline constexpr std::uint64_t kTestSplit = 2;
inline constexpr std::uint64_t kOversample = 3;
inline constexpr std::uint64_t kBatches = 4;
inline constexpr std::uint64_t kClassifierInit = 5;
inline constexpr std::uint64_t kSelectorInit = 6;
inline constexpr std::uint64_t kSelectorBatches = 7;
inline constexpr std::uint64_t kGenerator = 8;
}  // namespace stream

}  // namespace selectnet
