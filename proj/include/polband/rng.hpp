#pragma once

#include <cstdint>
#include <random>

namespace polband {

/// Roles that get their own random substream within a replicate.
enum class StreamRole : std::uint64_t {
  data = 1,
  bootstrap = 2,
  split = 3,
  folds = 4,
  optimizer = 5,
};

/// Mixes a sequence of words into one 64-bit seed (splitmix64 finalizer).
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0,
                          std::uint64_t c = 0);

/// Engine for substream (master, replicate, role, index); independent of the
/// thread that consumes it.
inline std::mt19937_64 substream(std::uint64_t master, std::uint64_t replicate, StreamRole role,
                                 std::uint64_t index = 0) {
  return std::mt19937_64(
      derive_seed(master, replicate, static_cast<std::uint64_t>(role), index));
}

}  // namespace polband
