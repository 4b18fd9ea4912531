#pragma once

#include "chainsim/crypto.hpp"

namespace chainsim {

/// Required number of leading zero bits in a block hash (0-255).
using DifficultyBits = std::uint8_t;

inline constexpr std::uint64_t kBlockReward = 50;

/// True iff the first `difficulty` bits of `block_hash` are zero.
bool meets_difficulty(const Digest256 &block_hash, DifficultyBits difficulty);

/// Newly minted units credited to the miner of the block at `height`.
/// Throws std::invalid_argument for height 0: genesis mints only its allocations.
std::uint64_t block_reward(std::uint64_t height);

} // namespace chainsim
