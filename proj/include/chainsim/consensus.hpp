#pragma once

#include <optional>

#include "chainsim/block_store.hpp"
#include "chainsim/pow.hpp"

namespace chainsim {

/// A block waiting for its proof of work. tx_root is computed on
/// construction so the template is always internally consistent.
class BlockTemplate {
public:
  BlockTemplate(std::uint64_t height, const Digest256 &prev_hash, std::uint64_t timestamp,
                DifficultyBits difficulty, const Address &miner,
                std::vector<Transaction> transactions);

  const BlockHeader &header() const { return header_; }
  const std::vector<Transaction> &transactions() const { return txs_; }

  Block seal(std::uint64_t pow_nonce) const;

private:
  BlockHeader header_;
  std::vector<Transaction> txs_;
};

struct MineResult {
  std::optional<Block> block;
  std::uint64_t attempts = 0;

  bool exhausted() const { return !block.has_value(); }
};

/// Sequential nonce search over [start_nonce, start_nonce + max_attempts).
/// Returns the smallest sealing nonce in range, or exhausted.
MineResult mine(const BlockTemplate &tmpl, std::uint64_t start_nonce,
                std::uint64_t max_attempts);

/// Longest chain; among tips of equal height the one stored first wins.
Digest256 fork_choice(const BlockStore &store);

/// A genesis block over `allocations`, sealed at `difficulty`.
Block make_genesis(std::vector<Allocation> allocations, DifficultyBits difficulty);

} // namespace chainsim
