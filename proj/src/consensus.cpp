#include "chainsim/consensus.hpp"

#include <limits>

namespace chainsim {

bool meets_difficulty(const Digest256 &block_hash, DifficultyBits difficulty) {
  unsigned remaining = difficulty;
  for (std::uint8_t byte : block_hash.bytes) {
    if (remaining == 0)
      return true;
    if (remaining >= 8) {
      if (byte != 0)
        return false;
      remaining -= 8;
    } else {
      return (byte >> (8 - remaining)) == 0;
    }
  }
  return remaining == 0;
}

std::uint64_t block_reward(std::uint64_t height) {
  if (height == 0)
    throw std::invalid_argument("genesis has no block reward");
  return kBlockReward;
}

BlockTemplate::BlockTemplate(std::uint64_t height, const Digest256 &prev_hash,
                             std::uint64_t timestamp, DifficultyBits difficulty,
                             const Address &miner, std::vector<Transaction> transactions)
    : txs_(std::move(transactions)) {
  header_.height = height;
  header_.prev_hash = prev_hash;
  header_.timestamp = timestamp;
  header_.difficulty_bits = difficulty;
  header_.miner = miner;
  header_.tx_root = compute_tx_root(txs_);
}

Block BlockTemplate::seal(std::uint64_t pow_nonce) const {
  Block b;
  b.header = header_;
  b.header.pow_nonce = pow_nonce;
  b.transactions = txs_;
  return b;
}

MineResult mine(const BlockTemplate &tmpl, std::uint64_t start_nonce,
                std::uint64_t max_attempts) {
  auto header = encode_header(tmpl.header());
  const DifficultyBits d = tmpl.header().difficulty_bits;
  MineResult result;
  for (std::uint64_t i = 0; i < max_attempts; ++i) {
    std::uint64_t nonce = start_nonce + i;
    for (int b = 0; b < 8; ++b)
      header[kPowNonceOffset + b] = static_cast<std::uint8_t>(nonce >> (8 * (7 - b)));
    ++result.attempts;
    if (meets_difficulty(hash_bytes(header), d)) {
      result.block = tmpl.seal(nonce);
      return result;
    }
    if (nonce == std::numeric_limits<std::uint64_t>::max())
      break;
  }
  return result;
}

Digest256 fork_choice(const BlockStore &store) {
  const Digest256 *best = nullptr;
  std::uint64_t best_height = 0, best_arrival = 0;
  for (const auto &tip : store.tips()) {
    std::uint64_t h = store.get(tip).header.height;
    std::uint64_t seen = store.arrival(tip);
    if (!best || h > best_height || (h == best_height && seen < best_arrival)) {
      best = &tip;
      best_height = h;
      best_arrival = seen;
    }
  }
  return *best;
}

Block make_genesis(std::vector<Allocation> allocations, DifficultyBits difficulty) {
  Block g;
  g.allocations = std::move(allocations);
  g.header.difficulty_bits = difficulty;
  g.header.tx_root = compute_allocation_root(g.allocations);
  auto header = g.header;
  for (std::uint64_t nonce = 0;; ++nonce) {
    header.pow_nonce = nonce;
    if (meets_difficulty(block_hash(header), difficulty))
      break;
  }
  g.header = header;
  return g;
}

} // namespace chainsim
