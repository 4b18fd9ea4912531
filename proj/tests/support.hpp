// Helpers shared by the unit and acceptance suites.
#pragma once

#include "chainsim/consensus.hpp"
#include "chainsim/ledger.hpp"

namespace chainsim::testing {

inline KeyPair test_key(std::uint64_t i) { return generate_keypair(derive_seed("test-key", i)); }

inline Address addr_of(const KeyPair &k) { return address_from_public_key(k.public_key()); }

/// Seals a child of `parent` by sequential search.
inline Block mine_child(const Block &parent, std::vector<Transaction> txs, const Address &miner,
                        std::uint64_t timestamp_step = 1000) {
  BlockTemplate tmpl(parent.header.height + 1, block_hash(parent),
                     parent.header.timestamp + timestamp_step, parent.header.difficulty_bits,
                     miner, std::move(txs));
  for (std::uint64_t start = 0;; start += 1u << 20) {
    auto r = mine(tmpl, start, 1u << 20);
    if (r.block)
      return *r.block;
  }
}

/// Re-seals a block after its header or body was edited.
inline Block reseal(Block b) {
  BlockTemplate tmpl(b.header.height, b.header.prev_hash, b.header.timestamp,
                     b.header.difficulty_bits, b.header.miner, b.transactions);
  for (std::uint64_t start = 0;; start += 1u << 20) {
    auto r = mine(tmpl, start, 1u << 20);
    if (r.block)
      return *r.block;
  }
}

} // namespace chainsim::testing
