#pragma once

#include <optional>
#include <set>
#include <unordered_map>

#include "chainsim/ledger.hpp"

namespace chainsim {

/// Tree of stored blocks rooted at genesis. Every stored non-genesis block
/// has its parent stored; blocks whose parent is unknown are the caller's
/// problem (see the node's orphan pool). Insertion order is recorded so that
/// fork choice can prefer the first-seen tip among equal heights.
class BlockStore {
public:
  explicit BlockStore(Block genesis);

  const Digest256 &genesis_hash() const { return genesis_hash_; }

  bool contains(const Digest256 &hash) const { return entries_.contains(hash); }
  const Block &get(const Digest256 &hash) const;
  const Block *find(const Digest256 &hash) const;

  /// Stores a block whose parent is already stored. Returns false if the
  /// block was already present. Throws std::invalid_argument if the parent
  /// is missing.
  bool insert(const Block &block);

  std::uint64_t arrival(const Digest256 &hash) const;
  const std::set<Digest256> &tips() const { return tips_; }
  const std::vector<Digest256> &children(const Digest256 &hash) const;
  std::size_t size() const { return entries_.size(); }

  const Digest256 &canonical_tip() const { return canonical_.back(); }
  std::uint64_t canonical_height() const { return canonical_.size() - 1; }

  /// Moves the canonical tip. The tip must be one of tips().
  void set_canonical_tip(const Digest256 &tip);

  /// Canonical block hash at `height`, if the canonical chain is that long.
  std::optional<Digest256> canonical_at(std::uint64_t height) const;
  bool is_canonical(const Digest256 &hash) const;

  /// Hashes from genesis to `tip` inclusive.
  std::vector<Digest256> path_to(const Digest256 &tip) const;

  /// Deepest block that is an ancestor of (or equal to) both arguments.
  Digest256 common_ancestor(const Digest256 &a, const Digest256 &b) const;

private:
  struct Entry {
    Block block;
    std::uint64_t arrival = 0;
    std::vector<Digest256> children;
  };

  Digest256 genesis_hash_;
  std::unordered_map<Digest256, Entry> entries_;
  std::set<Digest256> tips_;
  std::vector<Digest256> canonical_;
  std::uint64_t next_arrival_ = 0;
};

/// Replays genesis -> `tip` with full validation.
ChainVerdict verify_chain(const BlockStore &store, const Digest256 &tip);

} // namespace chainsim
