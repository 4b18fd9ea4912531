#include "chainsim/block_store.hpp"

namespace chainsim {

BlockStore::BlockStore(Block genesis) {
  genesis_hash_ = block_hash(genesis);
  entries_.emplace(genesis_hash_, Entry{std::move(genesis), next_arrival_++, {}});
  tips_.insert(genesis_hash_);
  canonical_.push_back(genesis_hash_);
}

const Block &BlockStore::get(const Digest256 &hash) const {
  auto it = entries_.find(hash);
  if (it == entries_.end())
    throw std::out_of_range("unknown block " + hash.hex());
  return it->second.block;
}

const Block *BlockStore::find(const Digest256 &hash) const {
  auto it = entries_.find(hash);
  return it == entries_.end() ? nullptr : &it->second.block;
}

bool BlockStore::insert(const Block &block) {
  auto hash = block_hash(block);
  if (entries_.contains(hash))
    return false;
  auto parent = entries_.find(block.header.prev_hash);
  if (parent == entries_.end())
    throw std::invalid_argument("parent of " + hash.hex() + " is not stored");
  parent->second.children.push_back(hash);
  tips_.erase(block.header.prev_hash);
  tips_.insert(hash);
  entries_.emplace(hash, Entry{block, next_arrival_++, {}});
  return true;
}

std::uint64_t BlockStore::arrival(const Digest256 &hash) const {
  return entries_.at(hash).arrival;
}

const std::vector<Digest256> &BlockStore::children(const Digest256 &hash) const {
  return entries_.at(hash).children;
}

void BlockStore::set_canonical_tip(const Digest256 &tip) {
  if (!tips_.contains(tip))
    throw std::invalid_argument("canonical tip must be a leaf");
  std::uint64_t height = get(tip).header.height;
  canonical_.resize(height + 1);
  Digest256 cursor = tip;
  for (std::uint64_t h = height;; --h) {
    if (canonical_[h] == cursor && h != height)
      break;
    canonical_[h] = cursor;
    if (h == 0)
      break;
    cursor = get(cursor).header.prev_hash;
  }
}

std::optional<Digest256> BlockStore::canonical_at(std::uint64_t height) const {
  if (height >= canonical_.size())
    return std::nullopt;
  return canonical_[height];
}

bool BlockStore::is_canonical(const Digest256 &hash) const {
  const Block *b = find(hash);
  return b && b->header.height < canonical_.size() && canonical_[b->header.height] == hash;
}

std::vector<Digest256> BlockStore::path_to(const Digest256 &tip) const {
  std::vector<Digest256> path;
  Digest256 cursor = tip;
  while (true) {
    const Block &b = get(cursor);
    path.push_back(cursor);
    if (b.header.height == 0)
      break;
    cursor = b.header.prev_hash;
  }
  std::reverse(path.begin(), path.end());
  return path;
}

Digest256 BlockStore::common_ancestor(const Digest256 &a, const Digest256 &b) const {
  Digest256 x = a, y = b;
  while (get(x).header.height > get(y).header.height)
    x = get(x).header.prev_hash;
  while (get(y).header.height > get(x).header.height)
    y = get(y).header.prev_hash;
  while (x != y) {
    x = get(x).header.prev_hash;
    y = get(y).header.prev_hash;
  }
  return x;
}

ChainVerdict verify_chain(const BlockStore &store, const Digest256 &tip) {
  std::vector<Block> chain;
  for (const auto &h : store.path_to(tip))
    chain.push_back(store.get(h));
  return verify_blocks(chain);
}

} // namespace chainsim
