#include "chainsim/node.hpp"

#include "chainsim/chain_file.hpp"
#include "chainsim/messages.hpp"

namespace chainsim {

using sim::MessageKind;
using sim::NodeIndex;

std::string_view to_string(BlockStatus status) {
  switch (status) {
  case BlockStatus::adopted: return "adopted";
  case BlockStatus::side_chain: return "side_chain";
  case BlockStatus::orphaned: return "orphaned";
  case BlockStatus::rejected: return "rejected";
  case BlockStatus::known: return "known";
  }
  return "unknown";
}

Node::Node(sim::Simulator &sim, NodeIndex index, KeyPair keys, const Block &genesis,
           NodeParams params)
    : sim_(sim), index_(index), keys_(std::move(keys)),
      node_id_(node_id_from_public_key(keys_.public_key())),
      address_(address_from_public_key(keys_.public_key())), genesis_(genesis), params_(params),
      mempool_(params.mempool_capacity), table_(node_id_, params.k) {
  if (auto v = validate_genesis(genesis_); !v.ok())
    throw std::invalid_argument("invalid genesis block: " + v.describe());
  load_chain({genesis_});
  persisted_chain_ = write_chain_file(std::span<const Block>(&genesis_, 1));
  sim_.set_handler(index_, [this](const sim::Envelope &e) { handle(e); });
}

void Node::load_chain(const std::vector<Block> &chain) {
  store_ = std::make_unique<BlockStore>(chain.front());
  state_after_.clear();
  AccountState state = genesis_state(chain.front());
  state_after_.emplace(store_->genesis_hash(), state);
  for (std::size_t i = 1; i < chain.size(); ++i) {
    AccountState next;
    auto v = validate_block(chain[i], chain[i - 1], state, &next);
    if (!v.ok())
      break;
    store_->insert(chain[i]);
    state = std::move(next);
    state_after_.emplace(block_hash(chain[i]), state);
    for (const auto &tx : chain[i].transactions)
      seen_txs_.insert(tx_hash(tx));
  }
  store_->set_canonical_tip(fork_choice(*store_));
  state_ = state_after_.at(store_->canonical_tip());
}

void Node::reset_volatile() {
  mempool_.clear();
  table_ = kademlia::RoutingTable(node_id_, params_.k);
  orphans_.clear();
  seen_txs_.clear();
  rejected_blocks_.clear();
  lookups_.clear();
  pending_pings_.clear();
  sync_ticking_ = false;
  sync_cursor_ = 0;
}

TxOutcome Node::on_transaction(const Transaction &tx, std::optional<NodeIndex> origin) {
  auto hash = tx_hash(tx);
  if (seen_txs_.contains(hash))
    return {TxStatus::duplicate, TxCode::duplicate};
  auto r = mempool_.insert(tx, state_);
  switch (r.status) {
  case InsertStatus::duplicate:
    seen_txs_.insert(hash);
    return {TxStatus::duplicate, TxCode::duplicate};
  case InsertStatus::bad_tx:
    return {TxStatus::rejected, r.cause};
  case InsertStatus::pool_full:
    return {TxStatus::pool_full, TxCode::ok};
  case InsertStatus::inserted:
    break;
  }
  seen_txs_.insert(hash);
  gossip(MessageKind::tx_announce, encode_transaction(tx), hash, origin);
  return {TxStatus::relayed, TxCode::ok};
}

BlockOutcome Node::on_block(const Block &block, std::optional<NodeIndex> origin) {
  auto hash = block_hash(block);
  if (store_->contains(hash) || rejected_blocks_.contains(hash))
    return {BlockStatus::known, {}};

  const Block *parent = store_->find(block.header.prev_hash);
  if (!parent) {
    bool parked = std::any_of(orphans_.begin(), orphans_.end(),
                              [&](const Block &b) { return block_hash(b) == hash; });
    if (!parked) {
      orphans_.push_back(block);
      if (orphans_.size() > params_.orphan_capacity)
        orphans_.pop_front();
    }
    if (origin)
      sync(*origin);
    return {BlockStatus::orphaned, {}};
  }

  AccountState after;
  auto verdict = validate_block(block, *parent, state_after_.at(block.header.prev_hash), &after);
  if (!verdict.ok()) {
    rejected_blocks_.insert(hash);
    return {BlockStatus::rejected, verdict};
  }

  store_->insert(block);
  state_after_.emplace(hash, std::move(after));
  for (const auto &tx : block.transactions)
    seen_txs_.insert(tx_hash(tx));
  gossip(MessageKind::block_announce, encode_block(block), hash, origin);
  update_canonical();

  BlockOutcome out{store_->is_canonical(hash) ? BlockStatus::adopted : BlockStatus::side_chain,
                   verdict};
  adopt_orphans(hash);
  return out;
}

void Node::adopt_orphans(const Digest256 &parent) {
  while (true) {
    auto it = std::find_if(orphans_.begin(), orphans_.end(),
                           [&](const Block &b) { return b.header.prev_hash == parent; });
    if (it == orphans_.end())
      return;
    Block child = std::move(*it);
    orphans_.erase(it);
    on_block(child, std::nullopt);
  }
}

void Node::update_canonical() {
  const Digest256 old_tip = store_->canonical_tip();
  const Digest256 new_tip = fork_choice(*store_);
  if (new_tip == old_tip)
    return;

  const Digest256 ancestor = store_->common_ancestor(old_tip, new_tip);
  auto branch = [&](Digest256 tip) {
    std::vector<const Block *> out;
    for (Digest256 h = tip; h != ancestor; h = store_->get(h).header.prev_hash)
      out.push_back(&store_->get(h));
    std::reverse(out.begin(), out.end());
    return out;
  };
  auto old_branch = branch(old_tip);
  auto new_branch = branch(new_tip);

  store_->set_canonical_tip(new_tip);
  state_ = state_after_.at(new_tip);

  std::unordered_set<Digest256> included;
  for (const Block *b : new_branch)
    for (const auto &tx : b->transactions)
      included.insert(tx_hash(tx));
  std::vector<Transaction> displaced;
  for (const Block *b : old_branch)
    for (const auto &tx : b->transactions)
      if (!included.contains(tx_hash(tx)))
        displaced.push_back(tx);

  for (const Block *b : new_branch)
    mempool_.remove_included(*b);
  mempool_.reinstate(displaced, state_);

  if (!old_branch.empty())
    ++stats_.reorgs;
  sim_.record("HEAD", index_,
              {{"height", store_->canonical_height()},
               {"hash", new_tip.hex()},
               {"reorg_depth", old_branch.size()}});

  // Peers that only saw these inside the abandoned branch need them again.
  for (const auto &tx : displaced) {
    auto h = tx_hash(tx);
    if (mempool_.contains(h))
      gossip(MessageKind::tx_announce, encode_transaction(tx), h, std::nullopt);
  }
}

void Node::gossip(MessageKind kind, const Bytes &body, const Digest256 &ref,
                  std::optional<NodeIndex> except) {
  for (const auto &c : table_.all_contacts()) {
    if (except && c.endpoint == *except)
      continue;
    if (kind == MessageKind::tx_announce)
      ++stats_.tx_announces_sent;
    else if (kind == MessageKind::block_announce)
      ++stats_.block_announces_sent;
    sim_.send(index_, c.endpoint, kind, body, ref);
  }
}

BlockTemplate Node::build_template() const {
  const Block &tip = store_->get(head_hash());
  return BlockTemplate(tip.header.height + 1, head_hash(),
                       std::max(sim_.now(), tip.header.timestamp), genesis_.header.difficulty_bits,
                       address_, mempool_.select_for_block(params_.max_block_txs));
}

Block Node::mine_block() {
  auto tmpl = build_template();
  std::uint64_t start = 0;
  while (true) {
    auto r = mine(tmpl, start, 1u << 20);
    if (r.block) {
      ++stats_.blocks_mined;
      const Block &block = *r.block;
      nlohmann::ordered_json txs = nlohmann::ordered_json::array();
      for (const auto &tx : block.transactions)
        txs.push_back(tx_hash(tx).hex());
      sim_.record("MINED", index_,
                  {{"height", block.header.height},
                   {"hash", block_hash(block).hex()},
                   {"prev", block.header.prev_hash.hex()},
                   {"txs", std::move(txs)}});
      on_block(block, std::nullopt);
      return block;
    }
    start += r.attempts;
  }
}

std::vector<Digest256> Node::locator() const {
  std::vector<Digest256> out;
  std::uint64_t height = head_height();
  std::uint64_t step = 1;
  while (true) {
    out.push_back(*store_->canonical_at(height));
    if (height == 0)
      break;
    if (out.size() >= 8)
      step *= 2;
    height = height > step ? height - step : 0;
  }
  return out;
}

void Node::sync(NodeIndex peer) {
  wire::GetBlocks m{head_height(), locator()};
  sim_.send(index_, peer, MessageKind::get_blocks, wire::encode(m));
}

void Node::on_get_blocks(const sim::Envelope &e) {
  auto m = wire::decode_get_blocks(e.body);
  if (head_height() <= m.tip_height)
    return;
  std::uint64_t fork = 0;
  for (const auto &h : m.locator) {
    if (store_->is_canonical(h)) {
      fork = store_->get(h).header.height;
      break;
    }
  }
  std::vector<Block> page;
  for (std::uint64_t h = fork + 1; h <= head_height() && page.size() < params_.sync_page; ++h)
    page.push_back(store_->get(*store_->canonical_at(h)));
  if (page.empty())
    return;
  ++stats_.blocks_payloads_sent;
  sim_.send(index_, e.from, MessageKind::blocks, wire::encode_blocks(page));
}

void Node::on_blocks(const sim::Envelope &e) {
  auto blocks = wire::decode_blocks(e.body);
  for (const auto &b : blocks)
    on_block(b, e.from);
  if (!blocks.empty() && blocks.size() >= params_.sync_page) {
    // Continue from the last block received, which the peer has on its
    // canonical chain even if we do not.
    wire::GetBlocks m{head_height(), locator()};
    m.locator.insert(m.locator.begin(), block_hash(blocks.back()));
    if (m.locator.size() > 0xff)
      m.locator.resize(0xff);
    sim_.send(index_, e.from, MessageKind::get_blocks, wire::encode(m));
  }
}

void Node::schedule_sync_tick() {
  if (params_.sync_interval_ms == 0 || sync_ticking_)
    return;
  sync_ticking_ = true;
  sim_.schedule(index_, params_.sync_interval_ms, [this] {
    sync_ticking_ = false;
    auto contacts = table_.all_contacts();
    if (!contacts.empty()) {
      std::sort(contacts.begin(), contacts.end(), [this](const auto &a, const auto &b) {
        return kademlia::xor_distance(a.node_id, node_id_) <
               kademlia::xor_distance(b.node_id, node_id_);
      });
      sync(contacts[sync_cursor_++ % contacts.size()].endpoint);
    }
    schedule_sync_tick();
  });
}

void Node::join(std::vector<kademlia::Contact> bootstraps) {
  schedule_sync_tick();
  try_join(std::move(bootstraps), 0);
}

void Node::try_join(std::vector<kademlia::Contact> bootstraps, std::size_t next) {
  if (bootstraps.empty())
    return;
  if (next >= bootstraps.size()) {
    sim_.schedule(index_, params_.join_retry_ms,
                  [this, bootstraps] { try_join(bootstraps, 0); });
    return;
  }
  kademlia::Contact boot = bootstraps[next];
  boot.last_seen = sim_.now();
  if (boot.node_id == node_id_) {
    try_join(std::move(bootstraps), next + 1);
    return;
  }
  table_.observe(boot);
  lookup(node_id_, [this, bootstraps, next, boot](const kademlia::LookupOutcome &out) {
    if (!out.failed)
      return;
    table_.remove(boot.node_id);
    sim_.schedule(index_, params_.join_retry_ms,
                  [this, bootstraps, next] { try_join(bootstraps, next + 1); });
  });
}

void Node::lookup(const NodeId &target, LookupCallback done) {
  auto seeds = table_.find_closest(target, params_.k);
  std::uint64_t id = next_lookup_id_++;
  lookups_.emplace(id, ActiveLookup{kademlia::IterativeLookup(node_id_, target, seeds, params_.k,
                                                              params_.alpha),
                                    std::move(done),
                                    {},
                                    0});
  start_round(id);
}

void Node::start_round(std::uint64_t lookup_id) {
  auto &active = lookups_.at(lookup_id);
  auto batch = active.search.next_round();
  if (batch.empty()) {
    finish_lookup(lookup_id);
    return;
  }
  std::uint64_t token = ++active.round_token;
  wire::FindNode query{node_id_, lookup_id, active.search.target()};
  auto body = wire::encode(query);
  for (const auto &c : batch) {
    active.outstanding.insert(c.node_id);
    sim_.send(index_, c.endpoint, MessageKind::find_node, body);
  }
  sim_.schedule(index_, params_.lookup_round_timeout_ms, [this, lookup_id, token] {
    auto it = lookups_.find(lookup_id);
    if (it == lookups_.end() || it->second.round_token != token ||
        it->second.outstanding.empty())
      return;
    // Iterate in a fixed order: the set's hash order must not leak into the run.
    std::vector<NodeId> silent(it->second.outstanding.begin(), it->second.outstanding.end());
    std::sort(silent.begin(), silent.end());
    for (const auto &id : silent) {
      it->second.search.on_failure(id);
      table_.remove(id);
    }
    it->second.outstanding.clear();
    start_round(lookup_id);
  });
}

void Node::finish_lookup(std::uint64_t lookup_id) {
  auto node = lookups_.extract(lookup_id);
  auto &active = node.mapped();
  kademlia::LookupOutcome out;
  out.contacts = active.search.result();
  out.rounds = active.search.rounds();
  out.failed = out.contacts.empty();
  if (active.done)
    active.done(out);
}

void Node::observe_peer(const kademlia::Contact &c) {
  if (c.node_id == node_id_)
    return;
  auto r = table_.observe(c);
  if (r.outcome != kademlia::ObserveOutcome::bucket_full)
    return;
  const kademlia::Contact stale = *r.stale_candidate;
  if (pending_pings_.contains(stale.node_id))
    return;
  pending_pings_.emplace(stale.node_id, c);
  sim_.send(index_, stale.endpoint, MessageKind::ping,
            wire::encode(wire::Ping{node_id_, next_ping_nonce_++}));
  sim_.schedule(index_, params_.ping_timeout_ms, [this, stale_id = stale.node_id] {
    auto it = pending_pings_.find(stale_id);
    if (it == pending_pings_.end())
      return;
    kademlia::Contact fresh = it->second;
    fresh.last_seen = sim_.now();
    pending_pings_.erase(it);
    table_.replace(stale_id, fresh);
  });
}

void Node::on_find_node(const sim::Envelope &e) {
  auto m = wire::decode_find_node(e.body);
  observe_peer({m.sender, e.from, sim_.now()});
  auto closest = table_.find_closest(m.target, params_.k + 1);
  std::erase_if(closest, [&](const kademlia::Contact &c) { return c.node_id == m.sender; });
  if (closest.size() > params_.k)
    closest.resize(params_.k);
  wire::FoundNodes reply{node_id_, m.lookup_id, std::move(closest)};
  sim_.send(index_, e.from, MessageKind::found_nodes, wire::encode(reply));
}

void Node::on_found_nodes(const sim::Envelope &e) {
  auto m = wire::decode_found_nodes(e.body);
  observe_peer({m.sender, e.from, sim_.now()});
  auto it = lookups_.find(m.lookup_id);
  if (it == lookups_.end() || it->second.outstanding.erase(m.sender) == 0)
    return;
  it->second.search.on_response(m.sender, m.contacts);
  if (it->second.outstanding.empty())
    start_round(m.lookup_id);
}

void Node::on_ping(const sim::Envelope &e) {
  auto m = wire::decode_ping(e.body);
  observe_peer({m.sender, e.from, sim_.now()});
  sim_.send(index_, e.from, MessageKind::pong, wire::encode(wire::Ping{node_id_, m.nonce}));
}

void Node::on_pong(const sim::Envelope &e) {
  auto m = wire::decode_ping(e.body);
  pending_pings_.erase(m.sender);
  observe_peer({m.sender, e.from, sim_.now()});
}

void Node::handle(const sim::Envelope &e) {
  try {
    switch (e.kind) {
    case MessageKind::tx_announce:
      on_transaction(decode_transaction(e.body), e.from);
      break;
    case MessageKind::block_announce:
      on_block(decode_block(e.body), e.from);
      break;
    case MessageKind::get_blocks: on_get_blocks(e); break;
    case MessageKind::blocks: on_blocks(e); break;
    case MessageKind::find_node: on_find_node(e); break;
    case MessageKind::found_nodes: on_found_nodes(e); break;
    case MessageKind::ping: on_ping(e); break;
    case MessageKind::pong: on_pong(e); break;
    }
  } catch (const DecodeError &) {
    // Malformed peer input is dropped.
  }
}

void Node::checkpoint() {
  auto chain = canonical_chain();
  persisted_chain_ = write_chain_file(chain);
}

void Node::restart(std::vector<kademlia::Contact> bootstraps) {
  auto verdict = verify_chain_file(persisted_chain_);
  std::vector<Block> chain = std::move(verdict.blocks);
  if (chain.empty())
    chain.push_back(genesis_);
  reset_volatile();
  load_chain(chain);
  join(std::move(bootstraps));
}

std::vector<Block> Node::canonical_chain() const {
  std::vector<Block> out;
  for (const auto &h : store_->path_to(head_hash()))
    out.push_back(store_->get(h));
  return out;
}

std::optional<std::uint64_t> Node::confirmation_height(const Digest256 &tx) const {
  for (std::uint64_t h = 1; h <= head_height(); ++h)
    for (const auto &t : store_->get(*store_->canonical_at(h)).transactions)
      if (tx_hash(t) == tx)
        return h;
  return std::nullopt;
}

Digest256 Node::fingerprint() const {
  ByteWriter w;
  w.fixed(head_hash());
  w.fixed(state_.digest());
  w.u64(store_->size());
  for (const auto &[arrival, tx] : mempool_.entries_by_arrival()) {
    w.u64(arrival);
    w.fixed(tx_hash(tx));
  }
  w.u64(orphans_.size());
  return hash_bytes(w.bytes());
}

void Node::audit() const {
  auto verdict = verify_chain(*store_, head_hash());
  if (!verdict.ok)
    throw std::logic_error("node " + std::to_string(index_) + ": canonical chain invalid at " +
                           std::to_string(verdict.failed_height) + " (" +
                           verdict.cause.describe() + ")");
  if (!(verdict.state == state_))
    throw std::logic_error("node " + std::to_string(index_) +
                           ": canonical state differs from replay");
  if (fork_choice(*store_) != head_hash())
    throw std::logic_error("node " + std::to_string(index_) + ": head is not the fork choice");
  mempool_.check_invariants(state_);
  table_.check_invariants();
}

} // namespace chainsim
