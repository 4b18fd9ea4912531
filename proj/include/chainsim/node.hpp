#pragma once

#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <unordered_map>
#include <unordered_set>

#include "chainsim/block_store.hpp"
#include "chainsim/consensus.hpp"
#include "chainsim/kademlia.hpp"
#include "chainsim/mempool.hpp"
#include "chainsim/net_sim.hpp"

namespace chainsim {

struct NodeParams {
  std::size_t k = kademlia::kBucketSize;
  std::size_t alpha = kademlia::kAlpha;
  std::size_t mempool_capacity = kDefaultMempoolCapacity;
  std::size_t max_block_txs = kMaxBlockTxs;
  std::size_t orphan_capacity = 64;
  std::size_t sync_page = 32;
  /// Period of the background GET_BLOCKS probe; 0 disables it.
  sim::SimTime sync_interval_ms = 1000;
  sim::SimTime lookup_round_timeout_ms = 1000;
  sim::SimTime ping_timeout_ms = 1000;
  sim::SimTime join_retry_ms = 2000;
};

enum class TxStatus { relayed, rejected, duplicate, pool_full };

struct TxOutcome {
  TxStatus status = TxStatus::relayed;
  TxCode cause = TxCode::ok;
};

enum class BlockStatus { adopted, side_chain, orphaned, rejected, known };

std::string_view to_string(BlockStatus status);

struct BlockOutcome {
  BlockStatus status = BlockStatus::known;
  BlockVerdict verdict;
};

struct NodeStats {
  std::uint64_t tx_announces_sent = 0;
  std::uint64_t block_announces_sent = 0;
  std::uint64_t blocks_payloads_sent = 0;
  std::uint64_t reorgs = 0;
  std::uint64_t blocks_mined = 0;
};

/// One peer: block tree, canonical state, mempool, routing table and the
/// message handlers that move transactions and blocks through validation,
/// gossip, mining and settlement. All handlers run on the simulator's
/// single dispatch context.
class Node {
public:
  using LookupCallback = std::function<void(const kademlia::LookupOutcome &)>;

  Node(sim::Simulator &sim, sim::NodeIndex index, KeyPair keys, const Block &genesis,
       NodeParams params = {});

  Node(const Node &) = delete;
  Node &operator=(const Node &) = delete;

  sim::NodeIndex index() const { return index_; }
  const NodeId &node_id() const { return node_id_; }
  const Address &address() const { return address_; }
  const KeyPair &keys() const { return keys_; }
  kademlia::Contact contact() const { return {node_id_, index_, sim_.now()}; }

  /// Validates against canonical state plus pending nonces; valid
  /// transactions enter the mempool and are gossiped to every contact
  /// except `origin`.
  TxOutcome on_transaction(const Transaction &tx, std::optional<sim::NodeIndex> origin);

  /// Stores valid blocks (relaying them), reorganises onto the longest
  /// chain, and parks blocks with unknown parents as orphans while
  /// requesting the missing ancestry from `origin`.
  BlockOutcome on_block(const Block &block, std::optional<sim::NodeIndex> origin);

  BlockTemplate build_template() const;

  /// Seals the current template with a real proof-of-work search, adopts the
  /// block locally and announces it.
  Block mine_block();

  /// Sends GET_BLOCKS with a locator of the local canonical chain.
  void sync(sim::NodeIndex peer);

  /// Adds the first reachable bootstrap to the table and looks up our own
  /// id; later candidates are tried if a lookup gets no answers.
  void join(std::vector<kademlia::Contact> bootstraps);

  void lookup(const NodeId &target, LookupCallback done);

  /// Persists the canonical chain (the node's simulated disk).
  void checkpoint();
  /// Clears all volatile state, reloads the persisted chain and rejoins.
  void restart(std::vector<kademlia::Contact> bootstraps);

  /// Entry point for simulator deliveries.
  void handle(const sim::Envelope &envelope);

  const BlockStore &store() const { return *store_; }
  const AccountState &state() const { return state_; }
  const Mempool &mempool() const { return mempool_; }
  const kademlia::RoutingTable &routing_table() const { return table_; }
  const NodeStats &stats() const { return stats_; }
  std::size_t orphan_count() const { return orphans_.size(); }
  const std::string &persisted_chain() const { return persisted_chain_; }

  const Digest256 &head_hash() const { return store_->canonical_tip(); }
  std::uint64_t head_height() const { return store_->canonical_height(); }
  std::vector<Block> canonical_chain() const;

  /// Height of the canonical block containing `tx`, if any.
  std::optional<std::uint64_t> confirmation_height(const Digest256 &tx) const;

  /// Digest over head, canonical state and mempool contents.
  Digest256 fingerprint() const;

  /// Full replay and structural audits; throws std::logic_error on failure.
  void audit() const;

private:
  struct ActiveLookup {
    kademlia::IterativeLookup search;
    LookupCallback done;
    std::unordered_set<NodeId> outstanding;
    std::uint64_t round_token = 0;
  };

  void reset_volatile();
  void load_chain(const std::vector<Block> &chain);
  void gossip(sim::MessageKind kind, const Bytes &body, const Digest256 &ref,
              std::optional<sim::NodeIndex> except);
  void update_canonical();
  void adopt_orphans(const Digest256 &parent);
  std::vector<Digest256> locator() const;
  void schedule_sync_tick();
  void try_join(std::vector<kademlia::Contact> bootstraps, std::size_t next);

  void observe_peer(const kademlia::Contact &c);
  void start_round(std::uint64_t lookup_id);
  void finish_lookup(std::uint64_t lookup_id);

  void on_get_blocks(const sim::Envelope &e);
  void on_blocks(const sim::Envelope &e);
  void on_find_node(const sim::Envelope &e);
  void on_found_nodes(const sim::Envelope &e);
  void on_ping(const sim::Envelope &e);
  void on_pong(const sim::Envelope &e);

  sim::Simulator &sim_;
  sim::NodeIndex index_;
  KeyPair keys_;
  NodeId node_id_;
  Address address_;
  Block genesis_;
  NodeParams params_;

  std::unique_ptr<BlockStore> store_;
  std::unordered_map<Digest256, AccountState> state_after_;
  AccountState state_;
  Mempool mempool_;
  kademlia::RoutingTable table_;
  std::deque<Block> orphans_;
  std::unordered_set<Digest256> seen_txs_;
  std::unordered_set<Digest256> rejected_blocks_;

  std::map<std::uint64_t, ActiveLookup> lookups_;
  std::uint64_t next_lookup_id_ = 1;
  /// stale occupant id -> newcomer waiting for its bucket slot
  std::unordered_map<NodeId, kademlia::Contact> pending_pings_;
  std::uint64_t next_ping_nonce_ = 1;
  std::size_t sync_cursor_ = 0;
  bool sync_ticking_ = false;

  std::string persisted_chain_;
  NodeStats stats_;
};

} // namespace chainsim
