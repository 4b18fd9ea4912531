#pragma once

#include <map>
#include <optional>

#include "chainsim/ledger.hpp"

namespace chainsim {

inline constexpr std::size_t kDefaultMempoolCapacity = 10'000;

enum class InsertStatus { inserted, duplicate, bad_tx, pool_full };

std::string_view to_string(InsertStatus status);

struct InsertResult {
  InsertStatus status = InsertStatus::inserted;
  TxCode cause = TxCode::ok;
  std::optional<Digest256> evicted;

  bool ok() const { return status == InsertStatus::inserted; }
};

/// Validated pending transactions, served highest fee first.
///
/// A sender may queue consecutive nonces: each insert is validated against
/// the canonical state adjusted by that sender's pending entries (next nonce
/// and remaining balance), so every per-sender prefix in nonce order is a
/// valid block body. When full, the pool evicts the cheapest entry that is
/// the last pending nonce of some other sender, and only if the newcomer
/// pays a strictly higher fee.
class Mempool {
public:
  explicit Mempool(std::size_t capacity = kDefaultMempoolCapacity);

  InsertResult insert(const Transaction &tx, const AccountState &state);

  /// Up to `max_n` transactions with the largest total fee that a block can
  /// carry: each sender contributes a prefix of its pending nonces. Ties go
  /// to more transactions, then older arrivals. The result is ordered fee
  /// descending (earlier arrival first on equal fees) except that a sender's
  /// nonces always appear in ascending order.
  std::vector<Transaction> select_for_block(std::size_t max_n) const;

  /// Drops entries included in `block` and entries whose (sender, nonce)
  /// the block consumed.
  void remove_included(const Block &block);

  /// Re-inserts `displaced` transactions and revalidates every current entry
  /// against `state`; anything no longer valid is dropped silently.
  void reinstate(std::span<const Transaction> displaced, const AccountState &state);

  bool contains(const Digest256 &hash) const { return entries_.contains(hash); }
  const Transaction *find(const Digest256 &hash) const;
  std::size_t size() const { return entries_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return entries_.empty(); }
  void clear();

  /// Next nonce a new transaction from `sender` must carry.
  std::uint64_t pending_nonce(const Address &sender, const AccountState &state) const;

  /// Entries in arrival order, with their arrival sequence numbers.
  std::vector<std::pair<std::uint64_t, Transaction>> entries_by_arrival() const;

  /// Structural audit; throws std::logic_error on a broken invariant.
  void check_invariants(const AccountState &state) const;

private:
  struct Entry {
    Transaction tx;
    Address sender;
    std::uint64_t arrival = 0;
    std::uint64_t cost = 0;
  };

  InsertResult insert_entry(const Transaction &tx, const Digest256 &hash,
                            const AccountState &state, bool check_signature,
                            std::uint64_t arrival);
  void erase(const Digest256 &hash);
  std::optional<Digest256> eviction_candidate(const Address &exclude) const;

  std::size_t capacity_;
  std::map<Digest256, Entry> entries_;
  std::map<Address, std::map<std::uint64_t, Digest256>> by_sender_;
  std::map<Address, std::uint64_t> pending_spend_;
  std::uint64_t next_arrival_ = 0;
};

} // namespace chainsim
