#pragma once

#include <array>
#include <deque>
#include <functional>
#include <map>
#include <optional>

#include "chainsim/crypto.hpp"

namespace chainsim::kademlia {

inline constexpr std::size_t kIdBits = 160;
inline constexpr std::size_t kBucketSize = 8; // k
inline constexpr std::size_t kAlpha = 3;

/// XOR distance between two identifiers, compared as a 160-bit unsigned
/// big-endian integer.
using Distance = FixedBytes<20, struct DistanceTag>;

Distance xor_distance(const NodeId &a, const NodeId &b);

/// Index of the highest set bit of the distance (0 = least significant).
/// Throws std::invalid_argument when the ids are equal.
std::size_t bucket_index(const NodeId &owner, const NodeId &other);

/// Highest set bit of a non-zero distance; nullopt for zero.
std::optional<std::size_t> highest_bit(const Distance &d);

struct Contact {
  NodeId node_id;
  std::size_t endpoint = 0; // simulated address (node index)
  std::uint64_t last_seen = 0;
};

enum class ObserveOutcome { appended, refreshed, bucket_full, ignored_self };

struct ObserveResult {
  ObserveOutcome outcome;
  /// Least-recently-seen occupant to probe when the bucket is full.
  std::optional<Contact> stale_candidate;
};

/// k-bucket routing table: 160 buckets ordered least-recently-seen first.
/// Contact c lives in bucket bucket_index(owner, c) and the owner is never stored.
class RoutingTable {
public:
  explicit RoutingTable(NodeId owner, std::size_t k = kBucketSize);

  const NodeId &owner() const { return owner_; }
  std::size_t k() const { return k_; }

  /// Present -> moved to the tail. Room -> appended. Full -> nothing changes
  /// and the least-recently-seen occupant is returned for a liveness probe.
  ObserveResult observe(const Contact &contact);

  /// Full eviction step: when the bucket is full, `is_alive` decides between
  /// keeping the stale occupant (refreshed) and replacing it with `contact`.
  ObserveOutcome observe(const Contact &contact,
                         const std::function<bool(const Contact &)> &is_alive);

  /// Occupant answered: moves it to the most-recently-seen end.
  void touch(const NodeId &id, std::uint64_t now);

  /// Replaces `stale` with `fresh` (same bucket), if `stale` is still present
  /// and `fresh` is not. Returns whether the replacement happened.
  bool replace(const NodeId &stale, const Contact &fresh);

  bool remove(const NodeId &id);
  bool contains(const NodeId &id) const;
  const Contact *find(const NodeId &id) const;

  /// Up to n known contacts closest to `target`, ascending distance.
  std::vector<Contact> find_closest(const NodeId &target, std::size_t n) const;

  std::vector<Contact> all_contacts() const;
  std::size_t size() const;
  const std::deque<Contact> &bucket(std::size_t index) const { return buckets_.at(index); }

  /// Placement audit; throws std::logic_error on any violation.
  void check_invariants() const;

private:
  NodeId owner_;
  std::size_t k_;
  std::array<std::deque<Contact>, kIdBits> buckets_;
};

/// Round-based iterative node lookup. Each round queries up to alpha of the
/// closest unqueried contacts among the k closest known; a round that fails
/// to get closer to the target queries all remaining unqueried members of
/// the k closest instead. Finished once the k closest non-failed contacts
/// have all answered.
class IterativeLookup {
public:
  IterativeLookup(NodeId self, NodeId target, std::span<const Contact> seeds,
                  std::size_t k = kBucketSize, std::size_t alpha = kAlpha);

  const NodeId &target() const { return target_; }

  /// Contacts to query in the next round; empty once the lookup has finished.
  /// Every contact handed out must be resolved with on_response/on_failure
  /// before the next call.
  std::vector<Contact> next_round();

  void on_response(const NodeId &from, std::span<const Contact> found);
  void on_failure(const NodeId &from);

  bool finished() const { return finished_; }
  std::size_t rounds() const { return rounds_; }
  bool awaiting(const NodeId &id) const;

  /// Smallest distance of any non-failed shortlist entry.
  std::optional<Distance> best_distance() const;

  /// The k closest contacts that answered, ascending distance.
  std::vector<Contact> result() const;

private:
  enum class State { unqueried, in_flight, responded, failed };
  struct Entry {
    Contact contact;
    State state = State::unqueried;
  };

  void add(const Contact &c);

  NodeId self_;
  NodeId target_;
  std::size_t k_;
  std::size_t alpha_;
  std::map<Distance, Entry> shortlist_;
  std::optional<Distance> best_before_round_;
  bool first_round_ = true;
  bool finished_ = false;
  std::size_t rounds_ = 0;
};

using QueryFn = std::function<std::optional<std::vector<Contact>>(const Contact &)>;

struct LookupOutcome {
  std::vector<Contact> contacts;
  std::size_t rounds = 0;
  bool failed = false;
};

/// Synchronous driver: `query` answers FIND_NODE for a contact or returns
/// nullopt if it is unreachable. Every responder is observed into `table`.
LookupOutcome iterative_lookup(RoutingTable &table, const NodeId &target, const QueryFn &query,
                               std::size_t k = kBucketSize, std::size_t alpha = kAlpha);

} // namespace chainsim::kademlia
