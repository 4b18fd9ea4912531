#include "chainsim/kademlia.hpp"

#include <bit>

namespace chainsim::kademlia {

Distance xor_distance(const NodeId &a, const NodeId &b) {
  Distance d;
  for (std::size_t i = 0; i < d.bytes.size(); ++i)
    d.bytes[i] = a.bytes[i] ^ b.bytes[i];
  return d;
}

std::optional<std::size_t> highest_bit(const Distance &d) {
  for (std::size_t i = 0; i < d.bytes.size(); ++i) {
    if (d.bytes[i] == 0)
      continue;
    std::size_t bit = 7 - static_cast<std::size_t>(std::countl_zero(d.bytes[i]));
    return (d.bytes.size() - 1 - i) * 8 + bit;
  }
  return std::nullopt;
}

std::size_t bucket_index(const NodeId &owner, const NodeId &other) {
  auto bit = highest_bit(xor_distance(owner, other));
  if (!bit)
    throw std::invalid_argument("bucket_index of identical ids");
  return *bit;
}

RoutingTable::RoutingTable(NodeId owner, std::size_t k) : owner_(owner), k_(k) {
  if (k == 0)
    throw std::invalid_argument("bucket size must be positive");
}

ObserveResult RoutingTable::observe(const Contact &contact) {
  if (contact.node_id == owner_)
    return {ObserveOutcome::ignored_self, std::nullopt};
  auto &bucket = buckets_[bucket_index(owner_, contact.node_id)];
  auto it = std::find_if(bucket.begin(), bucket.end(),
                         [&](const Contact &c) { return c.node_id == contact.node_id; });
  if (it != bucket.end()) {
    bucket.erase(it);
    bucket.push_back(contact);
    return {ObserveOutcome::refreshed, std::nullopt};
  }
  if (bucket.size() < k_) {
    bucket.push_back(contact);
    return {ObserveOutcome::appended, std::nullopt};
  }
  return {ObserveOutcome::bucket_full, bucket.front()};
}

ObserveOutcome RoutingTable::observe(const Contact &contact,
                                     const std::function<bool(const Contact &)> &is_alive) {
  auto r = observe(contact);
  if (r.outcome != ObserveOutcome::bucket_full)
    return r.outcome;
  const Contact stale = *r.stale_candidate;
  if (is_alive(stale)) {
    touch(stale.node_id, contact.last_seen);
    return ObserveOutcome::bucket_full;
  }
  replace(stale.node_id, contact);
  return ObserveOutcome::appended;
}

void RoutingTable::touch(const NodeId &id, std::uint64_t now) {
  if (id == owner_)
    return;
  auto &bucket = buckets_[bucket_index(owner_, id)];
  auto it = std::find_if(bucket.begin(), bucket.end(),
                         [&](const Contact &c) { return c.node_id == id; });
  if (it == bucket.end())
    return;
  Contact c = *it;
  c.last_seen = now;
  bucket.erase(it);
  bucket.push_back(c);
}

bool RoutingTable::replace(const NodeId &stale, const Contact &fresh) {
  if (stale == owner_ || fresh.node_id == owner_ || contains(fresh.node_id))
    return false;
  std::size_t index = bucket_index(owner_, stale);
  if (bucket_index(owner_, fresh.node_id) != index)
    return false;
  auto &bucket = buckets_[index];
  auto it = std::find_if(bucket.begin(), bucket.end(),
                         [&](const Contact &c) { return c.node_id == stale; });
  if (it == bucket.end())
    return false;
  bucket.erase(it);
  bucket.push_back(fresh);
  return true;
}

bool RoutingTable::remove(const NodeId &id) {
  if (id == owner_)
    return false;
  auto &bucket = buckets_[bucket_index(owner_, id)];
  auto it = std::find_if(bucket.begin(), bucket.end(),
                         [&](const Contact &c) { return c.node_id == id; });
  if (it == bucket.end())
    return false;
  bucket.erase(it);
  return true;
}

const Contact *RoutingTable::find(const NodeId &id) const {
  if (id == owner_)
    return nullptr;
  const auto &bucket = buckets_[bucket_index(owner_, id)];
  auto it = std::find_if(bucket.begin(), bucket.end(),
                         [&](const Contact &c) { return c.node_id == id; });
  return it == bucket.end() ? nullptr : &*it;
}

bool RoutingTable::contains(const NodeId &id) const { return find(id) != nullptr; }

std::vector<Contact> RoutingTable::all_contacts() const {
  std::vector<Contact> out;
  for (const auto &bucket : buckets_)
    out.insert(out.end(), bucket.begin(), bucket.end());
  return out;
}

std::size_t RoutingTable::size() const {
  std::size_t n = 0;
  for (const auto &bucket : buckets_)
    n += bucket.size();
  return n;
}

std::vector<Contact> RoutingTable::find_closest(const NodeId &target, std::size_t n) const {
  auto all = all_contacts();
  auto closer = [&](const Contact &a, const Contact &b) {
    return xor_distance(a.node_id, target) < xor_distance(b.node_id, target);
  };
  std::size_t take = std::min(n, all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(take), all.end(),
                    closer);
  all.resize(take);
  return all;
}

void RoutingTable::check_invariants() const {
  std::map<NodeId, int> seen;
  for (std::size_t i = 0; i < buckets_.size(); ++i) {
    if (buckets_[i].size() > k_)
      throw std::logic_error("bucket " + std::to_string(i) + " over capacity");
    for (const auto &c : buckets_[i]) {
      if (c.node_id == owner_)
        throw std::logic_error("owner stored in its own table");
      if (bucket_index(owner_, c.node_id) != i)
        throw std::logic_error("contact " + c.node_id.hex() + " in wrong bucket");
      if (++seen[c.node_id] > 1)
        throw std::logic_error("contact " + c.node_id.hex() + " stored twice");
    }
  }
}

IterativeLookup::IterativeLookup(NodeId self, NodeId target, std::span<const Contact> seeds,
                                 std::size_t k, std::size_t alpha)
    : self_(self), target_(target), k_(k), alpha_(alpha) {
  for (const auto &c : seeds)
    add(c);
}

void IterativeLookup::add(const Contact &c) {
  if (c.node_id == self_)
    return;
  shortlist_.try_emplace(xor_distance(c.node_id, target_), Entry{c, State::unqueried});
}

std::optional<Distance> IterativeLookup::best_distance() const {
  for (const auto &[d, e] : shortlist_)
    if (e.state != State::failed)
      return d;
  return std::nullopt;
}

std::vector<Contact> IterativeLookup::next_round() {
  if (finished_)
    return {};
  std::vector<Entry *> closest;
  for (auto &[_, e] : shortlist_) {
    if (e.state == State::failed)
      continue;
    if (e.state == State::in_flight)
      throw std::logic_error("lookup round started with queries outstanding");
    closest.push_back(&e);
    if (closest.size() == k_)
      break;
  }
  std::vector<Entry *> unqueried;
  for (Entry *e : closest)
    if (e->state == State::unqueried)
      unqueried.push_back(e);
  if (unqueried.empty()) {
    finished_ = true;
    return {};
  }

  auto best = best_distance();
  bool improved = first_round_ || (best && best_before_round_ && *best < *best_before_round_);
  std::size_t take = improved ? std::min(alpha_, unqueried.size()) : unqueried.size();

  std::vector<Contact> batch;
  for (std::size_t i = 0; i < take; ++i) {
    unqueried[i]->state = State::in_flight;
    batch.push_back(unqueried[i]->contact);
  }
  best_before_round_ = best;
  first_round_ = false;
  ++rounds_;
  return batch;
}

bool IterativeLookup::awaiting(const NodeId &id) const {
  auto it = shortlist_.find(xor_distance(id, target_));
  return it != shortlist_.end() && it->second.state == State::in_flight;
}

void IterativeLookup::on_response(const NodeId &from, std::span<const Contact> found) {
  auto it = shortlist_.find(xor_distance(from, target_));
  if (it == shortlist_.end() || it->second.state != State::in_flight)
    return;
  it->second.state = State::responded;
  for (const auto &c : found)
    add(c);
}

void IterativeLookup::on_failure(const NodeId &from) {
  auto it = shortlist_.find(xor_distance(from, target_));
  if (it != shortlist_.end() && it->second.state == State::in_flight)
    it->second.state = State::failed;
}

std::vector<Contact> IterativeLookup::result() const {
  std::vector<Contact> out;
  for (const auto &[_, e] : shortlist_) {
    if (e.state != State::responded)
      continue;
    out.push_back(e.contact);
    if (out.size() == k_)
      break;
  }
  return out;
}

LookupOutcome iterative_lookup(RoutingTable &table, const NodeId &target, const QueryFn &query,
                               std::size_t k, std::size_t alpha) {
  auto seeds = table.find_closest(target, k);
  IterativeLookup lookup(table.owner(), target, seeds, k, alpha);
  while (true) {
    auto batch = lookup.next_round();
    if (batch.empty())
      break;
    for (const auto &c : batch) {
      if (auto found = query(c)) {
        lookup.on_response(c.node_id, *found);
        table.observe(c);
      } else {
        lookup.on_failure(c.node_id);
        table.remove(c.node_id);
      }
    }
  }
  LookupOutcome out;
  out.contacts = lookup.result();
  out.rounds = lookup.rounds();
  out.failed = out.contacts.empty();
  return out;
}

} // namespace chainsim::kademlia
