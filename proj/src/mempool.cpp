#include "chainsim/mempool.hpp"

#include <queue>
#include <tuple>

namespace chainsim {

std::string_view to_string(InsertStatus status) {
  switch (status) {
  case InsertStatus::inserted: return "inserted";
  case InsertStatus::duplicate: return "duplicate";
  case InsertStatus::bad_tx: return "bad_tx";
  case InsertStatus::pool_full: return "pool_full";
  }
  return "unknown";
}

Mempool::Mempool(std::size_t capacity) : capacity_(capacity) {}

InsertResult Mempool::insert(const Transaction &tx, const AccountState &state) {
  return insert_entry(tx, tx_hash(tx), state, true, next_arrival_++);
}

std::uint64_t Mempool::pending_nonce(const Address &sender, const AccountState &state) const {
  auto it = by_sender_.find(sender);
  std::uint64_t queued = it == by_sender_.end() ? 0 : it->second.size();
  return state.next_nonce(sender) + queued;
}

InsertResult Mempool::insert_entry(const Transaction &tx, const Digest256 &hash,
                                   const AccountState &state, bool check_signature,
                                   std::uint64_t arrival) {
  InsertResult result;
  if (entries_.contains(hash)) {
    result.status = InsertStatus::duplicate;
    result.cause = TxCode::duplicate;
    return result;
  }
  const Address sender = tx.sender_address();
  auto spent_it = pending_spend_.find(sender);
  std::uint64_t spent = spent_it == pending_spend_.end() ? 0 : spent_it->second;
  std::uint64_t balance = state.balance(sender);
  std::uint64_t spendable = balance > spent ? balance - spent : 0;
  auto code = check_transaction(tx, pending_nonce(sender, state), spendable, check_signature);
  if (code != TxCode::ok) {
    result.status = InsertStatus::bad_tx;
    result.cause = code;
    return result;
  }

  if (entries_.size() >= capacity_) {
    auto victim = eviction_candidate(sender);
    if (!victim || entries_.at(*victim).tx.fee >= tx.fee) {
      result.status = InsertStatus::pool_full;
      return result;
    }
    erase(*victim);
    result.evicted = *victim;
  }

  Entry e{tx, sender, arrival, tx.amount + tx.fee};
  pending_spend_[sender] += e.cost;
  by_sender_[sender].emplace(tx.nonce, hash);
  entries_.emplace(hash, std::move(e));
  return result;
}

std::optional<Digest256> Mempool::eviction_candidate(const Address &exclude) const {
  std::optional<Digest256> best;
  std::uint64_t best_fee = 0, best_arrival = 0;
  for (const auto &[sender, nonces] : by_sender_) {
    if (sender == exclude || nonces.empty())
      continue;
    const Digest256 &tail = nonces.rbegin()->second;
    const Entry &e = entries_.at(tail);
    // Cheapest first; among equal fees the most recent arrival goes.
    if (!best || e.tx.fee < best_fee || (e.tx.fee == best_fee && e.arrival > best_arrival)) {
      best = tail;
      best_fee = e.tx.fee;
      best_arrival = e.arrival;
    }
  }
  return best;
}

void Mempool::erase(const Digest256 &hash) {
  auto it = entries_.find(hash);
  if (it == entries_.end())
    return;
  const Entry &e = it->second;
  auto spent = pending_spend_.find(e.sender);
  spent->second -= e.cost;
  if (spent->second == 0)
    pending_spend_.erase(spent);
  auto &nonces = by_sender_[e.sender];
  nonces.erase(e.tx.nonce);
  if (nonces.empty())
    by_sender_.erase(e.sender);
  entries_.erase(it);
}

namespace {

// Additive score of a selection: total fee, then more transactions, then
// older arrivals (smaller arrival sum).
struct Score {
  unsigned __int128 fee = 0;
  std::uint64_t count = 0;
  std::uint64_t arrival_sum = 0;

  Score operator+(const Score &o) const {
    return {fee + o.fee, count + o.count, arrival_sum + o.arrival_sum};
  }
  bool operator<(const Score &o) const {
    if (fee != o.fee)
      return fee < o.fee;
    if (count != o.count)
      return count < o.count;
    return arrival_sum > o.arrival_sum;
  }
};

} // namespace

std::vector<Transaction> Mempool::select_for_block(std::size_t max_n) const {
  // Each sender contributes a prefix of its pending nonces. Pick prefix
  // lengths maximising Score under the slot budget (grouped knapsack with
  // unit weights), then order the picked entries fee-descending subject to
  // nonce order. Exact ties keep the longer prefix of the earlier sender.
  std::vector<std::vector<const Entry *>> chains;
  for (const auto &[sender, nonces] : by_sender_) {
    auto &chain = chains.emplace_back();
    for (const auto &[_, hash] : nonces)
      chain.push_back(&entries_.at(hash));
  }
  const std::size_t m = chains.size();
  const std::size_t budget = std::min(max_n, entries_.size());
  if (budget == 0)
    return {};

  std::vector<Score> next(budget + 1), cur(budget + 1);
  std::vector<std::vector<std::uint16_t>> choice(m, std::vector<std::uint16_t>(budget + 1));
  for (std::size_t i = m; i-- > 0;) {
    const auto &chain = chains[i];
    for (std::size_t c = 0; c <= budget; ++c) {
      Score prefix;
      Score best = next[c];
      std::size_t best_len = 0;
      for (std::size_t len = 1; len <= std::min(chain.size(), c); ++len) {
        prefix = prefix + Score{chain[len - 1]->tx.fee, 1, chain[len - 1]->arrival};
        Score candidate = prefix + next[c - len];
        if (!(candidate < best)) {
          best = candidate;
          best_len = len;
        }
      }
      cur[c] = best;
      choice[i][c] = static_cast<std::uint16_t>(best_len);
    }
    std::swap(cur, next);
  }

  std::vector<std::size_t> take(m);
  for (std::size_t i = 0, c = budget; i < m; ++i) {
    take[i] = choice[i][c];
    c -= take[i];
  }

  // (fee, -arrival) max-heap over the next picked entry of each sender.
  using Key = std::tuple<std::uint64_t, std::uint64_t, std::size_t>;
  auto worse = [](const Key &a, const Key &b) {
    if (std::get<0>(a) != std::get<0>(b))
      return std::get<0>(a) < std::get<0>(b);
    return std::get<1>(a) > std::get<1>(b);
  };
  std::priority_queue<Key, std::vector<Key>, decltype(worse)> heads(worse);
  std::vector<std::size_t> pos(m, 0);
  for (std::size_t i = 0; i < m; ++i)
    if (take[i] > 0)
      heads.emplace(chains[i][0]->tx.fee, chains[i][0]->arrival, i);

  std::vector<Transaction> out;
  while (!heads.empty()) {
    std::size_t i = std::get<2>(heads.top());
    heads.pop();
    out.push_back(chains[i][pos[i]]->tx);
    if (++pos[i] < take[i])
      heads.emplace(chains[i][pos[i]]->tx.fee, chains[i][pos[i]]->arrival, i);
  }
  return out;
}

void Mempool::remove_included(const Block &block) {
  for (const auto &tx : block.transactions) {
    erase(tx_hash(tx));
    auto sender = by_sender_.find(tx.sender_address());
    if (sender == by_sender_.end())
      continue;
    auto slot = sender->second.find(tx.nonce);
    if (slot != sender->second.end())
      erase(Digest256(slot->second));
  }
}

void Mempool::reinstate(std::span<const Transaction> displaced, const AccountState &state) {
  struct Candidate {
    Address sender;
    std::uint64_t nonce;
    std::uint64_t arrival;
    Digest256 hash;
    Transaction tx;
  };
  std::vector<Candidate> candidates;
  candidates.reserve(entries_.size() + displaced.size());
  for (auto &[hash, e] : entries_)
    candidates.push_back({e.sender, e.tx.nonce, e.arrival, hash, std::move(e.tx)});
  for (const auto &tx : displaced) {
    auto hash = tx_hash(tx);
    if (!entries_.contains(hash))
      candidates.push_back({tx.sender_address(), tx.nonce, next_arrival_++, hash, tx});
  }
  std::sort(candidates.begin(), candidates.end(), [](const Candidate &a, const Candidate &b) {
    return std::tie(a.sender, a.nonce, a.arrival) < std::tie(b.sender, b.nonce, b.arrival);
  });

  entries_.clear();
  by_sender_.clear();
  pending_spend_.clear();
  // Signatures were checked when these entered the pool or a valid block.
  for (const auto &c : candidates)
    insert_entry(c.tx, c.hash, state, false, c.arrival);
}

const Transaction *Mempool::find(const Digest256 &hash) const {
  auto it = entries_.find(hash);
  return it == entries_.end() ? nullptr : &it->second.tx;
}

void Mempool::clear() {
  entries_.clear();
  by_sender_.clear();
  pending_spend_.clear();
}

std::vector<std::pair<std::uint64_t, Transaction>> Mempool::entries_by_arrival() const {
  std::vector<std::pair<std::uint64_t, Transaction>> out;
  for (const auto &[_, e] : entries_)
    out.emplace_back(e.arrival, e.tx);
  std::sort(out.begin(), out.end(),
            [](const auto &a, const auto &b) { return a.first < b.first; });
  return out;
}

void Mempool::check_invariants(const AccountState &state) const {
  if (entries_.size() > capacity_)
    throw std::logic_error("mempool over capacity");
  std::size_t indexed = 0;
  for (const auto &[sender, nonces] : by_sender_) {
    std::uint64_t expected = state.next_nonce(sender);
    std::uint64_t spend = 0;
    for (const auto &[nonce, hash] : nonces) {
      const Entry &e = entries_.at(hash);
      if (nonce != expected++ || e.sender != sender || e.tx.nonce != nonce)
        throw std::logic_error("mempool nonce chain broken for " + sender.hex());
      spend += e.cost;
      ++indexed;
    }
    if (spend > state.balance(sender) || pending_spend_.at(sender) != spend)
      throw std::logic_error("mempool overspends " + sender.hex());
  }
  if (indexed != entries_.size())
    throw std::logic_error("mempool index out of sync");
}

} // namespace chainsim
