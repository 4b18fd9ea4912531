#include <gtest/gtest.h>

#include <set>

#include "mempool_oracle.hpp"

using namespace chainsim;
using namespace chainsim::testing;

namespace {

struct Fixture : ::testing::Test {
  std::vector<KeyPair> keys;
  AccountState state;
  void SetUp() override {
    for (int i = 0; i < 8; ++i) {
      keys.push_back(test_key(200 + i));
      state.balances[addr_of(keys.back())] = 1000;
    }
  }
  Transaction tx(int sender, std::uint64_t fee, std::uint64_t nonce = 0, std::uint64_t amount = 1) {
    return make_transaction(keys[sender], addr_of(keys[7]), amount, fee, nonce);
  }
  std::vector<std::uint64_t> fees(const std::vector<Transaction> &txs) {
    std::vector<std::uint64_t> out;
    for (const auto &t : txs)
      out.push_back(t.fee);
    return out;
  }
};

} // namespace

using MempoolTest = Fixture;

TEST_F(MempoolTest, SameTransactionTwiceIsDuplicate) {
  Mempool pool;
  auto t = tx(0, 5);
  EXPECT_TRUE(pool.insert(t, state).ok());
  EXPECT_EQ(pool.insert(t, state).status, InsertStatus::duplicate);
  EXPECT_EQ(pool.size(), 1u);
}

TEST_F(MempoolTest, FullPoolEvictsCheapestForHigherFee) {
  Mempool pool(2);
  auto t3 = tx(0, 3), t7 = tx(1, 7);
  ASSERT_TRUE(pool.insert(t3, state).ok());
  ASSERT_TRUE(pool.insert(t7, state).ok());
  auto r = pool.insert(tx(2, 9), state);
  ASSERT_TRUE(r.ok());
  ASSERT_TRUE(r.evicted.has_value());
  EXPECT_EQ(*r.evicted, tx_hash(t3));
  EXPECT_FALSE(pool.contains(tx_hash(t3)));
  EXPECT_TRUE(pool.contains(tx_hash(t7)));
}

TEST_F(MempoolTest, FullPoolRejectsLowerOrEqualFee) {
  Mempool pool(2);
  ASSERT_TRUE(pool.insert(tx(0, 3), state).ok());
  ASSERT_TRUE(pool.insert(tx(1, 7), state).ok());
  EXPECT_EQ(pool.insert(tx(2, 2), state).status, InsertStatus::pool_full);
  EXPECT_EQ(pool.insert(tx(2, 3), state).status, InsertStatus::pool_full);
  EXPECT_EQ(pool.size(), 2u);
}

TEST_F(MempoolTest, EvictionOnlyTakesQueueTails) {
  // Evicting a sender's middle nonce would strand its successors.
  Mempool pool(3);
  ASSERT_TRUE(pool.insert(tx(0, 1, 0), state).ok());
  ASSERT_TRUE(pool.insert(tx(0, 8, 1), state).ok());
  ASSERT_TRUE(pool.insert(tx(1, 4), state).ok());
  auto r = pool.insert(tx(2, 5), state);
  ASSERT_TRUE(r.ok());
  EXPECT_EQ(*r.evicted, tx_hash(tx(1, 4)));
  pool.check_invariants(state);
}

TEST_F(MempoolTest, SelectionExamples) {
  {
    Mempool pool;
    pool.insert(tx(0, 5), state);
    pool.insert(tx(1, 1), state);
    pool.insert(tx(2, 9), state);
    EXPECT_EQ(fees(pool.select_for_block(2)), (std::vector<std::uint64_t>{9, 5}));
  }
  {
    Mempool pool;
    auto t1 = tx(3, 4), t2 = tx(1, 4);
    pool.insert(t1, state);
    pool.insert(t2, state);
    auto sel = pool.select_for_block(2);
    ASSERT_EQ(sel.size(), 2u);
    EXPECT_EQ(sel[0], t1);
    EXPECT_EQ(sel[1], t2);
  }
  {
    Mempool pool;
    auto n0 = tx(0, 1, 0), n1 = tx(0, 9, 1);
    pool.insert(n0, state);
    pool.insert(n1, state);
    auto sel = pool.select_for_block(1);
    ASSERT_EQ(sel.size(), 1u);
    EXPECT_EQ(sel[0], n0);
    EXPECT_EQ(pool.select_for_block(2), (std::vector<Transaction>{n0, n1}));
  }
  EXPECT_TRUE(Mempool().select_for_block(5).empty());
}

TEST_F(MempoolTest, QueuedNoncesRespectPendingSpend) {
  Mempool pool;
  ASSERT_TRUE(pool.insert(tx(0, 0, 0, 600), state).ok());
  auto r = pool.insert(tx(0, 0, 1, 500), state);
  EXPECT_EQ(r.status, InsertStatus::bad_tx);
  EXPECT_EQ(r.cause, TxCode::insufficient_funds);
  EXPECT_TRUE(pool.insert(tx(0, 0, 1, 400), state).ok());
  EXPECT_EQ(pool.insert(tx(0, 0, 3), state).cause, TxCode::bad_nonce);
  EXPECT_EQ(pool.pending_nonce(addr_of(keys[0]), state), 2u);
}

TEST_F(MempoolTest, SecondTxWithSameSenderNonceIsRejected) {
  Mempool pool;
  ASSERT_TRUE(pool.insert(tx(0, 1, 0), state).ok());
  EXPECT_EQ(pool.insert(tx(0, 2, 0), state).status, InsertStatus::bad_tx);
}

TEST_F(MempoolTest, RemoveIncludedDropsHashesAndConsumedNonces) {
  Mempool pool;
  auto a = tx(0, 3, 0), b = tx(1, 3, 0), b2 = tx(1, 4, 1);
  pool.insert(a, state);
  pool.insert(b, state);
  pool.insert(b2, state);
  // Block carries `a` plus a different transaction spending sender 1's nonce 0.
  Block blk;
  blk.transactions = {a, tx(1, 99, 0)};
  pool.remove_included(blk);
  EXPECT_FALSE(pool.contains(tx_hash(a)));
  EXPECT_FALSE(pool.contains(tx_hash(b)));
  EXPECT_TRUE(pool.contains(tx_hash(b2)));
}

TEST_F(MempoolTest, ReinstateKeepsOnlyStillValid) {
  Mempool pool;
  auto a = tx(0, 3, 0), b = tx(1, 3, 0, 2000);
  AccountState after = state;
  pool.reinstate(std::vector<Transaction>{a, b}, after);
  EXPECT_TRUE(pool.contains(tx_hash(a)));
  EXPECT_FALSE(pool.contains(tx_hash(b)));

  // Canonical state moved past sender 0's nonce: its entry is dropped.
  after.nonces[addr_of(keys[0])] = 1;
  pool.reinstate({}, after);
  EXPECT_FALSE(pool.contains(tx_hash(a)));
  pool.check_invariants(after);
}

TEST_F(MempoolTest, CapacityAndUniquenessUnderRandomLoad) {
  std::mt19937_64 rng(31);
  Mempool pool(20);
  std::map<Address, std::uint64_t> next;
  for (int i = 0; i < 500; ++i) {
    int s = static_cast<int>(rng() % 7);
    Address a = addr_of(keys[s]);
    std::uint64_t nonce = pool.pending_nonce(a, state);
    if (rng() % 5 == 0)
      nonce += rng() % 3;
    auto t = tx(s, rng() % 50, nonce);
    std::uint64_t min_fee_before = UINT64_MAX;
    for (const auto &[_, e] : pool.entries_by_arrival())
      min_fee_before = std::min(min_fee_before, e.fee);
    auto r = pool.insert(t, state);
    if (r.evicted) {
      EXPECT_LT(min_fee_before, t.fee);
      EXPECT_FALSE(pool.contains(*r.evicted));
    }
    EXPECT_LE(pool.size(), 20u);
    pool.check_invariants(state);
    std::set<std::pair<Address, std::uint64_t>> seen;
    for (const auto &[_, e] : pool.entries_by_arrival())
      EXPECT_TRUE(seen.emplace(e.sender_address(), e.nonce).second);
  }
}

TEST(MempoolOracle, MatchesBruteForceOnRandomPools) {
  std::mt19937_64 rng(32);
  std::vector<KeyPair> keys;
  for (int i = 0; i < 7; ++i)
    keys.push_back(test_key(300 + i));
  for (int trial = 0; trial < 200; ++trial) {
    auto rp = random_pool(rng, keys);
    auto got = rp.pool.select_for_block(rp.max_n);
    auto want = oracle_select(rp.entries, rp.max_n);
    ASSERT_EQ(got, want) << "trial " << trial << " size " << rp.entries.size() << " max_n "
                         << rp.max_n;
    // Every selection is a valid block body against the pool's state.
    AccountState s = rp.state;
    for (const auto &t : got) {
      ASSERT_EQ(validate_transaction(t, s), TxCode::ok);
      Address from = t.sender_address();
      s.balances[from] -= t.amount + t.fee;
      s.balances[t.recipient] += t.amount;
      s.nonces[from] += 1;
    }
  }
}

TEST(MempoolOracle, OracleAgreesWithHandWorkedCases) {
  auto a = test_key(400), b = test_key(401);
  Address to = addr_of(test_key(402));
  // a: fees 1 then 9; b: fee 6. Two slots: {a0, a1} = 10 beats {b, a0} = 7.
  std::vector<PooledTx> pool{{make_transaction(a, to, 1, 1, 0), 0},
                             {make_transaction(a, to, 1, 9, 1), 1},
                             {make_transaction(b, to, 1, 6, 0), 2}};
  auto sel = oracle_select(pool, 2);
  ASSERT_EQ(sel.size(), 2u);
  EXPECT_EQ(sel[0].fee, 1u);
  EXPECT_EQ(sel[1].fee, 9u);
  sel = oracle_select(pool, 3);
  EXPECT_EQ(sel[0].fee, 6u);
  EXPECT_EQ(sel[1].fee, 1u);
  EXPECT_EQ(sel[2].fee, 9u);
  EXPECT_TRUE(oracle_select(pool, 0).empty());
}
