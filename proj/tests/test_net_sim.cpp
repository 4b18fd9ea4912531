#include <gtest/gtest.h>

#include <array>
#include <cmath>

#include "chainsim/net_sim.hpp"

using namespace chainsim;
using namespace chainsim::sim;

namespace {

SimConfig fixed_latency(SimTime ms) {
  SimConfig c;
  c.latency_min_ms = c.latency_max_ms = ms;
  return c;
}

struct Inbox {
  std::vector<Envelope> got;
  void attach(Simulator &s, NodeIndex n) {
    s.set_handler(n, [this](const Envelope &e) { got.push_back(e); });
  }
};

} // namespace

TEST(Send, FixedLatencyDeliversAtSendPlusLatency) {
  Simulator s(fixed_latency(10), 2);
  Inbox in;
  in.attach(s, 1);
  s.schedule_at(5, [&] { EXPECT_EQ(s.send(0, 1, MessageKind::ping, {1}), SendResult::scheduled); });
  s.run_until(100);
  ASSERT_EQ(in.got.size(), 1u);
  EXPECT_EQ(in.got[0].send_time, 5u);
  EXPECT_EQ(in.got[0].deliver_time, 15u);
  EXPECT_EQ(in.got[0].body, Bytes{1});
}

TEST(Send, UnknownNodeThrows) {
  Simulator s(fixed_latency(1), 2);
  EXPECT_THROW(s.send(0, 2, MessageKind::ping, {}), std::out_of_range);
  EXPECT_THROW(s.send(5, 0, MessageKind::ping, {}), std::out_of_range);
}

TEST(Send, PartitionDropsCrossingMessagesUntilHeal) {
  Simulator s(fixed_latency(1), 4);
  Inbox in1, in2;
  in1.attach(s, 1);
  in2.attach(s, 2);
  s.partition({0, 1}, {2, 3});
  EXPECT_TRUE(s.partitioned(0, 2));
  EXPECT_FALSE(s.partitioned(0, 1));
  EXPECT_EQ(s.send(0, 2, MessageKind::ping, {}), SendResult::dropped);
  EXPECT_EQ(s.send(0, 1, MessageKind::ping, {}), SendResult::scheduled);
  s.heal();
  EXPECT_EQ(s.send(0, 2, MessageKind::ping, {}), SendResult::scheduled);
  s.run_until(10);
  EXPECT_EQ(in1.got.size(), 1u);
  EXPECT_EQ(in2.got.size(), 1u);
}

TEST(Send, ScheduledPartitionWindow) {
  SimConfig c = fixed_latency(1);
  c.partition_schedule.push_back({100, 200, {0}, {1}});
  Simulator s(c, 2);
  Inbox in;
  in.attach(s, 1);
  for (SimTime t : {50u, 150u, 250u})
    s.schedule_at(t, [&] { s.send(0, 1, MessageKind::ping, {}); });
  s.run_until(1000);
  ASSERT_EQ(in.got.size(), 2u);
  EXPECT_EQ(in.got[0].send_time, 50u);
  EXPECT_EQ(in.got[1].send_time, 250u);
}

TEST(Send, PartitionIsCheckedAtSendTime) {
  // A message already travelling when the cut appears still arrives.
  SimConfig c = fixed_latency(50);
  c.partition_schedule.push_back({20, 200, {0}, {1}});
  Simulator s(c, 2);
  Inbox in;
  in.attach(s, 1);
  s.send(0, 1, MessageKind::ping, {});
  s.run_until(1000);
  EXPECT_EQ(in.got.size(), 1u);
}

TEST(Send, CrashedNodesNeitherSendNorReceive) {
  Simulator s(fixed_latency(5), 3);
  Inbox in1;
  in1.attach(s, 1);
  s.send(0, 1, MessageKind::ping, {});
  EXPECT_TRUE(s.crash_node(1));
  EXPECT_FALSE(s.crash_node(1));
  EXPECT_EQ(s.send(0, 1, MessageKind::ping, {}), SendResult::dropped);
  EXPECT_EQ(s.send(1, 0, MessageKind::ping, {}), SendResult::dropped);
  s.run_until(100);
  EXPECT_TRUE(in1.got.empty());
  EXPECT_TRUE(s.restart_node(1));
  EXPECT_FALSE(s.restart_node(1));
  s.send(0, 1, MessageKind::ping, {});
  s.run_until(200);
  EXPECT_EQ(in1.got.size(), 1u);
}

TEST(Send, DropRateMatchesProbability) {
  SimConfig c = fixed_latency(1);
  c.drop_probability = 0.25;
  Simulator s(c, 2);
  int dropped = 0;
  const int n = 20'000;
  for (int i = 0; i < n; ++i)
    dropped += s.send(0, 1, MessageKind::ping, {}) == SendResult::dropped;
  // Binomial standard deviation is about 61.
  EXPECT_NEAR(dropped, n / 4, 300);
}

TEST(Step, EmptyQueueIsIdle) {
  Simulator s(fixed_latency(1), 1);
  EXPECT_FALSE(s.step());
  EXPECT_EQ(s.now(), 0u);
  EXPECT_TRUE(s.idle());
}

TEST(Step, EventsInTimeOrderAndInsertionOrderOnTies) {
  Simulator s(fixed_latency(1), 1);
  std::vector<int> order;
  s.schedule_at(9, [&] { order.push_back(9); });
  s.schedule_at(7, [&] { order.push_back(7); });
  s.schedule_at(7, [&] { order.push_back(70); });
  s.run_until(100);
  EXPECT_EQ(order, (std::vector<int>{7, 70, 9}));
  // The clock ends at the horizon.
  EXPECT_EQ(s.now(), 100u);
}

TEST(Step, RunUntilStopsAtHorizon) {
  Simulator s(fixed_latency(1), 1);
  int fired = 0;
  s.schedule_at(10, [&] { ++fired; });
  s.schedule_at(11, [&] { ++fired; });
  s.run_until(10);
  EXPECT_EQ(fired, 1);
  EXPECT_FALSE(s.idle());
}

TEST(Step, NodeTimersDieWithCrash) {
  Simulator s(fixed_latency(1), 2);
  int fired = 0;
  s.schedule(0, 10, [&] { ++fired; });
  s.schedule(1, 10, [&] { ++fired; });
  s.crash_node(0);
  s.restart_node(0);
  s.run_until(100);
  EXPECT_EQ(fired, 1);
}

TEST(Step, ClockMonotoneAndNoEarlyDelivery) {
  SimConfig c;
  c.latency_min_ms = 1;
  c.latency_max_ms = 40;
  c.rng_seed = 9;
  Simulator s(c, 5);
  SimTime last = 0;
  int remaining = 2000;
  for (NodeIndex n = 0; n < 5; ++n)
    s.set_handler(n, [&, n](const Envelope &e) {
      EXPECT_GE(e.deliver_time, e.send_time);
      EXPECT_EQ(e.deliver_time, s.now());
      EXPECT_GE(s.now(), last);
      last = s.now();
      if (remaining-- > 0)
        s.send(n, s.rng(n).uniform(0, 4), MessageKind::ping, {});
    });
  for (NodeIndex n = 0; n < 5; ++n)
    s.send(n, (n + 1) % 5, MessageKind::ping, {});
  while (s.step())
    EXPECT_GE(s.now(), last);
}

namespace {

std::vector<std::string> chatter(std::uint64_t seed) {
  SimConfig c;
  c.rng_seed = seed;
  c.latency_min_ms = 3;
  c.latency_max_ms = 70;
  c.drop_probability = 0.1;
  Simulator s(c, 6);
  int budget = 3000;
  for (NodeIndex n = 0; n < 6; ++n)
    s.set_handler(n, [&, n](const Envelope &e) {
      if (budget-- <= 0)
        return;
      Bytes body = e.body;
      body.push_back(static_cast<std::uint8_t>(n));
      s.send(n, s.rng(n).uniform(0, 5), MessageKind::tx_announce, body);
    });
  for (NodeIndex n = 0; n < 6; ++n)
    s.send(n, (n + 3) % 6, MessageKind::tx_announce, {});
  s.run_until(1'000'000);
  return s.trace();
}

} // namespace

TEST(Determinism, SameSeedSameTrace) {
  auto a = chatter(77), b = chatter(77), c = chatter(78);
  EXPECT_FALSE(a.empty());
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
}

TEST(Rng, UniformStaysInRangeAndStreamsDiffer) {
  Rng r(5);
  for (int i = 0; i < 10'000; ++i) {
    auto v = r.uniform(10, 20);
    ASSERT_GE(v, 10u);
    ASSERT_LE(v, 20u);
  }
  EXPECT_NE(derive_stream_seed(1, 0, 0), derive_stream_seed(1, 0, 1));
  EXPECT_NE(derive_stream_seed(1, 0, 0), derive_stream_seed(1, 1, 0));
  EXPECT_EQ(derive_stream_seed(1, 2, 3), derive_stream_seed(1, 2, 3));
}

TEST(Mining, SingleMinerMeanIntervalWithinTwentyPercent) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    SimConfig c;
    c.rng_seed = seed;
    c.block_interval_target_ms = 600;
    c.hash_rate_shares = {{0, 1.0}};
    Simulator s(c, 1);
    std::vector<SimTime> found;
    s.schedule_mining(0, [&] { found.push_back(s.now()); });
    while (found.size() < 300 && s.step()) {
    }
    ASSERT_EQ(found.size(), 300u);
    double mean = static_cast<double>(found.back()) / static_cast<double>(found.size());
    EXPECT_NEAR(mean, 600.0, 120.0) << "seed " << seed;
  }
}

TEST(Mining, SharesSplitBlocks) {
  SimConfig c;
  c.rng_seed = 4;
  c.block_interval_target_ms = 100;
  c.hash_rate_shares = {{0, 0.7}, {1, 0.3}};
  Simulator s(c, 2);
  std::array<int, 2> wins{};
  int total = 0;
  for (NodeIndex n = 0; n < 2; ++n)
    s.schedule_mining(n, [&, n] {
      ++wins[n];
      ++total;
    });
  while (total < 2000 && s.step()) {
  }
  EXPECT_NEAR(static_cast<double>(wins[0]) / total, 0.7, 0.05);
}

TEST(Mining, ZeroShareNeverMines) {
  SimConfig c;
  c.hash_rate_shares = {{0, 1.0}, {1, 0.0}};
  Simulator s(c, 2);
  EXPECT_THROW(s.schedule_mining(1, [] {}), std::invalid_argument);
}

TEST(Mining, DisabledStopsTheChain) {
  SimConfig c;
  c.hash_rate_shares = {{0, 1.0}};
  Simulator s(c, 1);
  int found = 0;
  s.schedule_mining(0, [&] { ++found; });
  s.run_until(5000);
  int before = found;
  EXPECT_GT(before, 0);
  s.set_mining_enabled(false);
  s.run_until(100'000);
  EXPECT_LE(found, before + 1);
  EXPECT_TRUE(s.idle());
}

TEST(Config, ValidationErrors) {
  SimConfig c;
  c.latency_min_ms = 5;
  c.latency_max_ms = 4;
  EXPECT_THROW(c.validate(2), ConfigError);
  c = {};
  c.drop_probability = 1.0;
  EXPECT_THROW(c.validate(2), ConfigError);
  c = {};
  c.hash_rate_shares = {{99, 1.0}};
  EXPECT_THROW(c.validate(10), ConfigError);
  c = {};
  c.hash_rate_shares = {{0, 0.0}};
  EXPECT_THROW(c.validate(2), ConfigError);
  c = {};
  c.partition_schedule.push_back({10, 5, {0}, {1}});
  EXPECT_THROW(c.validate(2), ConfigError);
  c = {};
  c.partition_schedule.push_back({0, 5, {0}, {7}});
  EXPECT_THROW(c.validate(2), ConfigError);
  c = {};
  EXPECT_NO_THROW(c.validate(2));
}
