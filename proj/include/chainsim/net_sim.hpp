#pragma once

#include <functional>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <variant>

#include <nlohmann/json.hpp>

#include "chainsim/crypto.hpp"

namespace chainsim::sim {

using SimTime = std::uint64_t; // simulated milliseconds
using NodeIndex = std::size_t;

enum class MessageKind : std::uint8_t {
  tx_announce,
  block_announce,
  get_blocks,
  blocks,
  find_node,
  found_nodes,
  ping,
  pong,
};

/// Wire name, e.g. "TX_ANNOUNCE".
std::string_view to_string(MessageKind kind);

class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct Partition {
  SimTime start_ms = 0;
  SimTime end_ms = 0;
  std::set<NodeIndex> a;
  std::set<NodeIndex> b;

  bool separates(NodeIndex x, NodeIndex y) const {
    return (a.contains(x) && b.contains(y)) || (b.contains(x) && a.contains(y));
  }
};

struct SimConfig {
  std::uint64_t rng_seed = 1;
  SimTime latency_min_ms = 10;
  SimTime latency_max_ms = 50;
  double drop_probability = 0.0;
  std::map<NodeIndex, double> hash_rate_shares;
  SimTime block_interval_target_ms = 1000;
  std::vector<Partition> partition_schedule;

  /// Throws ConfigError when a field is out of range or names a node
  /// outside [0, node_count).
  void validate(std::size_t node_count) const;
  double total_share() const;
};

struct Envelope {
  SimTime send_time = 0;
  SimTime deliver_time = 0;
  NodeIndex from = 0;
  NodeIndex to = 0;
  MessageKind kind = MessageKind::ping;
  Bytes body;
  /// Hash of the announced object (tx or block), for tracing only.
  std::optional<Digest256> ref;
};

/// mt19937_64 with hand-written distributions so draws are identical across
/// standard library implementations.
class Rng {
public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  /// Uniform over [lo, hi].
  std::uint64_t uniform(std::uint64_t lo, std::uint64_t hi);
  double exponential(double mean);
  bool bernoulli(double p) { return uniform01() < p; }

private:
  std::mt19937_64 engine_;
};

/// splitmix64 mix of (seed, stream, index).
std::uint64_t derive_stream_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index);

enum class SendResult { scheduled, dropped };

/// Deterministic discrete-event network: one event is dispatched at a time,
/// ordered by (time, insertion sequence). Timers owned by a node die with
/// it: crashing bumps the node's epoch and stale events are discarded.
class Simulator {
public:
  using MessageHandler = std::function<void(const Envelope &)>;
  using Action = std::function<void()>;

  Simulator(SimConfig config, std::size_t node_count);

  const SimConfig &config() const { return config_; }
  std::size_t node_count() const { return nodes_.size(); }
  SimTime now() const { return now_; }

  void set_handler(NodeIndex node, MessageHandler handler);

  /// Throws std::out_of_range for unknown indices.
  SendResult send(NodeIndex from, NodeIndex to, MessageKind kind, Bytes body,
                  std::optional<Digest256> ref = std::nullopt);

  /// Runs `action` after `delay` unless `owner` crashes first.
  void schedule(NodeIndex owner, SimTime delay, Action action);
  /// Scenario-level event at absolute time `at` (not tied to any node).
  void schedule_at(SimTime at, Action action);

  /// Next block-found event for `node` after an exponential delay with mean
  /// block_interval_target_ms * total_share / share(node). On firing
  /// `on_found` runs and the next event is scheduled. Throws
  /// std::invalid_argument for a node with zero share.
  void schedule_mining(NodeIndex node, Action on_found);
  void set_mining_enabled(bool enabled) { mining_enabled_ = enabled; }
  bool mining_enabled() const { return mining_enabled_; }

  /// Pops and dispatches the earliest event. Returns false when idle.
  bool step();
  /// Steps until the queue is empty or the next event lies beyond t_end.
  void run_until(SimTime t_end);
  bool idle() const { return queue_.empty(); }

  /// Returns false (and does nothing) if the node is already crashed.
  bool crash_node(NodeIndex node);
  /// Returns false if the node was not crashed.
  bool restart_node(NodeIndex node);
  bool is_crashed(NodeIndex node) const { return nodes_.at(node).crashed; }

  void partition(std::set<NodeIndex> a, std::set<NodeIndex> b);
  void heal();
  bool partitioned(NodeIndex x, NodeIndex y) const;

  Rng &rng(NodeIndex node) { return nodes_.at(node).net_rng; }

  void set_tracing(bool on) { tracing_ = on; }
  /// Appends a local (non-delivery) record; "time" is filled in.
  void record(const std::string &kind, NodeIndex node, nlohmann::ordered_json fields);
  const std::vector<std::string> &trace() const { return trace_; }

  std::uint64_t delivered_count() const { return delivered_; }
  std::uint64_t dropped_count() const { return dropped_; }

private:
  struct NodeSlot {
    MessageHandler handler;
    bool crashed = false;
    std::uint64_t epoch = 0;
    Rng net_rng;
    Rng mining_rng;
  };
  struct Timer {
    std::optional<NodeIndex> owner;
    std::uint64_t epoch = 0;
    Action action;
  };
  struct Delivery {
    Envelope envelope;
    std::uint64_t target_epoch = 0;
  };
  using Event = std::variant<Delivery, Timer>;

  void push(SimTime at, Event event);
  void deliver(Delivery &d);
  void trace_delivery(const Envelope &e);

  SimConfig config_;
  std::vector<NodeSlot> nodes_;
  std::map<std::pair<SimTime, std::uint64_t>, Event> queue_;
  std::uint64_t next_seq_ = 0;
  SimTime now_ = 0;
  bool mining_enabled_ = true;
  std::optional<Partition> manual_partition_;
  bool tracing_ = true;
  std::vector<std::string> trace_;
  std::uint64_t delivered_ = 0;
  std::uint64_t dropped_ = 0;
};

} // namespace chainsim::sim
