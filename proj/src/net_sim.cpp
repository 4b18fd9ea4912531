#include "chainsim/net_sim.hpp"

#include <cmath>

namespace chainsim::sim {

std::string_view to_string(MessageKind kind) {
  switch (kind) {
  case MessageKind::tx_announce: return "TX_ANNOUNCE";
  case MessageKind::block_announce: return "BLOCK_ANNOUNCE";
  case MessageKind::get_blocks: return "GET_BLOCKS";
  case MessageKind::blocks: return "BLOCKS";
  case MessageKind::find_node: return "FIND_NODE";
  case MessageKind::found_nodes: return "FOUND_NODES";
  case MessageKind::ping: return "PING";
  case MessageKind::pong: return "PONG";
  }
  return "UNKNOWN";
}

void SimConfig::validate(std::size_t node_count) const {
  if (latency_min_ms > latency_max_ms)
    throw ConfigError("latency_min_ms exceeds latency_max_ms");
  if (!(drop_probability >= 0.0 && drop_probability < 1.0))
    throw ConfigError("drop_probability must lie in [0, 1)");
  for (const auto &[node, share] : hash_rate_shares) {
    if (node >= node_count)
      throw ConfigError("hash_rate_shares names node " + std::to_string(node) + " of " +
                        std::to_string(node_count));
    if (!(share >= 0.0) || !std::isfinite(share))
      throw ConfigError("hash rate shares must be non-negative");
  }
  if (!hash_rate_shares.empty() && total_share() <= 0.0)
    throw ConfigError("hash rate shares sum to zero");
  if (!hash_rate_shares.empty() && block_interval_target_ms == 0)
    throw ConfigError("block_interval_target_ms must be positive");
  for (const auto &p : partition_schedule) {
    if (p.start_ms > p.end_ms)
      throw ConfigError("partition ends before it starts");
    for (const auto *side : {&p.a, &p.b})
      for (NodeIndex n : *side)
        if (n >= node_count)
          throw ConfigError("partition names node " + std::to_string(n) + " of " +
                            std::to_string(node_count));
  }
}

double SimConfig::total_share() const {
  double total = 0.0;
  for (const auto &[_, s] : hash_rate_shares)
    total += s;
  return total;
}

std::uint64_t Rng::uniform(std::uint64_t lo, std::uint64_t hi) {
  if (hi <= lo)
    return lo;
  std::uint64_t span = hi - lo + 1;
  if (span == 0)
    return engine_();
  // Rejection sampling keeps the draw unbiased.
  std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                        std::numeric_limits<std::uint64_t>::max() % span;
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return lo + x % span;
}

double Rng::exponential(double mean) { return -mean * std::log1p(-uniform01()); }

std::uint64_t derive_stream_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(mix(mix(seed) ^ stream) ^ index);
}

Simulator::Simulator(SimConfig config, std::size_t node_count) : config_(std::move(config)) {
  config_.validate(node_count);
  nodes_.resize(node_count);
  for (std::size_t i = 0; i < node_count; ++i) {
    nodes_[i].net_rng = Rng(derive_stream_seed(config_.rng_seed, 1, i));
    nodes_[i].mining_rng = Rng(derive_stream_seed(config_.rng_seed, 2, i));
  }
}

void Simulator::set_handler(NodeIndex node, MessageHandler handler) {
  nodes_.at(node).handler = std::move(handler);
}

bool Simulator::partitioned(NodeIndex x, NodeIndex y) const {
  if (manual_partition_ && manual_partition_->separates(x, y))
    return true;
  for (const auto &p : config_.partition_schedule)
    if (now_ >= p.start_ms && now_ < p.end_ms && p.separates(x, y))
      return true;
  return false;
}

SendResult Simulator::send(NodeIndex from, NodeIndex to, MessageKind kind, Bytes body,
                           std::optional<Digest256> ref) {
  auto &sender = nodes_.at(from);
  const auto &receiver = nodes_.at(to);
  // Both draws happen on every send so a node's stream does not depend on
  // which of its messages were dropped.
  bool lost = sender.net_rng.bernoulli(config_.drop_probability);
  SimTime latency = sender.net_rng.uniform(config_.latency_min_ms, config_.latency_max_ms);
  if (lost || sender.crashed || receiver.crashed || partitioned(from, to)) {
    ++dropped_;
    return SendResult::dropped;
  }
  Envelope e;
  e.send_time = now_;
  e.deliver_time = now_ + latency;
  e.from = from;
  e.to = to;
  e.kind = kind;
  e.body = std::move(body);
  e.ref = ref;
  SimTime at = e.deliver_time;
  push(at, Delivery{std::move(e), receiver.epoch});
  return SendResult::scheduled;
}

void Simulator::schedule(NodeIndex owner, SimTime delay, Action action) {
  push(now_ + delay, Timer{owner, nodes_.at(owner).epoch, std::move(action)});
}

void Simulator::schedule_at(SimTime at, Action action) {
  push(std::max(at, now_), Timer{std::nullopt, 0, std::move(action)});
}

void Simulator::schedule_mining(NodeIndex node, Action on_found) {
  auto it = config_.hash_rate_shares.find(node);
  double share = it == config_.hash_rate_shares.end() ? 0.0 : it->second;
  if (share <= 0.0)
    throw std::invalid_argument("node " + std::to_string(node) + " has no hash rate share");
  double mean = static_cast<double>(config_.block_interval_target_ms) *
                (config_.total_share() / share);
  double draw = nodes_[node].mining_rng.exponential(mean);
  auto delay = static_cast<SimTime>(std::max(1.0, std::round(draw)));
  schedule(node, delay, [this, node, on_found = std::move(on_found)]() mutable {
    if (!mining_enabled_)
      return;
    on_found();
    schedule_mining(node, std::move(on_found));
  });
}

void Simulator::push(SimTime at, Event event) {
  queue_.emplace(std::make_pair(at, next_seq_++), std::move(event));
}

bool Simulator::step() {
  if (queue_.empty())
    return false;
  auto node = queue_.extract(queue_.begin());
  now_ = node.key().first;
  Event &event = node.mapped();
  if (auto *d = std::get_if<Delivery>(&event)) {
    deliver(*d);
  } else {
    auto &t = std::get<Timer>(event);
    if (t.owner) {
      const auto &slot = nodes_[*t.owner];
      if (slot.crashed || slot.epoch != t.epoch)
        return true;
    }
    t.action();
  }
  return true;
}

void Simulator::run_until(SimTime t_end) {
  while (!queue_.empty() && queue_.begin()->first.first <= t_end)
    step();
  now_ = std::max(now_, t_end);
}

void Simulator::deliver(Delivery &d) {
  auto &slot = nodes_[d.envelope.to];
  if (slot.crashed || slot.epoch != d.target_epoch) {
    ++dropped_;
    return;
  }
  ++delivered_;
  trace_delivery(d.envelope);
  if (slot.handler)
    slot.handler(d.envelope);
}

void Simulator::trace_delivery(const Envelope &e) {
  if (!tracing_)
    return;
  nlohmann::ordered_json j;
  j["time"] = e.deliver_time;
  j["from"] = e.from;
  j["to"] = e.to;
  j["kind"] = to_string(e.kind);
  j["body_hash"] = hash_bytes(e.body).hex();
  if (e.ref)
    j["ref"] = e.ref->hex();
  trace_.push_back(j.dump());
}

void Simulator::record(const std::string &kind, NodeIndex node, nlohmann::ordered_json fields) {
  if (!tracing_)
    return;
  nlohmann::ordered_json j;
  j["time"] = now_;
  j["node"] = node;
  j["kind"] = kind;
  for (auto &[k, v] : fields.items())
    j[k] = std::move(v);
  trace_.push_back(j.dump());
}

bool Simulator::crash_node(NodeIndex node) {
  auto &slot = nodes_.at(node);
  if (slot.crashed)
    return false;
  slot.crashed = true;
  ++slot.epoch;
  return true;
}

bool Simulator::restart_node(NodeIndex node) {
  auto &slot = nodes_.at(node);
  if (!slot.crashed)
    return false;
  slot.crashed = false;
  ++slot.epoch;
  return true;
}

void Simulator::partition(std::set<NodeIndex> a, std::set<NodeIndex> b) {
  manual_partition_ = Partition{now_, now_, std::move(a), std::move(b)};
}

void Simulator::heal() { manual_partition_.reset(); }

} // namespace chainsim::sim
