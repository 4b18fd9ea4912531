#include "chainsim/runner.hpp"

#include <atomic>
#include <unistd.h>

#include "chainsim/chain_file.hpp"

namespace chainsim {

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using sim::NodeIndex;
using sim::SimTime;

Runner::Runner(Scenario scenario, RunOptions options)
    : scenario_(std::move(scenario)), options_(std::move(options)),
      genesis_(make_genesis(scenario_.allocations, scenario_.difficulty_bits)) {
  sim_ = std::make_unique<sim::Simulator>(scenario_.sim, scenario_.node_count);
  NodeParams params;
  params.sync_interval_ms = scenario_.sync_interval_ms;
  params.mempool_capacity = scenario_.mempool_capacity;
  for (NodeIndex i = 0; i < scenario_.node_count; ++i)
    nodes_.push_back(
        std::make_unique<Node>(*sim_, i, generate_keypair(node_seed(i)), genesis_, params));

  bool needs_blobs = std::any_of(scenario_.workload.begin(), scenario_.workload.end(),
                                 [](const auto &w) { return w.blob.has_value(); });
  if (needs_blobs) {
    fs::path dir = options_.blob_dir;
    if (dir.empty()) {
      static std::atomic<unsigned> counter{0};
      dir = fs::temp_directory_path() / ("chainsim-blobs-" + std::to_string(::getpid()) + "-" +
                                         std::to_string(counter++));
      owned_blob_dir_ = dir;
    }
    blobs_ = std::make_unique<OffchainStore>(dir);
  }
}

Runner::~Runner() {
  if (!owned_blob_dir_.empty()) {
    std::error_code ec;
    fs::remove_all(owned_blob_dir_, ec);
  }
}

std::uint64_t Runner::network_height() const {
  std::uint64_t h = 0;
  for (const auto &n : nodes_)
    if (!sim_->is_crashed(n->index()))
      h = std::max(h, n->head_height());
  return h;
}

std::vector<kademlia::Contact> Runner::bootstraps_for(NodeIndex i) const {
  std::vector<kademlia::Contact> out;
  for (NodeIndex b : scenario_.bootstrap)
    if (b != i)
      out.push_back({nodes_[b]->node_id(), b, 0});
  return out;
}

void Runner::start_mining(NodeIndex i) {
  auto it = scenario_.sim.hash_rate_shares.find(i);
  if (it == scenario_.sim.hash_rate_shares.end() || it->second <= 0.0)
    return;
  sim_->schedule_mining(i, [this, i] { nodes_[i]->mine_block(); });
}

void Runner::submit(const WorkloadTx &w) {
  Node &node = *nodes_[w.node];
  KeyPair keys = generate_keypair(w.sender_seed);
  ordered_json fields;
  if (sim_->is_crashed(w.node)) {
    fields["sender"] = address_from_public_key(keys.public_key()).hex();
    fields["accepted"] = false;
    fields["error"] = "node_down";
    sim_->record("SUBMIT", w.node, std::move(fields));
    return;
  }
  Bytes payload;
  if (w.blob) {
    std::string data = read_text_file(w.blob->string());
    auto ref = blobs_->put(as_bytes(data));
    payload = make_blob_link(ref.digest);
  }
  Address sender = address_from_public_key(keys.public_key());
  // Wallet behaviour: ask the submitting node for the next pending nonce.
  std::uint64_t nonce = node.mempool().pending_nonce(sender, node.state());
  Transaction tx = make_transaction(keys, w.recipient, w.amount, w.fee, nonce, payload);

  rpc::Dispatcher rpc(node, blobs_.get());
  nlohmann::json request = {{"jsonrpc", "2.0"},
                            {"id", 1},
                            {"method", "chain_submitTransaction"},
                            {"params", {{"tx", to_hex(encode_transaction(tx))}}}};
  nlohmann::json response = rpc.handle(request);
  fields["tx"] = tx_hash(tx).hex();
  fields["sender"] = sender.hex();
  fields["nonce"] = nonce;
  fields["fee"] = w.fee;
  fields["accepted"] = response.contains("result");
  if (response.contains("error"))
    fields["error"] = response["error"]["code"];
  sim_->record("SUBMIT", w.node, std::move(fields));
}

void Runner::audit_all(const char *when) {
  for (const auto &n : nodes_) {
    if (sim_->is_crashed(n->index()))
      continue;
    try {
      n->audit();
    } catch (const std::logic_error &e) {
      throw InvariantViolation(std::string(when) + " (t=" + std::to_string(sim_->now()) +
                               "ms): " + e.what());
    }
  }
}

RunResult Runner::run() {
  auto &sim = *sim_;
  const std::size_t n = nodes_.size();

  for (NodeIndex i = 0; i < n; ++i)
    sim.schedule_at(i * scenario_.join_stagger_ms, [this, i] {
      if (!sim_->is_crashed(i))
        nodes_[i]->join(bootstraps_for(i));
    });
  // Miners start once everyone has had a chance to join.
  mining_start_ = n * scenario_.join_stagger_ms + 500;
  sim.schedule_at(mining_start_, [this, n] {
    for (NodeIndex i = 0; i < n; ++i)
      if (!sim_->is_crashed(i))
        start_mining(i);
  });
  for (const auto &m : scenario_.mine_schedule)
    sim.schedule_at(m.at_ms, [this, m] {
      if (!sim_->is_crashed(m.node))
        nodes_[m.node]->mine_block();
    });
  for (const auto &w : scenario_.workload)
    sim.schedule_at(w.at_ms, [this, w] { submit(w); });

  for (const auto &c : scenario_.crashes) {
    sim.schedule_at(c.crash_ms, [this, c] {
      Node &node = *nodes_[c.node];
      node.checkpoint();
      if (!sim_->crash_node(c.node))
        return;
      Outage o{c.node, sim_->now(), std::nullopt, network_height(), std::nullopt};
      sim_->record("CRASH", c.node,
                   {{"height", node.head_height()}, {"network_height", o.network_height_at_crash}});
      outages_.push_back(o);
    });
    if (c.restart_ms)
      sim.schedule_at(*c.restart_ms, [this, c] {
        if (!sim_->restart_node(c.node))
          return;
        std::uint64_t network = network_height();
        Node &node = *nodes_[c.node];
        node.restart(bootstraps_for(c.node));
        if (sim_->mining_enabled() && sim_->now() >= mining_start_)
          start_mining(c.node);
        for (auto it = outages_.rbegin(); it != outages_.rend(); ++it)
          if (it->node == c.node && !it->restart_ms) {
            it->restart_ms = sim_->now();
            it->network_height_at_restart = network;
            break;
          }
        sim_->record("RESTART", c.node,
                     {{"height", node.head_height()},
                      {"hash", node.head_hash().hex()},
                      {"network_height", network}});
        try {
          node.audit();
        } catch (const std::logic_error &e) {
          throw InvariantViolation("after restart: " + std::string(e.what()));
        }
      });
  }

  if (options_.audit_interval_ms > 0) {
    auto tick = std::make_shared<std::function<void()>>();
    *tick = [this, tick] {
      audit_all("periodic audit");
      sim_->schedule_at(sim_->now() + options_.audit_interval_ms, *tick);
    };
    sim.schedule_at(options_.audit_interval_ms, *tick);
  }

  sim.run_until(scenario_.duration_ms);
  sim.set_mining_enabled(false);
  sim.run_until(scenario_.duration_ms + scenario_.drain_ms);
  audit_all("final audit");

  RunResult result;
  result.trace = sim.trace();
  result.metrics = compute_metrics(result.trace);
  result.outages = outages_;
  for (const auto &node : nodes_)
    result.chain_files.push_back(write_chain_file(node->canonical_chain()));

  std::optional<Digest256> common;
  result.converged = true;
  const Node *best = nullptr;
  for (const auto &node : nodes_) {
    if (sim.is_crashed(node->index()))
      continue;
    if (!common)
      common = node->head_hash();
    else if (*common != node->head_hash())
      result.converged = false;
    if (!best || node->head_height() > best->head_height())
      best = node.get();
  }
  if (!common)
    result.converged = false;

  ordered_json s;
  s["name"] = scenario_.name;
  s["rng_seed"] = scenario_.sim.rng_seed;
  s["nodes"] = n;
  s["duration_ms"] = scenario_.duration_ms;
  s["drain_ms"] = scenario_.drain_ms;
  s["converged"] = result.converged;
  s["head_height"] = best ? best->head_height() : 0;
  s["head_hash"] = best ? best->head_hash().hex() : "";
  ordered_json heads = ordered_json::array();
  for (const auto &node : nodes_)
    heads.push_back({{"node", node->index()},
                     {"height", node->head_height()},
                     {"hash", node->head_hash().hex()},
                     {"crashed", sim.is_crashed(node->index())}});
  s["heads"] = std::move(heads);

  std::map<Address, NodeIndex> miner_of;
  for (const auto &node : nodes_)
    miner_of[node->address()] = node->index();
  std::map<NodeIndex, std::uint64_t> won;
  std::uint64_t chain_blocks = 0;
  if (best)
    for (const auto &b : best->canonical_chain())
      if (b.header.height > 0) {
        ++chain_blocks;
        if (auto it = miner_of.find(b.header.miner); it != miner_of.end())
          ++won[it->second];
      }
  ordered_json shares;
  double total = scenario_.sim.total_share();
  for (const auto &[i, share] : scenario_.sim.hash_rate_shares) {
    shares[std::to_string(i)] = {
        {"configured", total > 0 ? share / total : 0.0},
        {"blocks", won[i]},
        {"measured", chain_blocks ? static_cast<double>(won[i]) / chain_blocks : 0.0}};
  }
  s["miner_shares"] = std::move(shares);
  s["fork_count"] = result.metrics.fork_count;

  std::uint64_t submitted = 0, accepted = 0;
  for (const auto &line : result.trace) {
    if (line.find("\"kind\":\"SUBMIT\"") == std::string::npos)
      continue;
    ++submitted;
    if (line.find("\"accepted\":true") != std::string::npos)
      ++accepted;
  }
  s["transactions"] = {{"submitted", submitted},
                       {"accepted", accepted},
                       {"confirmed", result.metrics.confirm_latency_ms.size()},
                       {"confirm_latency_ms",
                        distribution_summary(result.metrics.confirm_latency_ms)}};
  s["block_propagation_ms"] = distribution_summary(result.metrics.propagation_ms);
  s["messages"] = {{"delivered", sim.delivered_count()}, {"dropped", sim.dropped_count()}};
  ordered_json outages = ordered_json::array();
  for (const auto &o : result.outages) {
    ordered_json j;
    j["node"] = o.node;
    j["crash_ms"] = o.crash_ms;
    j["restart_ms"] = o.restart_ms ? ordered_json(*o.restart_ms) : ordered_json(nullptr);
    j["network_height_at_crash"] = o.network_height_at_crash;
    j["network_height_at_restart"] = o.network_height_at_restart
                                         ? ordered_json(*o.network_height_at_restart)
                                         : ordered_json(nullptr);
    outages.push_back(std::move(j));
  }
  s["outages"] = std::move(outages);
  result.summary = std::move(s);
  return result;
}

void write_run_outputs(const RunResult &result, const fs::path &out_dir) {
  fs::create_directories(out_dir / "chains");
  std::string trace;
  for (const auto &line : result.trace) {
    trace += line;
    trace += '\n';
  }
  write_text_file((out_dir / "trace.jsonl").string(), trace);
  write_text_file((out_dir / "metrics.csv").string(), result.metrics.csv());
  write_text_file((out_dir / "summary.json").string(), result.summary.dump(2) + "\n");
  for (std::size_t i = 0; i < result.chain_files.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "node_%02zu.jsonl", i);
    write_text_file((out_dir / "chains" / name).string(), result.chain_files[i]);
  }
}

} // namespace chainsim
