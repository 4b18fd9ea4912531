#pragma once

#include <filesystem>
#include <memory>

#include "chainsim/metrics.hpp"
#include "chainsim/node.hpp"
#include "chainsim/offchain_store.hpp"
#include "chainsim/rpc.hpp"
#include "chainsim/scenario.hpp"

namespace chainsim {

/// A node audit failed during a run.
class InvariantViolation : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct Outage {
  sim::NodeIndex node = 0;
  sim::SimTime crash_ms = 0;
  std::optional<sim::SimTime> restart_ms;
  std::uint64_t network_height_at_crash = 0;
  std::optional<std::uint64_t> network_height_at_restart;
};

struct RunResult {
  bool converged = false;
  std::vector<std::string> trace;
  MetricsReport metrics;
  std::vector<std::string> chain_files; // per node, canonical chain
  std::vector<Outage> outages;
  nlohmann::ordered_json summary;
};

struct RunOptions {
  /// Audit every live node this often (simulated ms); 0 audits only at the
  /// end and after restarts.
  sim::SimTime audit_interval_ms = 0;
  /// Where workload blobs are stored; a temporary directory when empty.
  std::filesystem::path blob_dir;
};

/// Builds the network described by a scenario and drives it to completion.
class Runner {
public:
  explicit Runner(Scenario scenario, RunOptions options = {});
  ~Runner();

  /// Throws InvariantViolation when an audit fails.
  RunResult run();

  const Scenario &scenario() const { return scenario_; }
  sim::Simulator &simulator() { return *sim_; }
  Node &node(sim::NodeIndex i) { return *nodes_.at(i); }
  const Block &genesis() const { return genesis_; }
  std::size_t size() const { return nodes_.size(); }

  /// Max head height over live nodes.
  std::uint64_t network_height() const;

private:
  std::vector<kademlia::Contact> bootstraps_for(sim::NodeIndex i) const;
  void start_mining(sim::NodeIndex i);
  void submit(const WorkloadTx &w);
  void audit_all(const char *when);

  Scenario scenario_;
  RunOptions options_;
  Block genesis_;
  std::unique_ptr<sim::Simulator> sim_;
  std::vector<std::unique_ptr<Node>> nodes_;
  std::unique_ptr<OffchainStore> blobs_;
  std::filesystem::path owned_blob_dir_;
  sim::SimTime mining_start_ = 0;
  std::vector<Outage> outages_;
  std::vector<std::string> audit_failures_;
};

/// Writes trace.jsonl, metrics.csv, summary.json and chains/node_NN.jsonl.
void write_run_outputs(const RunResult &result, const std::filesystem::path &out_dir);

} // namespace chainsim
