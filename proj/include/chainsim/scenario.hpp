#pragma once

#include <filesystem>
#include <optional>

#include <nlohmann/json.hpp>

#include "chainsim/ledger.hpp"
#include "chainsim/net_sim.hpp"
#include "chainsim/pow.hpp"

namespace chainsim {

/// Key seed for the i-th scenario account ("account" allocations and
/// generated workload senders).
KeySeed account_seed(std::uint64_t index);
/// Key seed of simulated node i.
KeySeed node_seed(std::uint64_t index);

struct CrashEvent {
  sim::NodeIndex node = 0;
  sim::SimTime crash_ms = 0;
  std::optional<sim::SimTime> restart_ms;
};

struct WorkloadTx {
  sim::SimTime at_ms = 0;
  sim::NodeIndex node = 0;
  KeySeed sender_seed;
  Address recipient;
  std::uint64_t amount = 0;
  std::uint64_t fee = 0;
  /// Blob stored off-chain and linked from the payload.
  std::optional<std::filesystem::path> blob;
};

struct MineEvent {
  sim::SimTime at_ms = 0;
  sim::NodeIndex node = 0;
};

/// A parsed, validated scenario. Generated workload entries are expanded at
/// load time from the scenario seed, so the struct fully describes the run.
struct Scenario {
  std::string name;
  sim::SimConfig sim;
  DifficultyBits difficulty_bits = 8;
  sim::SimTime sync_interval_ms = 1000;
  std::size_t node_count = 0;
  std::vector<sim::NodeIndex> bootstrap{0};
  sim::SimTime join_stagger_ms = 10;
  std::vector<CrashEvent> crashes;
  std::vector<Allocation> allocations;
  std::vector<WorkloadTx> workload;
  std::vector<MineEvent> mine_schedule;
  sim::SimTime duration_ms = 0;
  /// Extra time after duration_ms with mining stopped so the network settles.
  sim::SimTime drain_ms = 10'000;
  std::size_t mempool_capacity = 10'000;
};

/// Throws sim::ConfigError on any schema or range problem. Relative blob
/// paths resolve against `base_dir`. `seed_override` replaces sim.rng_seed
/// before the workload generator runs.
Scenario parse_scenario(const nlohmann::json &j, const std::filesystem::path &base_dir,
                        std::optional<std::uint64_t> seed_override = std::nullopt);

Scenario load_scenario(const std::filesystem::path &path,
                       std::optional<std::uint64_t> seed_override = std::nullopt);

} // namespace chainsim
