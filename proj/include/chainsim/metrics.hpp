#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace chainsim {

struct MetricRow {
  std::uint64_t time_ms = 0;
  std::string metric;
  std::string node; // node index, or "all"
  std::uint64_t value = 0;
};

struct HeadRecord {
  std::uint64_t height = 0;
  std::string hash;
};

/// Everything here is computed from trace lines alone.
struct MetricsReport {
  std::vector<MetricRow> rows;
  std::map<std::uint64_t, HeadRecord> final_heads;
  std::map<std::uint64_t, std::uint64_t> blocks_mined;
  std::uint64_t fork_count = 0;
  std::vector<std::uint64_t> confirm_latency_ms; // sorted
  std::vector<std::uint64_t> propagation_ms;     // sorted

  /// "time_ms,metric_name,node,value" header plus one line per row.
  std::string csv() const;
};

/// Rows:
///   head_height           at each HEAD record, per node
///   blocks_mined          running count at each MINED record, per node
///   reorg_depth           at each HEAD record that abandoned blocks, per node
///   fork_count            once at the end, "all": mined blocks beyond the
///                         first at each height
///   tx_confirm_latency_ms per accepted SUBMIT whose tx lands on the final
///                         best chain, stamped at the including block's MINED time
///   block_propagation_ms  per mined block: last BLOCK_ANNOUNCE receipt minus
///                         mining time, stamped at that last receipt
MetricsReport compute_metrics(std::span<const std::string> trace);

/// {"count","mean","p50","p90","p99","max"}; zeros when empty.
nlohmann::ordered_json distribution_summary(const std::vector<std::uint64_t> &sorted);

} // namespace chainsim
