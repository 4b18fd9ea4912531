#include "chainsim/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <unordered_map>

namespace chainsim {

using nlohmann::json;

namespace {

struct Mined {
  std::uint64_t time = 0;
  std::uint64_t node = 0;
  std::uint64_t height = 0;
  std::string prev;
  std::vector<std::string> txs;
};

} // namespace

MetricsReport compute_metrics(std::span<const std::string> trace) {
  MetricsReport r;
  std::unordered_map<std::string, Mined> mined;
  std::vector<std::string> mined_order;
  std::unordered_map<std::string, std::uint64_t> last_receipt;
  struct Submit {
    std::uint64_t time;
    std::uint64_t node;
    std::string tx;
  };
  std::vector<Submit> submits;
  std::uint64_t end_time = 0;

  for (const auto &line : trace) {
    json j = json::parse(line);
    std::uint64_t t = j.at("time").get<std::uint64_t>();
    end_time = std::max(end_time, t);
    const std::string kind = j.at("kind").get<std::string>();
    if (!j.contains("node")) {
      // Delivery record.
      if (kind == "BLOCK_ANNOUNCE" && j.contains("ref")) {
        auto &last = last_receipt[j["ref"].get<std::string>()];
        last = std::max(last, t);
      }
      continue;
    }
    std::uint64_t node = j["node"].get<std::uint64_t>();
    std::string node_s = std::to_string(node);
    if (kind == "HEAD") {
      std::uint64_t h = j.at("height").get<std::uint64_t>();
      r.final_heads[node] = {h, j.at("hash").get<std::string>()};
      r.rows.push_back({t, "head_height", node_s, h});
      if (auto depth = j.value("reorg_depth", std::uint64_t{0}); depth > 0)
        r.rows.push_back({t, "reorg_depth", node_s, depth});
    } else if (kind == "MINED") {
      std::string hash = j.at("hash").get<std::string>();
      Mined m{t, node, j.at("height").get<std::uint64_t>(), j.at("prev").get<std::string>(), {}};
      for (const auto &tx : j.at("txs"))
        m.txs.push_back(tx.get<std::string>());
      r.rows.push_back({t, "blocks_mined", node_s, ++r.blocks_mined[node]});
      if (mined.emplace(hash, std::move(m)).second)
        mined_order.push_back(hash);
    } else if (kind == "SUBMIT") {
      if (j.value("accepted", false))
        submits.push_back({t, node, j.at("tx").get<std::string>()});
    }
  }

  std::map<std::uint64_t, std::uint64_t> per_height;
  for (const auto &[_, m] : mined)
    ++per_height[m.height];
  for (const auto &[_, n] : per_height)
    r.fork_count += n - 1;

  // Best final head: greatest height, then smallest hash for a stable pick.
  const HeadRecord *best = nullptr;
  for (const auto &[_, h] : r.final_heads)
    if (!best || h.height > best->height || (h.height == best->height && h.hash < best->hash))
      best = &h;
  std::unordered_map<std::string, std::uint64_t> included_at; // tx -> MINED time
  if (best) {
    for (auto it = mined.find(best->hash); it != mined.end(); it = mined.find(it->second.prev))
      for (const auto &tx : it->second.txs)
        included_at[tx] = it->second.time;
  }
  for (const auto &s : submits) {
    auto it = included_at.find(s.tx);
    if (it == included_at.end() || it->second < s.time)
      continue;
    std::uint64_t latency = it->second - s.time;
    r.confirm_latency_ms.push_back(latency);
    r.rows.push_back({it->second, "tx_confirm_latency_ms", std::to_string(s.node), latency});
  }

  for (const auto &hash : mined_order) {
    auto it = last_receipt.find(hash);
    if (it == last_receipt.end())
      continue;
    const Mined &m = mined.at(hash);
    std::uint64_t delay = it->second - m.time;
    r.propagation_ms.push_back(delay);
    r.rows.push_back({it->second, "block_propagation_ms", std::to_string(m.node), delay});
  }

  r.rows.push_back({end_time, "fork_count", "all", r.fork_count});
  std::stable_sort(r.rows.begin(), r.rows.end(),
                   [](const auto &a, const auto &b) { return a.time_ms < b.time_ms; });
  std::sort(r.confirm_latency_ms.begin(), r.confirm_latency_ms.end());
  std::sort(r.propagation_ms.begin(), r.propagation_ms.end());
  return r;
}

std::string MetricsReport::csv() const {
  std::string out = "time_ms,metric_name,node,value\n";
  for (const auto &row : rows) {
    out += std::to_string(row.time_ms);
    out += ',';
    out += row.metric;
    out += ',';
    out += row.node;
    out += ',';
    out += std::to_string(row.value);
    out += '\n';
  }
  return out;
}

nlohmann::ordered_json distribution_summary(const std::vector<std::uint64_t> &sorted) {
  nlohmann::ordered_json j;
  j["count"] = sorted.size();
  if (sorted.empty()) {
    j["mean"] = 0.0;
    j["p50"] = j["p90"] = j["p99"] = j["max"] = 0;
    return j;
  }
  double sum = 0;
  for (auto v : sorted)
    sum += static_cast<double>(v);
  // Nearest-rank percentile.
  auto pct = [&](double p) {
    auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * sorted.size()));
    return sorted[std::max<std::size_t>(rank, 1) - 1];
  };
  j["mean"] = sum / static_cast<double>(sorted.size());
  j["p50"] = pct(50);
  j["p90"] = pct(90);
  j["p99"] = pct(99);
  j["max"] = sorted.back();
  return j;
}

} // namespace chainsim
