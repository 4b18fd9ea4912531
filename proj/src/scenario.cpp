#include "chainsim/scenario.hpp"

#include <algorithm>
#include <set>

#include "chainsim/chain_file.hpp"

namespace chainsim {

using nlohmann::json;
using sim::ConfigError;
using sim::NodeIndex;
using sim::SimTime;

KeySeed account_seed(std::uint64_t index) { return derive_seed("chainsim/account", index); }
KeySeed node_seed(std::uint64_t index) { return derive_seed("chainsim/node", index); }

namespace {

// Small cursor over a JSON object that reports errors with the field path
// and rejects keys nobody asked for.
class Obj {
public:
  Obj(const json &j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object())
      throw ConfigError(path_ + ": expected an object");
  }

  bool has(const char *key) const { return j_.contains(key); }

  const json &at(const char *key) {
    used_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end())
      throw ConfigError(sub(key) + ": required");
    return *it;
  }

  std::uint64_t u64(const char *key) {
    const json &v = at(key);
    if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<std::int64_t>() < 0))
      throw ConfigError(sub(key) + ": expected a non-negative integer");
    return v.get<std::uint64_t>();
  }
  std::uint64_t u64_or(const char *key, std::uint64_t fallback) {
    return has(key) ? u64(key) : (used_.insert(key), fallback);
  }
  double real(const char *key) {
    const json &v = at(key);
    if (!v.is_number())
      throw ConfigError(sub(key) + ": expected a number");
    return v.get<double>();
  }
  double real_or(const char *key, double fallback) {
    return has(key) ? real(key) : (used_.insert(key), fallback);
  }
  std::string str(const char *key) {
    const json &v = at(key);
    if (!v.is_string())
      throw ConfigError(sub(key) + ": expected a string");
    return v.get<std::string>();
  }
  const json &array(const char *key) {
    const json &v = at(key);
    if (!v.is_array())
      throw ConfigError(sub(key) + ": expected an array");
    return v;
  }
  std::string sub(const std::string &key) const { return path_ + "." + key; }

  void done() const {
    for (const auto &[k, _] : j_.items())
      if (!used_.contains(k))
        throw ConfigError(sub(k) + ": unknown field");
  }

private:
  const json &j_;
  std::string path_;
  std::set<std::string> used_;
};

template <typename Fixed> Fixed parse_hex(const std::string &text, const std::string &where) {
  try {
    return Fixed::from_hex(text);
  } catch (const DecodeError &e) {
    throw ConfigError(where + ": " + e.what());
  }
}

NodeIndex node_ref(std::uint64_t n, std::size_t count, const std::string &where) {
  if (n >= count)
    throw ConfigError(where + ": node " + std::to_string(n) + " does not exist (scenario has " +
                      std::to_string(count) + " nodes)");
  return static_cast<NodeIndex>(n);
}

std::set<NodeIndex> node_set(const json &arr, std::size_t count, const std::string &where) {
  if (!arr.is_array())
    throw ConfigError(where + ": expected an array of node indices");
  std::set<NodeIndex> out;
  for (const auto &v : arr) {
    if (!v.is_number_unsigned())
      throw ConfigError(where + ": expected node indices");
    out.insert(node_ref(v.get<std::uint64_t>(), count, where));
  }
  return out;
}

// Key material for an account given as {"seed": hex} or {"account": i}.
KeySeed key_of(Obj &o, const char *seed_key, const char *account_key) {
  if (o.has(seed_key))
    return parse_hex<KeySeed>(o.str(seed_key), o.sub(seed_key));
  if (o.has(account_key))
    return account_seed(o.u64(account_key));
  throw ConfigError(o.sub(seed_key) + ": required (or " + account_key + ")");
}

Address address_of(Obj &o, const char *addr_key, const char *seed_key, const char *account_key) {
  if (o.has(addr_key))
    return parse_hex<Address>(o.str(addr_key), o.sub(addr_key));
  return address_from_public_key(generate_keypair(key_of(o, seed_key, account_key)).public_key());
}

void parse_sim(Obj &o, Scenario &s) {
  auto &c = s.sim;
  c.rng_seed = o.u64_or("rng_seed", 1);
  c.latency_min_ms = o.u64_or("latency_min_ms", 10);
  c.latency_max_ms = o.u64_or("latency_max_ms", 50);
  c.drop_probability = o.real_or("drop_probability", 0.0);
  c.block_interval_target_ms = o.u64_or("block_interval_target_ms", 1000);
  std::uint64_t d = o.u64_or("difficulty_bits", 8);
  if (d > 24)
    throw ConfigError(o.sub("difficulty_bits") + ": at most 24 in simulation");
  s.difficulty_bits = static_cast<DifficultyBits>(d);
  s.sync_interval_ms = o.u64_or("sync_interval_ms", 1000);
  if (o.has("hash_rate_shares")) {
    const json &shares = o.at("hash_rate_shares");
    if (!shares.is_object())
      throw ConfigError(o.sub("hash_rate_shares") + ": expected an object of index -> share");
    for (const auto &[k, v] : shares.items()) {
      std::string where = o.sub("hash_rate_shares") + "." + k;
      if (k.empty() || !std::all_of(k.begin(), k.end(), ::isdigit) || k.size() > 9)
        throw ConfigError(where + ": key must be a node index");
      if (!v.is_number())
        throw ConfigError(where + ": expected a number");
      c.hash_rate_shares[node_ref(std::stoull(k), s.node_count, where)] = v.get<double>();
    }
  }
  if (o.has("partition_schedule")) {
    const json &arr = o.array("partition_schedule");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      Obj p(arr[i], o.sub("partition_schedule") + "[" + std::to_string(i) + "]");
      sim::Partition part;
      part.start_ms = p.u64("start_ms");
      part.end_ms = p.u64("end_ms");
      part.a = node_set(p.at("a"), s.node_count, p.sub("a"));
      part.b = node_set(p.at("b"), s.node_count, p.sub("b"));
      p.done();
      for (NodeIndex n : part.a)
        if (part.b.contains(n))
          throw ConfigError(p.sub("b") + ": node " + std::to_string(n) + " is on both sides");
      c.partition_schedule.push_back(std::move(part));
    }
  }
  o.done();
  try {
    c.validate(s.node_count);
  } catch (const ConfigError &e) {
    throw ConfigError(std::string("sim: ") + e.what());
  }
}

void parse_nodes(Obj &o, Scenario &s) {
  std::uint64_t count = o.u64("count");
  if (count == 0 || count > 4096)
    throw ConfigError(o.sub("count") + ": must be in [1, 4096]");
  s.node_count = count;
  if (o.has("bootstrap")) {
    auto set = node_set(o.at("bootstrap"), count, o.sub("bootstrap"));
    s.bootstrap.assign(set.begin(), set.end());
    if (s.bootstrap.empty())
      throw ConfigError(o.sub("bootstrap") + ": needs at least one node");
  }
  s.join_stagger_ms = o.u64_or("join_stagger_ms", 10);
  s.mempool_capacity = o.u64_or("mempool_capacity", 10'000);
  if (s.mempool_capacity == 0)
    throw ConfigError(o.sub("mempool_capacity") + ": must be positive");
  if (o.has("crash_schedule")) {
    const json &arr = o.array("crash_schedule");
    std::map<NodeIndex, SimTime> busy_until;
    for (std::size_t i = 0; i < arr.size(); ++i) {
      Obj c(arr[i], o.sub("crash_schedule") + "[" + std::to_string(i) + "]");
      CrashEvent e;
      e.node = node_ref(c.u64("node"), count, c.sub("node"));
      e.crash_ms = c.u64("crash_ms");
      if (c.has("restart_ms")) {
        e.restart_ms = c.u64("restart_ms");
        if (*e.restart_ms <= e.crash_ms)
          throw ConfigError(c.sub("restart_ms") + ": must come after crash_ms");
      }
      c.done();
      s.crashes.push_back(e);
    }
    // A node's crash windows must not overlap.
    auto sorted = s.crashes;
    std::stable_sort(sorted.begin(), sorted.end(), [](const auto &a, const auto &b) {
      return std::tie(a.node, a.crash_ms) < std::tie(b.node, b.crash_ms);
    });
    for (std::size_t i = 1; i < sorted.size(); ++i)
      if (sorted[i].node == sorted[i - 1].node &&
          (!sorted[i - 1].restart_ms || *sorted[i - 1].restart_ms > sorted[i].crash_ms))
        throw ConfigError(o.sub("crash_schedule") + ": overlapping crashes of node " +
                          std::to_string(sorted[i].node));
  }
  o.done();
}

void parse_generator(Obj &g, Scenario &s, std::uint64_t seed) {
  std::uint64_t count = g.u64("count");
  std::uint64_t senders = g.u64("senders");
  std::uint64_t accounts = g.u64_or("accounts", senders);
  SimTime start = g.u64("start_ms");
  SimTime end = g.u64("end_ms");
  std::uint64_t amount_min = g.u64_or("amount_min", 1);
  std::uint64_t amount_max = g.u64_or("amount_max", 100);
  std::uint64_t fee_min = g.u64_or("fee_min", 1);
  std::uint64_t fee_max = g.u64_or("fee_max", 20);
  g.done();
  if (senders == 0 || accounts < 2)
    throw ConfigError(g.sub("senders") + ": need at least one sender and two accounts");
  if (end < start || amount_max < amount_min || fee_max < fee_min)
    throw ConfigError(g.sub("end_ms") + ": empty range in generator");

  sim::Rng rng(sim::derive_stream_seed(seed, 3, 0));
  std::vector<KeySeed> seeds;
  std::vector<Address> addrs;
  for (std::uint64_t i = 0; i < std::max(senders, accounts); ++i) {
    seeds.push_back(account_seed(i));
    addrs.push_back(address_from_public_key(generate_keypair(seeds.back()).public_key()));
  }
  std::vector<WorkloadTx> out;
  for (std::uint64_t i = 0; i < count; ++i) {
    WorkloadTx tx;
    tx.at_ms = rng.uniform(start, end);
    std::uint64_t from = rng.uniform(0, senders - 1);
    std::uint64_t to = rng.uniform(0, accounts - 2);
    if (to >= from)
      ++to;
    tx.sender_seed = seeds[from];
    tx.recipient = addrs[to];
    tx.amount = rng.uniform(amount_min, amount_max);
    tx.fee = rng.uniform(fee_min, fee_max);
    // Each sender has a home node so its nonces chain on one mempool.
    tx.node = static_cast<NodeIndex>(from % s.node_count);
    out.push_back(std::move(tx));
  }
  s.workload.insert(s.workload.end(), out.begin(), out.end());
}

void parse_workload(const json &w, Scenario &s, const std::filesystem::path &base_dir) {
  auto explicit_list = [&](const json &arr, const std::string &path) {
    if (!arr.is_array())
      throw ConfigError(path + ": expected an array");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      Obj t(arr[i], path + "[" + std::to_string(i) + "]");
      WorkloadTx tx;
      tx.at_ms = t.u64("at_ms");
      tx.node = node_ref(t.u64("node"), s.node_count, t.sub("node"));
      tx.sender_seed = key_of(t, "sender_seed", "sender_account");
      tx.recipient = address_of(t, "recipient", "recipient_seed", "recipient_account");
      tx.amount = t.u64("amount");
      tx.fee = t.u64("fee");
      if (t.has("blob"))
        tx.blob = base_dir / t.str("blob");
      t.done();
      s.workload.push_back(std::move(tx));
    }
  };
  if (w.is_array()) {
    explicit_list(w, "workload");
    return;
  }
  Obj o(w, "workload");
  if (o.has("transactions"))
    explicit_list(o.at("transactions"), "workload.transactions");
  if (o.has("generator")) {
    Obj g(o.at("generator"), "workload.generator");
    parse_generator(g, s, s.sim.rng_seed);
  }
  o.done();
}

} // namespace

Scenario parse_scenario(const json &j, const std::filesystem::path &base_dir,
                        std::optional<std::uint64_t> seed_override) {
  Scenario s;
  Obj root(j, "scenario");
  s.name = root.str("name");
  {
    Obj nodes(root.at("nodes"), "nodes");
    parse_nodes(nodes, s);
  }
  {
    Obj simo(root.at("sim"), "sim");
    parse_sim(simo, s);
  }
  if (seed_override)
    s.sim.rng_seed = *seed_override;
  s.duration_ms = root.u64("duration_ms");
  s.drain_ms = root.u64_or("drain_ms", 10'000);

  if (root.has("genesis_allocations")) {
    const json &arr = root.array("genesis_allocations");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      Obj a(arr[i], "genesis_allocations[" + std::to_string(i) + "]");
      Allocation alloc{address_of(a, "address", "seed", "account"), a.u64("amount")};
      a.done();
      s.allocations.push_back(alloc);
    }
  }
  if (root.has("mine_schedule")) {
    const json &arr = root.array("mine_schedule");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      Obj m(arr[i], "mine_schedule[" + std::to_string(i) + "]");
      MineEvent e;
      e.at_ms = m.u64("at_ms");
      e.node = node_ref(m.u64("node"), s.node_count, m.sub("node"));
      m.done();
      s.mine_schedule.push_back(e);
    }
  }
  if (root.has("workload"))
    parse_workload(root.at("workload"), s, base_dir);
  root.done();

  std::stable_sort(s.workload.begin(), s.workload.end(),
                   [](const auto &a, const auto &b) { return a.at_ms < b.at_ms; });

  std::set<Address> funded;
  for (const auto &a : s.allocations)
    if (a.amount > 0)
      funded.insert(a.address);
  for (const auto &tx : s.workload) {
    Address sender = address_from_public_key(generate_keypair(tx.sender_seed).public_key());
    if (!funded.contains(sender))
      throw ConfigError("workload sender " + sender.hex() + " has no genesis allocation");
    if (tx.blob && !std::filesystem::is_regular_file(*tx.blob))
      throw ConfigError("workload blob " + tx.blob->string() + " is not a readable file");
  }
  return s;
}

Scenario load_scenario(const std::filesystem::path &path,
                       std::optional<std::uint64_t> seed_override) {
  std::string text;
  try {
    text = read_text_file(path.string());
  } catch (const std::exception &e) {
    throw ConfigError(e.what());
  }
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception &e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return parse_scenario(j, path.parent_path(), seed_override);
}

} // namespace chainsim
