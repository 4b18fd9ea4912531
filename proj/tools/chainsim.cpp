// chainsim command line: run scenarios, manage keys and chain files, serve RPC.
#include <CLI11.hpp>

#include <csignal>
#include <iostream>

#include "chainsim/chain_file.hpp"
#include "chainsim/rpc.hpp"
#include "chainsim/runner.hpp"

using namespace chainsim;

namespace {

constexpr int kOk = 0;
constexpr int kInvariant = 1;
constexpr int kUsage = 2;

int cmd_run(const std::string &path, const std::string &out, std::optional<std::uint64_t> seed,
            bool quiet, std::uint64_t audit_interval) {
  Scenario scenario;
  try {
    scenario = load_scenario(path, seed);
  } catch (const sim::ConfigError &e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kUsage;
  }
  RunOptions opts;
  opts.audit_interval_ms = audit_interval;
  if (!out.empty())
    opts.blob_dir = std::filesystem::path(out) / "blobs";
  RunResult result;
  try {
    Runner runner(std::move(scenario), opts);
    result = runner.run();
  } catch (const InvariantViolation &e) {
    std::cerr << "invariant violation: " << e.what() << "\n";
    return kInvariant;
  } catch (const sim::ConfigError &e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kUsage;
  }
  if (!out.empty())
    write_run_outputs(result, out);
  if (!quiet) {
    const auto &s = result.summary;
    std::cout << s["name"].get<std::string>() << ": converged=" << (result.converged ? "true" : "false")
              << " height=" << s["head_height"] << " head=" << s["head_hash"].get<std::string>()
              << " forks=" << s["fork_count"]
              << " confirmed=" << s["transactions"]["confirmed"] << "/"
              << s["transactions"]["submitted"] << "\n";
    if (!out.empty())
      std::cout << "outputs written to " << out << "\n";
  }
  return kOk;
}

int cmd_keygen(const std::string &seed_hex) {
  KeySeed seed;
  try {
    seed = KeySeed::from_hex(seed_hex);
  } catch (const DecodeError &e) {
    std::cerr << "seed must be 64 lowercase hex characters: " << e.what() << "\n";
    return kUsage;
  }
  auto keys = generate_keypair(seed);
  std::cout << "address: " << address_from_public_key(keys.public_key()).hex() << "\n"
            << "public_key: " << keys.public_key().hex() << "\n"
            << "node_id: " << node_id_from_public_key(keys.public_key()).hex() << "\n";
  return kOk;
}

std::optional<std::string> read_input(const std::string &path) {
  try {
    return read_text_file(path);
  } catch (const std::exception &e) {
    std::cerr << e.what() << "\n";
    return std::nullopt;
  }
}

int cmd_inspect(const std::string &path) {
  auto text = read_input(path);
  if (!text)
    return kUsage;
  std::vector<Block> blocks;
  try {
    blocks = read_chain_file(*text);
  } catch (const DecodeError &e) {
    std::cerr << "malformed chain file: " << e.what() << "\n";
    return kUsage;
  }
  if (blocks.empty()) {
    std::cerr << "empty chain file\n";
    return kUsage;
  }
  std::size_t total = 0;
  for (const auto &b : blocks)
    total += b.transactions.size();
  const auto &tip = blocks.back();
  std::cout << "height: " << tip.header.height << "\n"
            << "head: " << block_hash(tip).hex() << "\n"
            << "blocks: " << blocks.size() << "\n"
            << "transactions: " << total << "\n"
            << "difficulty_bits: " << int(tip.header.difficulty_bits) << "\n";
  for (const auto &b : blocks)
    std::cout << "  " << b.header.height << " " << block_hash(b).hex() << " txs=" << b.transactions.size()
              << " miner=" << b.header.miner.hex() << "\n";
  return kOk;
}

int cmd_verify(const std::string &path) {
  auto text = read_input(path);
  if (!text)
    return kUsage;
  auto v = verify_chain_file(*text);
  if (v.ok) {
    std::cout << "ok height=" << v.blocks.back().header.height
              << " head=" << block_hash(v.blocks.back()).hex() << "\n";
    return kOk;
  }
  std::cout << "FAIL at height " << v.failed_height << ": " << v.cause.describe() << "\n";
  return v.cause.code == BlockCode::malformed ? kUsage : kInvariant;
}

rpc::HttpServer *g_server = nullptr;

int cmd_serve(const std::string &chain_path, const std::string &host, int port,
              const std::string &key_hex, const std::string &blob_dir, bool dev) {
  auto text = read_input(chain_path);
  if (!text)
    return kUsage;
  auto v = verify_chain_file(*text);
  if (!v.ok) {
    std::cerr << "chain file fails verification at height " << v.failed_height << ": "
              << v.cause.describe() << "\n";
    return kUsage;
  }
  KeySeed seed = node_seed(0);
  if (!key_hex.empty()) {
    try {
      seed = KeySeed::from_hex(key_hex);
    } catch (const DecodeError &e) {
      std::cerr << "bad --key: " << e.what() << "\n";
      return kUsage;
    }
  }
  sim::SimConfig cfg;
  cfg.latency_min_ms = cfg.latency_max_ms = 0;
  sim::Simulator sim(cfg, 1);
  sim.set_tracing(false);
  Node node(sim, 0, generate_keypair(seed), v.blocks.front());
  for (std::size_t i = 1; i < v.blocks.size(); ++i)
    node.on_block(v.blocks[i], std::nullopt);
  std::unique_ptr<OffchainStore> store;
  if (!blob_dir.empty())
    store = std::make_unique<OffchainStore>(blob_dir);

  rpc::Dispatcher dispatcher(node, store.get(), dev);
  rpc::HttpServer server(dispatcher, [&sim] {
    while (sim.step()) {
    }
  });
  g_server = &server;
  std::signal(SIGINT, [](int) {
    if (g_server)
      g_server->stop();
  });
  std::signal(SIGTERM, [](int) {
    if (g_server)
      g_server->stop();
  });
  int bound = port;
  if (port == 0) {
    bound = server.bind_any(host);
    if (bound < 0) {
      std::cerr << "cannot bind " << host << "\n";
      return kUsage;
    }
  }
  std::cout << "serving JSON-RPC on http://" << host << ":" << bound << "/ (height "
            << node.head_height() << ")" << std::endl;
  bool ok = port == 0 ? server.serve() : server.listen(host, port);
  g_server = nullptr;
  if (!ok && port != 0) {
    std::cerr << "cannot listen on " << host << ":" << port << "\n";
    return kUsage;
  }
  return kOk;
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"chainsim: proof-of-work blockchain network simulator"};
  app.require_subcommand(1);

  std::string scenario_path, out_dir;
  std::optional<std::uint64_t> seed;
  bool quiet = false;
  std::uint64_t audit_interval = 0;
  auto *run = app.add_subcommand("run", "run a scenario");
  run->add_option("scenario", scenario_path, "scenario JSON file")->required();
  run->add_option("--out", out_dir, "output directory");
  run->add_option("--seed", seed, "override sim.rng_seed");
  run->add_flag("--quiet", quiet, "print nothing on success");
  run->add_option("--audit-interval", audit_interval, "audit all nodes every N simulated ms");

  std::string seed_hex;
  auto *keygen = app.add_subcommand("keygen", "derive address and public key from a seed");
  keygen->add_option("seed", seed_hex, "32-byte seed as hex")->required();

  std::string chain_path;
  auto *inspect = app.add_subcommand("inspect", "summarise a chain file");
  inspect->add_option("chain_file", chain_path)->required();
  auto *verify = app.add_subcommand("verify", "replay and check a chain file");
  verify->add_option("chain_file", chain_path)->required();

  std::string host = "127.0.0.1", key_hex, blob_dir;
  int port = 8545;
  bool dev = false;
  auto *serve = app.add_subcommand("serve-rpc", "serve JSON-RPC for one node loaded from a chain file");
  serve->add_option("chain_file", chain_path)->required();
  serve->add_option("--host", host);
  serve->add_option("--port", port, "0 picks a free port");
  serve->add_option("--key", key_hex, "node key seed as hex");
  serve->add_option("--blob-dir", blob_dir, "enable store_* methods backed by this directory");
  serve->add_flag("--dev", dev, "enable dev_mineBlock");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (*run)
      return cmd_run(scenario_path, out_dir, seed, quiet, audit_interval);
    if (*keygen)
      return cmd_keygen(seed_hex);
    if (*inspect)
      return cmd_inspect(chain_path);
    if (*verify)
      return cmd_verify(chain_path);
    if (*serve)
      return cmd_serve(chain_path, host, port, key_hex, blob_dir, dev);
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  }
  return kUsage;
}
