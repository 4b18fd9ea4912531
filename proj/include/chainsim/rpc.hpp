#pragma once

#include <mutex>
#include <string>

#include <nlohmann/json.hpp>

#include "chainsim/node.hpp"
#include "chainsim/offchain_store.hpp"

namespace chainsim::rpc {

namespace code {
inline constexpr int parse_error = -32700;
inline constexpr int invalid_request = -32600;
inline constexpr int method_not_found = -32601;
inline constexpr int invalid_params = -32602;
inline constexpr int internal_error = -32603;
inline constexpr int bad_signature = 1001;
inline constexpr int bad_nonce = 1002;
inline constexpr int insufficient_funds = 1003;
inline constexpr int duplicate = 1004;
inline constexpr int payload_too_large = 1005;
inline constexpr int pool_full = 1006;
inline constexpr int blob_not_found = 1007;
inline constexpr int blob_integrity = 1008;
} // namespace code

/// JSON-RPC 2.0 dispatcher bound to one node. Used in-process by tests and
/// simulations, and behind the HTTP server for real clients.
///
/// Methods (params by name):
///   chain_submitTransaction {tx}        -> tx hash hex
///   chain_getBlockByHeight  {height}    -> block | null
///   chain_getBlockByHash    {hash}      -> block (with "canonical") | null
///   chain_getBalance        {address}   -> integer
///   chain_getTransactionStatus {hash}   -> {status[, height]}
///   chain_getHead                       -> {height, hash}
///   chain_getMempool                    -> [tx hash hex] in arrival order
///   net_getPeers                        -> [{node_id, endpoint}]
///   store_putBlob {data}, store_getBlob {digest}   when a store is attached
///   dev_mineBlock                       -> block, only when dev mode is on
class Dispatcher {
public:
  explicit Dispatcher(Node &node, OffchainStore *store = nullptr, bool dev = false)
      : node_(node), store_(store), dev_(dev) {}

  /// Handles a parsed request or batch. Returns null when nothing is to be
  /// sent back (notifications only).
  nlohmann::json handle(const nlohmann::json &request);

  /// Parses `body` and handles it; returns "" when there is no response.
  std::string handle_text(std::string_view body);

private:
  nlohmann::json handle_one(const nlohmann::json &request);
  nlohmann::json call(const std::string &method, const nlohmann::json &params);

  Node &node_;
  OffchainStore *store_;
  bool dev_;
};

nlohmann::json make_error(const nlohmann::json &id, int code, const std::string &message);

/// Blocking HTTP server: POST / with a JSON-RPC payload. Requests are
/// serialised onto the node through a mutex. `on_request` (if set) runs
/// under the same lock after each request, e.g. to advance the simulator.
class HttpServer {
public:
  HttpServer(Dispatcher &dispatcher, std::function<void()> on_request = {});
  ~HttpServer();

  /// Binds and serves until stop(). Returns false if binding fails.
  bool listen(const std::string &host, int port);
  /// Binds to an ephemeral port and returns it (or -1); call serve() next.
  int bind_any(const std::string &host);
  bool serve();
  void stop();

private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

} // namespace chainsim::rpc
