#include "chainsim/rpc.hpp"

#include "chainsim/chain_file.hpp"

namespace chainsim::rpc {

using nlohmann::json;

namespace {

struct RpcError {
  int code;
  std::string message;
};

const json &param(const json &params, const char *name) {
  if (!params.is_object())
    throw RpcError{code::invalid_params, "params must be an object"};
  auto it = params.find(name);
  if (it == params.end())
    throw RpcError{code::invalid_params, std::string("missing param \"") + name + "\""};
  return *it;
}

std::string string_param(const json &params, const char *name) {
  const json &v = param(params, name);
  if (!v.is_string())
    throw RpcError{code::invalid_params, std::string("param \"") + name + "\" must be a string"};
  return v.get<std::string>();
}

template <typename Fixed> Fixed fixed_param(const json &params, const char *name) {
  try {
    return Fixed::from_hex(string_param(params, name));
  } catch (const DecodeError &e) {
    throw RpcError{code::invalid_params, std::string("param \"") + name + "\": " + e.what()};
  }
}

Bytes hex_param(const json &params, const char *name) {
  try {
    return from_hex(string_param(params, name));
  } catch (const DecodeError &e) {
    throw RpcError{code::invalid_params, std::string("param \"") + name + "\": " + e.what()};
  }
}

int tx_error_code(TxCode cause) {
  switch (cause) {
  case TxCode::bad_signature: return code::bad_signature;
  case TxCode::bad_nonce: return code::bad_nonce;
  case TxCode::insufficient_funds: return code::insufficient_funds;
  case TxCode::duplicate: return code::duplicate;
  case TxCode::payload_too_large: return code::payload_too_large;
  case TxCode::ok: break;
  }
  return code::internal_error;
}

void require_no_params(const json &params) {
  if (!params.is_null() && !(params.is_object() && params.empty()) &&
      !(params.is_array() && params.empty()))
    throw RpcError{code::invalid_params, "method takes no params"};
}

json block_json(const Node &node, const Block &b) {
  json j = json::parse(block_to_json(b).dump());
  j["canonical"] = node.store().is_canonical(block_hash(b));
  return j;
}

} // namespace

json make_error(const json &id, int code, const std::string &message) {
  return {{"jsonrpc", "2.0"}, {"error", {{"code", code}, {"message", message}}}, {"id", id}};
}

json Dispatcher::call(const std::string &method, const json &params) {
  if (method == "chain_submitTransaction") {
    Bytes raw = hex_param(params, "tx");
    Transaction tx;
    try {
      tx = decode_transaction(raw);
    } catch (const DecodeError &e) {
      throw RpcError{code::invalid_params, std::string("malformed transaction: ") + e.what()};
    }
    auto out = node_.on_transaction(tx, std::nullopt);
    switch (out.status) {
    case TxStatus::relayed: return tx_hash(tx).hex();
    case TxStatus::duplicate: throw RpcError{code::duplicate, "duplicate"};
    case TxStatus::pool_full: throw RpcError{code::pool_full, "pool_full"};
    case TxStatus::rejected:
      throw RpcError{tx_error_code(out.cause), std::string(to_string(out.cause))};
    }
  }
  if (method == "chain_getBlockByHeight") {
    const json &h = param(params, "height");
    if (!h.is_number_integer() || (!h.is_number_unsigned() && h.get<std::int64_t>() < 0))
      throw RpcError{code::invalid_params, "height must be a non-negative integer"};
    auto hash = node_.store().canonical_at(h.get<std::uint64_t>());
    if (!hash)
      return nullptr;
    return block_json(node_, node_.store().get(*hash));
  }
  if (method == "chain_getBlockByHash") {
    auto hash = fixed_param<Digest256>(params, "hash");
    const Block *b = node_.store().find(hash);
    if (!b)
      return nullptr;
    return block_json(node_, *b);
  }
  if (method == "chain_getBalance") {
    auto addr = fixed_param<Address>(params, "address");
    return node_.state().balance(addr);
  }
  if (method == "chain_getTransactionStatus") {
    auto hash = fixed_param<Digest256>(params, "hash");
    if (auto h = node_.confirmation_height(hash))
      return {{"status", "confirmed"}, {"height", *h}};
    if (node_.mempool().contains(hash))
      return {{"status", "pending"}};
    return {{"status", "unknown"}};
  }
  if (method == "chain_getHead") {
    require_no_params(params);
    return {{"height", node_.head_height()}, {"hash", node_.head_hash().hex()}};
  }
  if (method == "chain_getMempool") {
    require_no_params(params);
    json out = json::array();
    for (const auto &[_, tx] : node_.mempool().entries_by_arrival())
      out.push_back(tx_hash(tx).hex());
    return out;
  }
  if (method == "net_getPeers") {
    require_no_params(params);
    json out = json::array();
    for (const auto &c : node_.routing_table().all_contacts())
      out.push_back({{"node_id", c.node_id.hex()}, {"endpoint", c.endpoint}});
    return out;
  }
  if (store_ && method == "store_putBlob") {
    Bytes data = hex_param(params, "data");
    try {
      auto ref = store_->put(data);
      return {{"digest", ref.digest.hex()}, {"size", *ref.size_bytes}};
    } catch (const std::invalid_argument &e) {
      throw RpcError{code::invalid_params, e.what()};
    }
  }
  if (store_ && method == "store_getBlob") {
    auto digest = fixed_param<Digest256>(params, "digest");
    auto r = store_->get(digest);
    if (r.status == BlobStatus::not_found)
      throw RpcError{code::blob_not_found, "not_found"};
    if (r.status == BlobStatus::integrity_error)
      throw RpcError{code::blob_integrity, "integrity_error"};
    return {{"data", to_hex(r.blob)}};
  }
  if (dev_ && method == "dev_mineBlock") {
    require_no_params(params);
    return block_json(node_, node_.mine_block());
  }
  throw RpcError{code::method_not_found, "method not found: " + method};
}

json Dispatcher::handle_one(const json &request) {
  if (!request.is_object())
    return make_error(nullptr, code::invalid_request, "request must be an object");
  json id = nullptr;
  bool notification = true;
  if (auto it = request.find("id"); it != request.end()) {
    if (!(it->is_string() || it->is_number() || it->is_null()))
      return make_error(nullptr, code::invalid_request, "invalid id");
    id = *it;
    notification = false;
  }
  auto version = request.find("jsonrpc");
  if (version == request.end() || *version != "2.0")
    return make_error(id, code::invalid_request, "jsonrpc must be \"2.0\"");
  auto method = request.find("method");
  if (method == request.end() || !method->is_string())
    return make_error(id, code::invalid_request, "method must be a string");
  json params = nullptr;
  if (auto it = request.find("params"); it != request.end()) {
    if (!it->is_object() && !it->is_array())
      return make_error(id, code::invalid_request, "params must be an object or array");
    params = *it;
  }

  json response;
  try {
    json result = call(method->get<std::string>(), params);
    response = {{"jsonrpc", "2.0"}, {"result", std::move(result)}, {"id", id}};
  } catch (const RpcError &e) {
    response = make_error(id, e.code, e.message);
  } catch (const std::exception &e) {
    response = make_error(id, code::internal_error, e.what());
  }
  if (notification)
    return nullptr;
  return response;
}

json Dispatcher::handle(const json &request) {
  if (!request.is_array())
    return handle_one(request);
  if (request.empty())
    return make_error(nullptr, code::invalid_request, "empty batch");
  json out = json::array();
  for (const auto &r : request) {
    json one = handle_one(r);
    if (!one.is_null())
      out.push_back(std::move(one));
  }
  if (out.empty())
    return nullptr;
  return out;
}

std::string Dispatcher::handle_text(std::string_view body) {
  json request;
  try {
    request = json::parse(body);
  } catch (const json::exception &e) {
    return make_error(nullptr, code::parse_error, "parse error").dump();
  }
  json response = handle(request);
  return response.is_null() ? std::string() : response.dump();
}

} // namespace chainsim::rpc
