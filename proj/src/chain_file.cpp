#include "chainsim/chain_file.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace chainsim {

using nlohmann::json;
using nlohmann::ordered_json;

ordered_json block_to_json(const Block &block) {
  const auto &h = block.header;
  ordered_json j;
  j["height"] = h.height;
  j["hash"] = block_hash(h).hex();
  j["prev_hash"] = h.prev_hash.hex();
  j["timestamp"] = h.timestamp;
  j["difficulty_bits"] = h.difficulty_bits;
  j["pow_nonce"] = h.pow_nonce;
  j["miner"] = h.miner.hex();
  j["tx_root"] = h.tx_root.hex();
  auto txs = ordered_json::array();
  for (const auto &tx : block.transactions)
    txs.push_back(to_hex(encode_transaction(tx)));
  j["transactions"] = std::move(txs);
  if (h.height == 0 || !block.allocations.empty()) {
    auto allocs = ordered_json::array();
    for (const auto &a : block.allocations)
      allocs.push_back(ordered_json{{"address", a.address.hex()}, {"amount", a.amount}});
    j["allocations"] = std::move(allocs);
  }
  return j;
}

namespace {

const json &field(const json &j, const char *key) {
  auto it = j.find(key);
  if (it == j.end())
    throw DecodeError(std::string("missing field \"") + key + "\"");
  return *it;
}

std::uint64_t get_u64(const json &j, const char *key) {
  const json &v = field(j, key);
  if (!v.is_number_unsigned())
    throw DecodeError(std::string("field \"") + key + "\" is not an unsigned integer");
  return v.get<std::uint64_t>();
}

template <typename Fixed> Fixed get_fixed(const json &j, const char *key) {
  const json &v = field(j, key);
  if (!v.is_string())
    throw DecodeError(std::string("field \"") + key + "\" is not a string");
  return Fixed::from_hex(v.get_ref<const std::string &>());
}

void reject_unknown(const json &j, const std::set<std::string> &allowed) {
  for (const auto &[k, _] : j.items())
    if (!allowed.contains(k))
      throw DecodeError("unknown field \"" + k + "\"");
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) {
      lines.push_back(text.substr(start));
      break;
    }
    lines.push_back(text.substr(start, end - start));
    start = end + 1;
  }
  return lines;
}

Block parse_line(std::string_view line, Digest256 &claimed) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception &e) {
    throw DecodeError(e.what());
  }
  return block_from_json(j, &claimed);
}

} // namespace

Block block_from_json(const json &j, Digest256 *claimed_hash) {
  if (!j.is_object())
    throw DecodeError("block record is not an object");
  reject_unknown(j, {"height", "hash", "prev_hash", "timestamp", "difficulty_bits", "pow_nonce",
                     "miner", "tx_root", "transactions", "allocations"});
  Block b;
  auto &h = b.header;
  h.height = get_u64(j, "height");
  h.prev_hash = get_fixed<Digest256>(j, "prev_hash");
  h.timestamp = get_u64(j, "timestamp");
  std::uint64_t d = get_u64(j, "difficulty_bits");
  if (d > 255)
    throw DecodeError("difficulty_bits out of range");
  h.difficulty_bits = static_cast<DifficultyBits>(d);
  h.pow_nonce = get_u64(j, "pow_nonce");
  h.miner = get_fixed<Address>(j, "miner");
  h.tx_root = get_fixed<Digest256>(j, "tx_root");
  auto claimed = get_fixed<Digest256>(j, "hash");
  if (claimed_hash)
    *claimed_hash = claimed;

  const json &txs = field(j, "transactions");
  if (!txs.is_array())
    throw DecodeError("transactions is not an array");
  for (const auto &t : txs) {
    if (!t.is_string())
      throw DecodeError("transaction entry is not a string");
    b.transactions.push_back(decode_transaction(from_hex(t.get_ref<const std::string &>())));
  }
  if (auto it = j.find("allocations"); it != j.end()) {
    if (!it->is_array())
      throw DecodeError("allocations is not an array");
    for (const auto &a : *it) {
      if (!a.is_object())
        throw DecodeError("allocation entry is not an object");
      reject_unknown(a, {"address", "amount"});
      b.allocations.push_back({get_fixed<Address>(a, "address"), get_u64(a, "amount")});
    }
  }
  return b;
}

std::string write_chain_file(std::span<const Block> chain) {
  std::string out;
  for (const auto &b : chain) {
    out += block_to_json(b).dump();
    out += '\n';
  }
  return out;
}

std::vector<Block> read_chain_file(std::string_view text) {
  std::vector<Block> blocks;
  auto lines = split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    Digest256 claimed;
    Block b;
    try {
      b = parse_line(lines[i], claimed);
    } catch (const DecodeError &e) {
      throw DecodeError("line " + std::to_string(i + 1) + ": " + e.what());
    }
    if (block_hash(b) != claimed)
      throw DecodeError("line " + std::to_string(i + 1) + ": stored hash does not match");
    blocks.push_back(std::move(b));
  }
  return blocks;
}

ChainFileVerdict verify_chain_file(std::string_view text) {
  ChainFileVerdict out;
  auto fail = [&out](std::uint64_t height, BlockVerdict cause) {
    out.ok = false;
    out.failed_height = height;
    out.cause = std::move(cause);
    return out;
  };

  auto lines = split_lines(text);
  if (lines.empty())
    return fail(0, {BlockCode::bad_genesis, 0, TxCode::ok, "empty chain file"});

  for (std::size_t i = 0; i < lines.size(); ++i) {
    Digest256 claimed;
    Block b;
    try {
      b = parse_line(lines[i], claimed);
    } catch (const DecodeError &e) {
      return fail(i, {BlockCode::malformed, 0, TxCode::ok, e.what()});
    }
    if (block_hash(b) != claimed)
      return fail(i, {BlockCode::bad_hash, 0, TxCode::ok, "stored hash does not match header"});

    if (i == 0) {
      auto v = validate_genesis(b);
      if (!v.ok())
        return fail(0, v);
      out.state = genesis_state(b);
    } else {
      AccountState next;
      auto v = validate_block(b, out.blocks.back(), out.state, &next);
      if (!v.ok())
        return fail(i, v);
      out.state = std::move(next);
    }
    out.blocks.push_back(std::move(b));
  }
  return out;
}

std::string read_text_file(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string &path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
    throw std::runtime_error("cannot write " + path);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out)
    throw std::runtime_error("write failed for " + path);
}

} // namespace chainsim
