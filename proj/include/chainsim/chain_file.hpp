#pragma once

#include <nlohmann/json.hpp>

#include "chainsim/ledger.hpp"

// Chain files hold one compact JSON object per line, genesis first:
//
//   {"height":1,"hash":"..","prev_hash":"..","timestamp":600,"difficulty_bits":8,
//    "pow_nonce":91,"miner":"..","tx_root":"..","transactions":["<tx hex>",...]}
//
// The genesis line additionally carries "allocations":[{"address":"..","amount":n}].
// "hash" is the block hash and is checked on load, so any edit to a header
// field is caught on the line where it happens.
namespace chainsim {

nlohmann::ordered_json block_to_json(const Block &block);

/// Strict parse: all fields required, no unknown keys, lowercase hex.
/// Throws DecodeError. The stored "hash" is returned through `claimed_hash`.
Block block_from_json(const nlohmann::json &j, Digest256 *claimed_hash = nullptr);

std::string write_chain_file(std::span<const Block> chain);

/// Parses every line and checks each stored hash; throws DecodeError naming
/// the offending line. Performs no ledger validation.
std::vector<Block> read_chain_file(std::string_view text);

struct ChainFileVerdict {
  bool ok = true;
  std::uint64_t failed_height = 0;
  BlockVerdict cause;
  std::vector<Block> blocks; // the valid prefix
  AccountState state;
};

/// Parses and replays a chain file line by line. The first line that fails
/// to parse, carries a wrong hash, or fails validation is reported by its
/// position (which is its height in a well-formed file).
ChainFileVerdict verify_chain_file(std::string_view text);

std::string read_text_file(const std::string &path);
void write_text_file(const std::string &path, std::string_view text);

} // namespace chainsim
