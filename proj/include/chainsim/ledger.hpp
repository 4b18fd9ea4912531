#pragma once

#include <map>
#include <string>
#include <vector>

#include "chainsim/crypto.hpp"
#include "chainsim/pow.hpp"

namespace chainsim {

using Address = FixedBytes<20, struct AddressTag>;

/// First 20 bytes of SHA-256(public key).
Address address_from_public_key(const PublicKey &public_key);

inline constexpr std::size_t kMaxPayloadBytes = 1024;
inline constexpr std::size_t kMaxBlockTxs = 100;

struct Transaction {
  PublicKey sender;
  Address recipient;
  std::uint64_t amount = 0;
  std::uint64_t fee = 0;
  std::uint64_t nonce = 0;
  Bytes payload;
  Signature signature;

  Address sender_address() const { return address_from_public_key(sender); }

  bool operator==(const Transaction &) const = default;
};

// Canonical encoding:
//   sender(32) | recipient(20) | amount u64 | fee u64 | nonce u64 |
//   payload_len u16 | payload | signature(64)
// Signing bytes are the same encoding without the trailing signature.
// Encoders throw std::invalid_argument when the payload exceeds kMaxPayloadBytes.
Bytes tx_signing_bytes(const Transaction &tx);
void encode_transaction(ByteWriter &out, const Transaction &tx);
Bytes encode_transaction(const Transaction &tx);
Transaction decode_transaction(ByteReader &in);
Transaction decode_transaction(ByteView data);
Digest256 tx_hash(const Transaction &tx);

Transaction make_transaction(const KeyPair &sender, const Address &recipient,
                             std::uint64_t amount, std::uint64_t fee, std::uint64_t nonce,
                             Bytes payload = {});

/// Initial balance carried by the genesis block.
struct Allocation {
  Address address;
  std::uint64_t amount = 0;

  bool operator==(const Allocation &) const = default;
};

inline constexpr std::size_t kHeaderSize = 8 + 32 + 8 + 1 + 8 + 20 + 32;
inline constexpr std::size_t kPowNonceOffset = 8 + 32 + 8 + 1;

struct BlockHeader {
  std::uint64_t height = 0;
  Digest256 prev_hash;
  std::uint64_t timestamp = 0;
  DifficultyBits difficulty_bits = 0;
  std::uint64_t pow_nonce = 0;
  Address miner;
  Digest256 tx_root;

  bool operator==(const BlockHeader &) const = default;
};

/// A block. Only the genesis block carries allocations; for genesis the
/// tx_root commits to the allocation list instead of the (empty) tx list.
struct Block {
  BlockHeader header;
  std::vector<Transaction> transactions;
  std::vector<Allocation> allocations;

  bool operator==(const Block &) const = default;
};

std::array<std::uint8_t, kHeaderSize> encode_header(const BlockHeader &header);

/// SHA-256 of the encoded header.
Digest256 block_hash(const BlockHeader &header);
inline Digest256 block_hash(const Block &block) { return block_hash(block.header); }

/// SHA-256 over the concatenated canonical transaction encodings.
Digest256 compute_tx_root(std::span<const Transaction> txs);

/// SHA-256 over address(20) | amount u64 for each allocation, in order.
Digest256 compute_allocation_root(std::span<const Allocation> allocations);

/// header | u16 tx count | txs | u16 allocation count | allocations
void encode_block(ByteWriter &out, const Block &block);
Bytes encode_block(const Block &block);
Block decode_block(ByteReader &in);
Block decode_block(ByteView data);

/// Account balances and next expected nonces. Absent entries read as zero.
struct AccountState {
  std::map<Address, std::uint64_t> balances;
  std::map<Address, std::uint64_t> nonces;

  std::uint64_t balance(const Address &a) const;
  std::uint64_t next_nonce(const Address &a) const;
  std::uint64_t total_supply() const;

  /// Canonical serialization, sorted by address; zero entries are omitted.
  Bytes encode() const;
  Digest256 digest() const { return hash_bytes(encode()); }

  bool operator==(const AccountState &other) const { return encode() == other.encode(); }
};

AccountState genesis_state(const Block &genesis);

enum class TxCode {
  ok,
  bad_signature,
  bad_nonce,
  insufficient_funds,
  payload_too_large,
  duplicate,
};

std::string_view to_string(TxCode code);

/// Full transaction rules against a state: payload bound, signature over the
/// signing bytes, exact next nonce, and balance >= amount + fee.
TxCode validate_transaction(const Transaction &tx, const AccountState &state);

/// Same rules against an explicit nonce and spendable balance. Callers that
/// already verified the signature may skip it.
TxCode check_transaction(const Transaction &tx, std::uint64_t expected_nonce,
                         std::uint64_t spendable, bool check_signature = true);

class BlockApplyError : public std::runtime_error {
public:
  BlockApplyError(std::size_t index, TxCode cause);

  std::size_t tx_index() const { return index_; }
  TxCode cause() const { return cause_; }

private:
  std::size_t index_;
  TxCode cause_;
};

/// Settles every transaction in order, then credits the miner with
/// block_reward + fees. The input state is not modified; a rule violation
/// rejects the whole block with BlockApplyError.
AccountState apply_block(const AccountState &state, const Block &block);

enum class BlockCode {
  ok,
  malformed,
  bad_hash,
  bad_genesis,
  bad_link,
  bad_tx_root,
  bad_pow,
  bad_tx,
  too_many_txs,
  bad_timestamp,
};

std::string_view to_string(BlockCode code);

struct BlockVerdict {
  BlockCode code = BlockCode::ok;
  std::size_t tx_index = 0;
  TxCode tx_cause = TxCode::ok;
  std::string detail;

  bool ok() const { return code == BlockCode::ok; }
  std::string describe() const;
};

BlockVerdict validate_genesis(const Block &genesis);

/// Structural, proof-of-work and transaction checks of `block` as a child of
/// `parent`, with `state_at_parent` the replayed state after `parent`.
/// When `state_after` is given and the block is valid, it receives the
/// settled state.
BlockVerdict validate_block(const Block &block, const Block &parent,
                            const AccountState &state_at_parent,
                            AccountState *state_after = nullptr);

struct ChainVerdict {
  bool ok = true;
  std::uint64_t failed_height = 0;
  BlockVerdict cause;
  AccountState state;
};

/// Replays `chain` (genesis first). On failure reports the position of the
/// first invalid block; `state` is the state after the last valid block.
ChainVerdict verify_blocks(std::span<const Block> chain);

} // namespace chainsim

template <> struct std::hash<chainsim::Address> : chainsim::FixedBytesHash {};
