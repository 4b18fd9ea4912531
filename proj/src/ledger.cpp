#include "chainsim/ledger.hpp"

#include <limits>
#include <unordered_set>

namespace chainsim {

Address address_from_public_key(const PublicKey &public_key) {
  return Address::from_view(hash_bytes(public_key.view()).view().first(Address::width));
}

namespace {

void encode_unsigned(ByteWriter &out, const Transaction &tx) {
  if (tx.payload.size() > kMaxPayloadBytes)
    throw std::invalid_argument("payload exceeds " + std::to_string(kMaxPayloadBytes) +
                                " bytes");
  out.fixed(tx.sender);
  out.fixed(tx.recipient);
  out.u64(tx.amount);
  out.u64(tx.fee);
  out.u64(tx.nonce);
  out.u16(static_cast<std::uint16_t>(tx.payload.size()));
  out.raw(tx.payload);
}

bool checked_add(std::uint64_t a, std::uint64_t b, std::uint64_t &out) {
  if (a > std::numeric_limits<std::uint64_t>::max() - b)
    return false;
  out = a + b;
  return true;
}

} // namespace

Bytes tx_signing_bytes(const Transaction &tx) {
  ByteWriter w;
  encode_unsigned(w, tx);
  return std::move(w).take();
}

void encode_transaction(ByteWriter &out, const Transaction &tx) {
  encode_unsigned(out, tx);
  out.fixed(tx.signature);
}

Bytes encode_transaction(const Transaction &tx) {
  ByteWriter w;
  encode_transaction(w, tx);
  return std::move(w).take();
}

Transaction decode_transaction(ByteReader &in) {
  Transaction tx;
  tx.sender = in.fixed<PublicKey>();
  tx.recipient = in.fixed<Address>();
  tx.amount = in.u64();
  tx.fee = in.u64();
  tx.nonce = in.u64();
  std::uint16_t len = in.u16();
  if (len > kMaxPayloadBytes)
    throw DecodeError("payload length " + std::to_string(len) + " over bound");
  auto payload = in.raw(len);
  tx.payload.assign(payload.begin(), payload.end());
  tx.signature = in.fixed<Signature>();
  return tx;
}

Transaction decode_transaction(ByteView data) {
  ByteReader r(data);
  auto tx = decode_transaction(r);
  r.expect_done();
  return tx;
}

Digest256 tx_hash(const Transaction &tx) { return hash_bytes(encode_transaction(tx)); }

Transaction make_transaction(const KeyPair &sender, const Address &recipient,
                             std::uint64_t amount, std::uint64_t fee, std::uint64_t nonce,
                             Bytes payload) {
  Transaction tx;
  tx.sender = sender.public_key();
  tx.recipient = recipient;
  tx.amount = amount;
  tx.fee = fee;
  tx.nonce = nonce;
  tx.payload = std::move(payload);
  tx.signature = sender.sign(tx_signing_bytes(tx));
  return tx;
}

std::array<std::uint8_t, kHeaderSize> encode_header(const BlockHeader &h) {
  ByteWriter w;
  w.u64(h.height);
  w.fixed(h.prev_hash);
  w.u64(h.timestamp);
  w.u8(h.difficulty_bits);
  w.u64(h.pow_nonce);
  w.fixed(h.miner);
  w.fixed(h.tx_root);
  std::array<std::uint8_t, kHeaderSize> out{};
  std::copy(w.bytes().begin(), w.bytes().end(), out.begin());
  return out;
}

Digest256 block_hash(const BlockHeader &header) { return hash_bytes(encode_header(header)); }

Digest256 compute_tx_root(std::span<const Transaction> txs) {
  ByteWriter w;
  for (const auto &tx : txs)
    encode_transaction(w, tx);
  return hash_bytes(w.bytes());
}

Digest256 compute_allocation_root(std::span<const Allocation> allocations) {
  ByteWriter w;
  for (const auto &a : allocations) {
    w.fixed(a.address);
    w.u64(a.amount);
  }
  return hash_bytes(w.bytes());
}

void encode_block(ByteWriter &out, const Block &block) {
  if (block.transactions.size() > 0xffff || block.allocations.size() > 0xffff)
    throw std::invalid_argument("block too large to encode");
  out.raw(encode_header(block.header));
  out.u16(static_cast<std::uint16_t>(block.transactions.size()));
  for (const auto &tx : block.transactions)
    encode_transaction(out, tx);
  out.u16(static_cast<std::uint16_t>(block.allocations.size()));
  for (const auto &a : block.allocations) {
    out.fixed(a.address);
    out.u64(a.amount);
  }
}

Bytes encode_block(const Block &block) {
  ByteWriter w;
  encode_block(w, block);
  return std::move(w).take();
}

Block decode_block(ByteReader &in) {
  Block b;
  auto &h = b.header;
  h.height = in.u64();
  h.prev_hash = in.fixed<Digest256>();
  h.timestamp = in.u64();
  h.difficulty_bits = in.u8();
  h.pow_nonce = in.u64();
  h.miner = in.fixed<Address>();
  h.tx_root = in.fixed<Digest256>();
  std::uint16_t ntx = in.u16();
  b.transactions.reserve(ntx);
  for (std::uint16_t i = 0; i < ntx; ++i)
    b.transactions.push_back(decode_transaction(in));
  std::uint16_t nalloc = in.u16();
  for (std::uint16_t i = 0; i < nalloc; ++i) {
    Allocation a;
    a.address = in.fixed<Address>();
    a.amount = in.u64();
    b.allocations.push_back(a);
  }
  return b;
}

Block decode_block(ByteView data) {
  ByteReader r(data);
  auto b = decode_block(r);
  r.expect_done();
  return b;
}

std::uint64_t AccountState::balance(const Address &a) const {
  auto it = balances.find(a);
  return it == balances.end() ? 0 : it->second;
}

std::uint64_t AccountState::next_nonce(const Address &a) const {
  auto it = nonces.find(a);
  return it == nonces.end() ? 0 : it->second;
}

std::uint64_t AccountState::total_supply() const {
  std::uint64_t total = 0;
  for (const auto &[_, v] : balances)
    total += v;
  return total;
}

Bytes AccountState::encode() const {
  ByteWriter w;
  auto write_map = [&w](const std::map<Address, std::uint64_t> &m) {
    std::uint32_t n = 0;
    for (const auto &[_, v] : m)
      n += v != 0;
    w.u32(n);
    for (const auto &[k, v] : m) {
      if (v == 0)
        continue;
      w.fixed(k);
      w.u64(v);
    }
  };
  write_map(balances);
  write_map(nonces);
  return std::move(w).take();
}

AccountState genesis_state(const Block &genesis) {
  AccountState s;
  for (const auto &a : genesis.allocations)
    s.balances[a.address] += a.amount;
  return s;
}

std::string_view to_string(TxCode code) {
  switch (code) {
  case TxCode::ok: return "ok";
  case TxCode::bad_signature: return "bad_signature";
  case TxCode::bad_nonce: return "bad_nonce";
  case TxCode::insufficient_funds: return "insufficient_funds";
  case TxCode::payload_too_large: return "payload_too_large";
  case TxCode::duplicate: return "duplicate";
  }
  return "unknown";
}

TxCode check_transaction(const Transaction &tx, std::uint64_t expected_nonce,
                         std::uint64_t spendable, bool check_signature) {
  if (tx.payload.size() > kMaxPayloadBytes)
    return TxCode::payload_too_large;
  if (check_signature && !verify(tx.sender, tx_signing_bytes(tx), tx.signature))
    return TxCode::bad_signature;
  if (tx.nonce != expected_nonce)
    return TxCode::bad_nonce;
  std::uint64_t cost = 0;
  if (!checked_add(tx.amount, tx.fee, cost) || cost > spendable)
    return TxCode::insufficient_funds;
  return TxCode::ok;
}

TxCode validate_transaction(const Transaction &tx, const AccountState &state) {
  auto sender = tx.sender_address();
  return check_transaction(tx, state.next_nonce(sender), state.balance(sender));
}

BlockApplyError::BlockApplyError(std::size_t index, TxCode cause)
    : std::runtime_error("transaction " + std::to_string(index) + " rejected: " +
                         std::string(to_string(cause))),
      index_(index), cause_(cause) {}

namespace {

// Applies `block` to `state` in place; signatures are checked only when asked.
void settle(AccountState &state, const Block &block, bool check_signatures) {
  std::uint64_t fees = 0;
  for (std::size_t i = 0; i < block.transactions.size(); ++i) {
    const auto &tx = block.transactions[i];
    auto sender = tx.sender_address();
    auto code = check_transaction(tx, state.next_nonce(sender), state.balance(sender),
                                  check_signatures);
    if (code != TxCode::ok)
      throw BlockApplyError(i, code);
    state.balances[sender] -= tx.amount + tx.fee;
    state.balances[tx.recipient] += tx.amount;
    state.nonces[sender] += 1;
    fees += tx.fee;
  }
  state.balances[block.header.miner] += block_reward(block.header.height) + fees;
}

} // namespace

AccountState apply_block(const AccountState &state, const Block &block) {
  AccountState next = state;
  settle(next, block, true);
  return next;
}

std::string_view to_string(BlockCode code) {
  switch (code) {
  case BlockCode::ok: return "ok";
  case BlockCode::malformed: return "malformed";
  case BlockCode::bad_hash: return "bad_hash";
  case BlockCode::bad_genesis: return "bad_genesis";
  case BlockCode::bad_link: return "bad_link";
  case BlockCode::bad_tx_root: return "bad_tx_root";
  case BlockCode::bad_pow: return "bad_pow";
  case BlockCode::bad_tx: return "bad_tx";
  case BlockCode::too_many_txs: return "too_many_txs";
  case BlockCode::bad_timestamp: return "bad_timestamp";
  }
  return "unknown";
}

std::string BlockVerdict::describe() const {
  std::string out(to_string(code));
  if (code == BlockCode::bad_tx)
    out += "(" + std::to_string(tx_index) + ", " + std::string(to_string(tx_cause)) + ")";
  if (!detail.empty())
    out += ": " + detail;
  return out;
}

namespace {

BlockVerdict fail(BlockCode code, std::string detail = {}) {
  BlockVerdict v;
  v.code = code;
  v.detail = std::move(detail);
  return v;
}

BlockVerdict fail_tx(std::size_t index, TxCode cause) {
  BlockVerdict v;
  v.code = BlockCode::bad_tx;
  v.tx_index = index;
  v.tx_cause = cause;
  return v;
}

} // namespace

BlockVerdict validate_genesis(const Block &genesis) {
  const auto &h = genesis.header;
  if (h.height != 0 || !h.prev_hash.is_zero())
    return fail(BlockCode::bad_genesis, "genesis must have height 0 and a zero parent");
  if (!genesis.transactions.empty())
    return fail(BlockCode::bad_genesis, "genesis carries no transactions");
  if (h.tx_root != compute_allocation_root(genesis.allocations))
    return fail(BlockCode::bad_tx_root, "allocation commitment mismatch");
  if (!meets_difficulty(block_hash(h), h.difficulty_bits))
    return fail(BlockCode::bad_pow);
  return {};
}

BlockVerdict validate_block(const Block &block, const Block &parent,
                            const AccountState &state_at_parent, AccountState *state_after) {
  const auto &h = block.header;
  if (h.height != parent.header.height + 1)
    return fail(BlockCode::bad_link, "height does not follow parent");
  if (h.prev_hash != block_hash(parent))
    return fail(BlockCode::bad_link, "prev_hash does not match parent");
  if (h.timestamp < parent.header.timestamp)
    return fail(BlockCode::bad_timestamp);
  if (h.difficulty_bits != parent.header.difficulty_bits)
    return fail(BlockCode::bad_pow, "difficulty differs from parent");
  if (!meets_difficulty(block_hash(h), h.difficulty_bits))
    return fail(BlockCode::bad_pow);
  if (!block.allocations.empty())
    return fail(BlockCode::malformed, "allocations outside genesis");
  if (block.transactions.size() > kMaxBlockTxs)
    return fail(BlockCode::too_many_txs);
  if (h.tx_root != compute_tx_root(block.transactions))
    return fail(BlockCode::bad_tx_root);

  std::unordered_set<Digest256> hashes;
  for (std::size_t i = 0; i < block.transactions.size(); ++i) {
    if (!hashes.insert(tx_hash(block.transactions[i])).second)
      return fail_tx(i, TxCode::duplicate);
  }
  try {
    AccountState scratch = state_at_parent;
    settle(scratch, block, true);
    if (state_after)
      *state_after = std::move(scratch);
  } catch (const BlockApplyError &e) {
    return fail_tx(e.tx_index(), e.cause());
  }
  return {};
}

ChainVerdict verify_blocks(std::span<const Block> chain) {
  ChainVerdict out;
  if (chain.empty()) {
    out.ok = false;
    out.cause = fail(BlockCode::bad_genesis, "empty chain");
    return out;
  }
  if (auto v = validate_genesis(chain[0]); !v.ok()) {
    out.ok = false;
    out.cause = v;
    return out;
  }
  out.state = genesis_state(chain[0]);
  for (std::size_t i = 1; i < chain.size(); ++i) {
    AccountState next;
    auto v = validate_block(chain[i], chain[i - 1], out.state, &next);
    if (!v.ok()) {
      out.ok = false;
      out.failed_height = i;
      out.cause = v;
      return out;
    }
    out.state = std::move(next);
  }
  return out;
}

} // namespace chainsim
