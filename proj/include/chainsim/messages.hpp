#pragma once

#include "chainsim/kademlia.hpp"
#include "chainsim/ledger.hpp"

// Peer message bodies carried in simulator envelopes. All integers are
// big-endian; contacts travel as node_id(20) | endpoint u32.
//
//   TX_ANNOUNCE     transaction encoding
//   BLOCK_ANNOUNCE  block encoding
//   GET_BLOCKS      tip_height u64 | count u8 | locator hashes (newest first)
//   BLOCKS          count u16 | block encodings
//   FIND_NODE       sender(20) | lookup_id u64 | target(20)
//   FOUND_NODES     sender(20) | lookup_id u64 | count u8 | contacts
//   PING / PONG     sender(20) | nonce u64
namespace chainsim::wire {

struct GetBlocks {
  std::uint64_t tip_height = 0;
  std::vector<Digest256> locator;
};

struct FindNode {
  NodeId sender;
  std::uint64_t lookup_id = 0;
  NodeId target;
};

struct FoundNodes {
  NodeId sender;
  std::uint64_t lookup_id = 0;
  std::vector<kademlia::Contact> contacts;
};

struct Ping {
  NodeId sender;
  std::uint64_t nonce = 0;
};

Bytes encode(const GetBlocks &m);
Bytes encode(const FindNode &m);
Bytes encode(const FoundNodes &m);
Bytes encode(const Ping &m);
Bytes encode_blocks(std::span<const Block> blocks);

// Decoders throw DecodeError on malformed or trailing input.
GetBlocks decode_get_blocks(ByteView body);
FindNode decode_find_node(ByteView body);
FoundNodes decode_found_nodes(ByteView body);
Ping decode_ping(ByteView body);
std::vector<Block> decode_blocks(ByteView body);

} // namespace chainsim::wire
