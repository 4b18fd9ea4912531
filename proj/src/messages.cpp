#include "chainsim/messages.hpp"

namespace chainsim::wire {

Bytes encode(const GetBlocks &m) {
  if (m.locator.size() > 0xff)
    throw std::invalid_argument("locator too long");
  ByteWriter w;
  w.u64(m.tip_height);
  w.u8(static_cast<std::uint8_t>(m.locator.size()));
  for (const auto &h : m.locator)
    w.fixed(h);
  return std::move(w).take();
}

GetBlocks decode_get_blocks(ByteView body) {
  ByteReader r(body);
  GetBlocks m;
  m.tip_height = r.u64();
  std::uint8_t n = r.u8();
  for (std::uint8_t i = 0; i < n; ++i)
    m.locator.push_back(r.fixed<Digest256>());
  r.expect_done();
  return m;
}

Bytes encode(const FindNode &m) {
  ByteWriter w;
  w.fixed(m.sender);
  w.u64(m.lookup_id);
  w.fixed(m.target);
  return std::move(w).take();
}

FindNode decode_find_node(ByteView body) {
  ByteReader r(body);
  FindNode m;
  m.sender = r.fixed<NodeId>();
  m.lookup_id = r.u64();
  m.target = r.fixed<NodeId>();
  r.expect_done();
  return m;
}

Bytes encode(const FoundNodes &m) {
  if (m.contacts.size() > 0xff)
    throw std::invalid_argument("too many contacts");
  ByteWriter w;
  w.fixed(m.sender);
  w.u64(m.lookup_id);
  w.u8(static_cast<std::uint8_t>(m.contacts.size()));
  for (const auto &c : m.contacts) {
    w.fixed(c.node_id);
    w.u32(static_cast<std::uint32_t>(c.endpoint));
  }
  return std::move(w).take();
}

FoundNodes decode_found_nodes(ByteView body) {
  ByteReader r(body);
  FoundNodes m;
  m.sender = r.fixed<NodeId>();
  m.lookup_id = r.u64();
  std::uint8_t n = r.u8();
  for (std::uint8_t i = 0; i < n; ++i) {
    kademlia::Contact c;
    c.node_id = r.fixed<NodeId>();
    c.endpoint = r.u32();
    m.contacts.push_back(c);
  }
  r.expect_done();
  return m;
}

Bytes encode(const Ping &m) {
  ByteWriter w;
  w.fixed(m.sender);
  w.u64(m.nonce);
  return std::move(w).take();
}

Ping decode_ping(ByteView body) {
  ByteReader r(body);
  Ping m;
  m.sender = r.fixed<NodeId>();
  m.nonce = r.u64();
  r.expect_done();
  return m;
}

Bytes encode_blocks(std::span<const Block> blocks) {
  if (blocks.size() > 0xffff)
    throw std::invalid_argument("too many blocks");
  ByteWriter w;
  w.u16(static_cast<std::uint16_t>(blocks.size()));
  for (const auto &b : blocks)
    encode_block(w, b);
  return std::move(w).take();
}

std::vector<Block> decode_blocks(ByteView body) {
  ByteReader r(body);
  std::uint16_t n = r.u16();
  std::vector<Block> out;
  out.reserve(n);
  for (std::uint16_t i = 0; i < n; ++i)
    out.push_back(decode_block(r));
  r.expect_done();
  return out;
}

} // namespace chainsim::wire
