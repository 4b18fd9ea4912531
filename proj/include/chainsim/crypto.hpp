#pragma once

#include "chainsim/bytes.hpp"

namespace chainsim {

using Digest256 = FixedBytes<32, struct DigestTag>;
using PublicKey = FixedBytes<32, struct PublicKeyTag>;
using KeySeed = FixedBytes<32, struct KeySeedTag>;
using Signature = FixedBytes<64, struct SignatureTag>;
using NodeId = FixedBytes<20, struct NodeIdTag>;

/// SHA-256.
Digest256 hash_bytes(ByteView data);

inline Digest256 hash_bytes(std::string_view text) { return hash_bytes(as_bytes(text)); }

/// Ed25519 key material derived deterministically from a 32-byte seed.
/// The seed is the private key; the expanded signing key is cached.
class KeyPair {
public:
  const KeySeed &private_key() const { return seed_; }
  const PublicKey &public_key() const { return public_key_; }

  Signature sign(ByteView message) const;

private:
  friend KeyPair generate_keypair(ByteView seed);

  KeySeed seed_;
  PublicKey public_key_;
  std::array<std::uint8_t, 64> expanded_{};
};

/// Throws std::invalid_argument unless `seed` is exactly 32 bytes.
KeyPair generate_keypair(ByteView seed);

inline KeyPair generate_keypair(const KeySeed &seed) { return generate_keypair(seed.view()); }

Signature sign(const KeySeed &private_key, ByteView message);

/// Pure; malformed keys or signatures verify as false.
bool verify(const PublicKey &public_key, ByteView message, const Signature &signature);

/// First 20 bytes of SHA-256(public key).
NodeId node_id_from_public_key(const PublicKey &public_key);

/// Seed derivation for reproducible identities: SHA-256(label || be64(index)).
KeySeed derive_seed(std::string_view label, std::uint64_t index);

} // namespace chainsim

template <> struct std::hash<chainsim::Digest256> : chainsim::FixedBytesHash {};
template <> struct std::hash<chainsim::NodeId> : chainsim::FixedBytesHash {};
