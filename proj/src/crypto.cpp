#include "chainsim/crypto.hpp"

#include <mutex>

#include <sodium.h>

namespace chainsim {

namespace {

void ensure_sodium() {
  static std::once_flag once;
  std::call_once(once, [] {
    if (sodium_init() < 0)
      throw std::runtime_error("libsodium initialisation failed");
  });
}

} // namespace

Digest256 hash_bytes(ByteView data) {
  ensure_sodium();
  Digest256 out;
  crypto_hash_sha256(out.bytes.data(), data.data(), data.size());
  return out;
}

KeyPair generate_keypair(ByteView seed) {
  if (seed.size() != crypto_sign_SEEDBYTES)
    throw std::invalid_argument("key seed must be 32 bytes, got " +
                                std::to_string(seed.size()));
  ensure_sodium();
  KeyPair kp;
  kp.seed_ = KeySeed::from_view(seed);
  crypto_sign_seed_keypair(kp.public_key_.bytes.data(), kp.expanded_.data(),
                           kp.seed_.bytes.data());
  return kp;
}

Signature KeyPair::sign(ByteView message) const {
  Signature sig;
  crypto_sign_detached(sig.bytes.data(), nullptr, message.data(), message.size(),
                       expanded_.data());
  return sig;
}

Signature sign(const KeySeed &private_key, ByteView message) {
  return generate_keypair(private_key).sign(message);
}

bool verify(const PublicKey &public_key, ByteView message, const Signature &signature) {
  ensure_sodium();
  return crypto_sign_verify_detached(signature.bytes.data(), message.data(), message.size(),
                                     public_key.bytes.data()) == 0;
}

NodeId node_id_from_public_key(const PublicKey &public_key) {
  auto digest = hash_bytes(public_key.view());
  return NodeId::from_view(digest.view().first(NodeId::width));
}

KeySeed derive_seed(std::string_view label, std::uint64_t index) {
  ByteWriter w;
  w.raw(as_bytes(label));
  w.u64(index);
  return KeySeed::from_view(hash_bytes(w.bytes()).view());
}

} // namespace chainsim
