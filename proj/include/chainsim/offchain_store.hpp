#pragma once

#include <filesystem>
#include <optional>

#include "chainsim/crypto.hpp"

namespace chainsim {

inline constexpr std::size_t kMaxBlobBytes = 16u << 20;
inline constexpr std::uint8_t kBlobLinkTag = 0x01;
inline constexpr std::size_t kBlobLinkSize = 36;

struct BlobRef {
  Digest256 digest;
  /// Unknown for refs parsed out of a transaction payload.
  std::optional<std::uint64_t> size_bytes;

  friend bool operator==(const BlobRef &, const BlobRef &) = default;
};

enum class BlobStatus { ok, not_found, integrity_error };

std::string_view to_string(BlobStatus status);

struct BlobResult {
  BlobStatus status = BlobStatus::not_found;
  Bytes blob;
};

/// Content-addressed blobs on disk at root/<first two hex chars>/<digest hex>.
/// Writes go to a temporary file and are renamed into place, so concurrent
/// puts of the same blob are harmless.
class OffchainStore {
public:
  explicit OffchainStore(std::filesystem::path root);

  const std::filesystem::path &root() const { return root_; }

  /// Throws std::invalid_argument for an empty or oversized blob and
  /// std::runtime_error on I/O failure.
  BlobRef put(ByteView blob);

  /// Reads and re-hashes the stored bytes.
  BlobResult get(const Digest256 &digest) const;

  bool contains(const Digest256 &digest) const;
  std::filesystem::path path_for(const Digest256 &digest) const;

private:
  std::filesystem::path root_;
};

/// 0x01 | digest | three zero bytes.
Bytes make_blob_link(const Digest256 &digest);

/// A payload is a blob link iff it is exactly 36 bytes and starts with 0x01.
std::optional<BlobRef> link_in_transaction(ByteView payload);

} // namespace chainsim
