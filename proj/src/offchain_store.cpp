#include "chainsim/offchain_store.hpp"

#include <atomic>
#include <fstream>
#include <unistd.h>

namespace chainsim {

namespace fs = std::filesystem;

std::string_view to_string(BlobStatus status) {
  switch (status) {
  case BlobStatus::ok: return "ok";
  case BlobStatus::not_found: return "not_found";
  case BlobStatus::integrity_error: return "integrity_error";
  }
  return "unknown";
}

OffchainStore::OffchainStore(fs::path root) : root_(std::move(root)) {
  std::error_code ec;
  fs::create_directories(root_, ec);
  if (ec)
    throw std::runtime_error("cannot create blob store at " + root_.string() + ": " +
                             ec.message());
}

fs::path OffchainStore::path_for(const Digest256 &digest) const {
  std::string hex = digest.hex();
  return root_ / hex.substr(0, 2) / hex;
}

bool OffchainStore::contains(const Digest256 &digest) const {
  return fs::exists(path_for(digest));
}

BlobRef OffchainStore::put(ByteView blob) {
  if (blob.empty())
    throw std::invalid_argument("blob is empty");
  if (blob.size() > kMaxBlobBytes)
    throw std::invalid_argument("blob exceeds " + std::to_string(kMaxBlobBytes) + " bytes");
  BlobRef ref{hash_bytes(blob), blob.size()};
  fs::path target = path_for(ref.digest);
  if (get(ref.digest).status == BlobStatus::ok)
    return ref;

  std::error_code ec;
  fs::create_directories(target.parent_path(), ec);
  if (ec)
    throw std::runtime_error("cannot create " + target.parent_path().string() + ": " +
                             ec.message());
  static std::atomic<std::uint64_t> counter{0};
  fs::path tmp = target;
  tmp += ".tmp." + std::to_string(::getpid()) + "." + std::to_string(counter++);
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char *>(blob.data()),
              static_cast<std::streamsize>(blob.size()));
    out.close();
    if (!out) {
      fs::remove(tmp, ec);
      throw std::runtime_error("write failed for " + tmp.string());
    }
  }
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw std::runtime_error("cannot move blob into " + target.string());
  }
  return ref;
}

BlobResult OffchainStore::get(const Digest256 &digest) const {
  std::ifstream in(path_for(digest), std::ios::binary);
  if (!in)
    return {BlobStatus::not_found, {}};
  Bytes data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (hash_bytes(data) != digest)
    return {BlobStatus::integrity_error, {}};
  return {BlobStatus::ok, std::move(data)};
}

Bytes make_blob_link(const Digest256 &digest) {
  Bytes out(kBlobLinkSize, 0);
  out[0] = kBlobLinkTag;
  std::copy(digest.bytes.begin(), digest.bytes.end(), out.begin() + 1);
  return out;
}

std::optional<BlobRef> link_in_transaction(ByteView payload) {
  if (payload.size() != kBlobLinkSize || payload[0] != kBlobLinkTag)
    return std::nullopt;
  return BlobRef{Digest256::from_view(payload.subspan(1, 32)), std::nullopt};
}

} // namespace chainsim
