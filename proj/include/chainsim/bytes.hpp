#pragma once

#include <algorithm>
#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace chainsim {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

/// Raised when a canonical encoding or hex string cannot be decoded.
class DecodeError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

std::string to_hex(ByteView data);

/// Strict lowercase hex decoding; uppercase digits and odd lengths are rejected.
Bytes from_hex(std::string_view text);

inline ByteView as_bytes(std::string_view s) {
  return {reinterpret_cast<const std::uint8_t *>(s.data()), s.size()};
}

/// Fixed-width byte string. The tag keeps digests, keys, addresses and
/// identifiers from being mixed up even when their widths agree.
template <std::size_t N, typename Tag> struct FixedBytes {
  static constexpr std::size_t width = N;
  std::array<std::uint8_t, N> bytes{};

  auto operator<=>(const FixedBytes &) const = default;

  std::string hex() const { return to_hex(bytes); }
  ByteView view() const { return bytes; }

  bool is_zero() const {
    return std::all_of(bytes.begin(), bytes.end(),
                       [](std::uint8_t b) { return b == 0; });
  }

  static FixedBytes from_view(ByteView data) {
    if (data.size() != N)
      throw DecodeError("expected " + std::to_string(N) + " bytes, got " +
                        std::to_string(data.size()));
    FixedBytes out;
    std::copy(data.begin(), data.end(), out.bytes.begin());
    return out;
  }

  static FixedBytes from_hex(std::string_view text) {
    return from_view(chainsim::from_hex(text));
  }
};

struct FixedBytesHash {
  template <std::size_t N, typename Tag>
  std::size_t operator()(const FixedBytes<N, Tag> &v) const noexcept {
    std::size_t h = 0;
    std::memcpy(&h, v.bytes.data(), std::min(sizeof(h), N));
    return h;
  }
};

/// Big-endian writer for the canonical encodings.
class ByteWriter {
public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u16(std::uint16_t v) { put_be(v, 2); }
  void u32(std::uint32_t v) { put_be(v, 4); }
  void u64(std::uint64_t v) { put_be(v, 8); }
  void raw(ByteView data) { out_.insert(out_.end(), data.begin(), data.end()); }
  template <std::size_t N, typename Tag> void fixed(const FixedBytes<N, Tag> &v) {
    raw(v.bytes);
  }

  std::size_t size() const { return out_.size(); }
  const Bytes &bytes() const & { return out_; }
  Bytes take() && { return std::move(out_); }

private:
  void put_be(std::uint64_t v, int width) {
    for (int i = width - 1; i >= 0; --i)
      out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }

  Bytes out_;
};

/// Bounds-checked big-endian reader; every overrun throws DecodeError.
class ByteReader {
public:
  explicit ByteReader(ByteView data) : data_(data) {}

  std::uint8_t u8() { return static_cast<std::uint8_t>(get_be(1)); }
  std::uint16_t u16() { return static_cast<std::uint16_t>(get_be(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(get_be(4)); }
  std::uint64_t u64() { return get_be(8); }

  ByteView raw(std::size_t n) {
    require(n);
    auto s = data_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

  template <typename Fixed> Fixed fixed() {
    return Fixed::from_view(raw(Fixed::width));
  }

  std::size_t position() const { return pos_; }
  std::size_t remaining() const { return data_.size() - pos_; }
  bool done() const { return pos_ == data_.size(); }

  void expect_done() const {
    if (!done())
      throw DecodeError(std::to_string(remaining()) + " trailing bytes");
  }

private:
  void require(std::size_t n) const {
    if (data_.size() - pos_ < n)
      throw DecodeError("truncated input");
  }

  std::uint64_t get_be(int width) {
    require(static_cast<std::size_t>(width));
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i)
      v = (v << 8) | data_[pos_++];
    return v;
  }

  ByteView data_;
  std::size_t pos_ = 0;
};

} // namespace chainsim
