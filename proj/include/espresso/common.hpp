#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace espresso {

using Bytes = std::vector<std::uint8_t>;
using ByteSpan = std::span<const std::uint8_t>;

/// Error classes surfaced by the library. The wire module transmits these
/// values inside abort frames, so the numeric values are part of the
/// protocol and must not be reordered.
enum class ErrorCode : std::uint8_t {
  kInvalidArgument = 1,
  kEmptySet = 2,
  kDuplicateItem = 3,
  kGenerationTimeout = 4,
  kDecode = 5,
  kProtocolAbort = 6,
  kLengthMismatch = 7,
  kBadMagic = 8,
  kVersionMismatch = 9,
  kLengthOverflow = 10,
  kTruncated = 11,
  kTimeout = 12,
  kPeerAbort = 13,
  kTransport = 14,
  kIo = 15,
  kHandshakeMismatch = 16,
  kUndefinedDistance = 17,
  kIndeterminateMatch = 18,
  kMalformedInput = 19,
  kUnknownMessage = 20,
};

std::string_view error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& what);

inline Bytes to_bytes(std::string_view s) { return Bytes(s.begin(), s.end()); }
inline std::string to_string(ByteSpan b) { return std::string(b.begin(), b.end()); }
std::string to_hex(ByteSpan b);
Bytes from_hex(std::string_view hex);

void put_u32(Bytes& out, std::uint32_t v);
void put_u64(Bytes& out, std::uint64_t v);
void put_bytes(Bytes& out, ByteSpan b);
/// 32-bit big-endian length prefix followed by the bytes.
void put_prefixed(Bytes& out, ByteSpan b);

/// Bounds-checked big-endian cursor. Every read past the end throws
/// ErrorCode::kTruncated.
class ByteReader {
 public:
  explicit ByteReader(ByteSpan data) : data_(data) {}

  std::uint8_t u8();
  std::uint32_t u32();
  std::uint64_t u64();
  ByteSpan take(std::size_t n);
  ByteSpan prefixed();

  std::size_t remaining() const { return data_.size() - pos_; }
  bool done() const { return pos_ == data_.size(); }
  void expect_done() const;

 private:
  ByteSpan data_;
  std::size_t pos_ = 0;
};

/// Non-negative rational kept unreduced, so an exact Jaccard value c/u
/// still carries its union size. A zero denominator reads as 0.
struct Fraction {
  std::uint64_t num = 0;
  std::uint64_t den = 1;

  double value() const {
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
  }
  Fraction reduced() const;
  bool is_integer() const { return den != 0 && num % den == 0; }

  friend bool operator==(const Fraction& a, const Fraction& b) {
    return static_cast<unsigned __int128>(a.num) * b.den ==
           static_cast<unsigned __int128>(b.num) * a.den;
  }
};

std::string to_string(const Fraction& f);

/// Position-encoded item <value, index>: length-prefixed value bytes, then
/// the index as 32-bit big-endian.
Bytes position_encode(ByteSpan value, std::uint32_t index);

/// Throws kEmptySet / kDuplicateItem unless items is a nonempty set.
void require_distinct_nonempty(std::span<const Bytes> items, std::string_view who);

}  // namespace espresso
