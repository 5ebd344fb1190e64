#include "espresso/common.hpp"

#include <numeric>
#include <unordered_set>

namespace espresso {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid-argument";
    case ErrorCode::kEmptySet: return "empty-set";
    case ErrorCode::kDuplicateItem: return "duplicate-item";
    case ErrorCode::kGenerationTimeout: return "generation-timeout";
    case ErrorCode::kDecode: return "decode";
    case ErrorCode::kProtocolAbort: return "protocol-abort";
    case ErrorCode::kLengthMismatch: return "length-mismatch";
    case ErrorCode::kBadMagic: return "bad-magic";
    case ErrorCode::kVersionMismatch: return "version-mismatch";
    case ErrorCode::kLengthOverflow: return "length-overflow";
    case ErrorCode::kTruncated: return "truncated";
    case ErrorCode::kTimeout: return "timeout";
    case ErrorCode::kPeerAbort: return "peer-abort";
    case ErrorCode::kTransport: return "transport";
    case ErrorCode::kIo: return "io";
    case ErrorCode::kHandshakeMismatch: return "handshake-mismatch";
    case ErrorCode::kUndefinedDistance: return "undefined-distance";
    case ErrorCode::kIndeterminateMatch: return "indeterminate-match";
    case ErrorCode::kMalformedInput: return "malformed-input";
    case ErrorCode::kUnknownMessage: return "unknown-message";
  }
  return "unknown";
}

void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

std::string to_hex(ByteSpan b) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(b.size() * 2);
  for (auto c : b) {
    out.push_back(kDigits[c >> 4]);
    out.push_back(kDigits[c & 0xf]);
  }
  return out;
}

Bytes from_hex(std::string_view hex) {
  auto nibble = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
  };
  if (hex.size() % 2 != 0) fail(ErrorCode::kMalformedInput, "odd-length hex string");
  Bytes out(hex.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i) {
    int hi = nibble(hex[2 * i]);
    int lo = nibble(hex[2 * i + 1]);
    if (hi < 0 || lo < 0) fail(ErrorCode::kMalformedInput, "invalid hex digit");
    out[i] = static_cast<std::uint8_t>(hi << 4 | lo);
  }
  return out;
}

void put_u32(Bytes& out, std::uint32_t v) {
  for (int shift = 24; shift >= 0; shift -= 8) out.push_back(static_cast<std::uint8_t>(v >> shift));
}

void put_u64(Bytes& out, std::uint64_t v) {
  for (int shift = 56; shift >= 0; shift -= 8) out.push_back(static_cast<std::uint8_t>(v >> shift));
}

void put_bytes(Bytes& out, ByteSpan b) { out.insert(out.end(), b.begin(), b.end()); }

void put_prefixed(Bytes& out, ByteSpan b) {
  put_u32(out, static_cast<std::uint32_t>(b.size()));
  put_bytes(out, b);
}

std::uint8_t ByteReader::u8() { return take(1)[0]; }

std::uint32_t ByteReader::u32() {
  auto b = take(4);
  return std::uint32_t{b[0]} << 24 | std::uint32_t{b[1]} << 16 | std::uint32_t{b[2]} << 8 | b[3];
}

std::uint64_t ByteReader::u64() {
  auto b = take(8);
  std::uint64_t v = 0;
  for (auto c : b) v = v << 8 | c;
  return v;
}

ByteSpan ByteReader::take(std::size_t n) {
  if (n > remaining()) fail(ErrorCode::kTruncated, "read past end of buffer");
  auto out = data_.subspan(pos_, n);
  pos_ += n;
  return out;
}

ByteSpan ByteReader::prefixed() { return take(u32()); }

void ByteReader::expect_done() const {
  if (!done()) fail(ErrorCode::kMalformedInput, "trailing bytes after message");
}

Fraction Fraction::reduced() const {
  if (den == 0) return {0, 1};
  auto g = std::gcd(num, den);
  if (g == 0) return {0, 1};
  return {num / g, den / g};
}

std::string to_string(const Fraction& f) {
  return std::to_string(f.num) + "/" + std::to_string(f.den);
}

Bytes position_encode(ByteSpan value, std::uint32_t index) {
  Bytes out;
  out.reserve(value.size() + 8);
  put_prefixed(out, value);
  put_u32(out, index);
  return out;
}

void require_distinct_nonempty(std::span<const Bytes> items, std::string_view who) {
  if (items.empty()) fail(ErrorCode::kEmptySet, std::string(who) + ": input set is empty");
  std::unordered_set<std::string_view> seen;
  seen.reserve(items.size());
  for (const auto& item : items) {
    std::string_view view(reinterpret_cast<const char*>(item.data()), item.size());
    if (!seen.insert(view).second) {
      fail(ErrorCode::kDuplicateItem, std::string(who) + ": duplicate item in input set");
    }
  }
}

}  // namespace espresso
