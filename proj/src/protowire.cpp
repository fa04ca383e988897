#include "doppel/protowire.hpp"

#include <bit>

#include "doppel/errors.hpp"

namespace doppel::wire {

void Writer::varint(std::uint64_t v) {
  while (v >= 0x80) {
    buf_.push_back(static_cast<char>((v & 0x7F) | 0x80));
    v >>= 7;
  }
  buf_.push_back(static_cast<char>(v));
}

void Writer::tag(std::uint32_t field, WireType type) {
  varint((static_cast<std::uint64_t>(field) << 3) | static_cast<std::uint64_t>(type));
}

void Writer::uint_field(std::uint32_t field, std::uint64_t v) {
  tag(field, WireType::varint);
  varint(v);
}

void Writer::int_field(std::uint32_t field, std::int64_t v) { uint_field(field, static_cast<std::uint64_t>(v)); }

void Writer::bytes_field(std::uint32_t field, std::string_view bytes) {
  tag(field, WireType::length_delimited);
  varint(bytes.size());
  buf_.append(bytes);
}

void Writer::float_field(std::uint32_t field, float v) {
  tag(field, WireType::fixed32);
  append_le32(buf_, float_bits(v));
}

void Reader::need(std::size_t n) const {
  if (data_.size() - pos_ < n) {
    throw ParseError("truncated protobuf field (need " + std::to_string(n) + " bytes, " +
                         std::to_string(data_.size() - pos_) + " left)",
                     offset());
  }
}

std::pair<std::uint32_t, WireType> Reader::tag() {
  const std::size_t at = offset();
  const std::uint64_t key = varint();
  const auto field = key >> 3;
  const auto type = key & 7;
  if (field == 0 || field > 0x1FFFFFFF) throw ParseError("invalid protobuf field number", at);
  if (type != 0 && type != 1 && type != 2 && type != 5) {
    throw ParseError("unsupported protobuf wire type " + std::to_string(type), at);
  }
  return {static_cast<std::uint32_t>(field), static_cast<WireType>(type)};
}

std::uint64_t Reader::varint() {
  const std::size_t at = offset();
  std::uint64_t v = 0;
  for (int shift = 0; shift < 70; shift += 7) {
    if (pos_ >= data_.size()) throw ParseError("truncated varint", at);
    const auto byte = static_cast<std::uint8_t>(data_[pos_++]);
    if (shift == 63 && (byte & 0x7E) != 0) throw ParseError("varint overflows 64 bits", at);
    v |= static_cast<std::uint64_t>(byte & 0x7F) << shift;
    if ((byte & 0x80) == 0) return v;
  }
  throw ParseError("varint longer than 10 bytes", at);
}

std::uint32_t Reader::fixed32() {
  need(4);
  const auto v = read_le32(data_.data() + pos_);
  pos_ += 4;
  return v;
}

std::uint64_t Reader::fixed64() {
  need(8);
  const auto v = read_le64(data_.data() + pos_);
  pos_ += 8;
  return v;
}

std::string_view Reader::length_delimited() {
  const std::size_t at = offset();
  const std::uint64_t len = varint();
  if (len > data_.size() - pos_) {
    throw ParseError("length-delimited field of " + std::to_string(len) + " bytes overruns the buffer", at);
  }
  auto out = data_.substr(pos_, static_cast<std::size_t>(len));
  pos_ += static_cast<std::size_t>(len);
  return out;
}

Reader Reader::message() {
  auto bytes = length_delimited();
  return Reader(bytes, offset() - bytes.size());
}

void Reader::skip(WireType type) {
  switch (type) {
    case WireType::varint:
      varint();
      break;
    case WireType::fixed64:
      fixed64();
      break;
    case WireType::length_delimited:
      length_delimited();
      break;
    case WireType::fixed32:
      fixed32();
      break;
  }
}

std::uint32_t float_bits(float v) noexcept { return std::bit_cast<std::uint32_t>(v); }
float bits_float(std::uint32_t bits) noexcept { return std::bit_cast<float>(bits); }

void append_le32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void append_le64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint32_t read_le32(const char* p) noexcept {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(p[i])) << (8 * i);
  return v;
}

std::uint64_t read_le64(const char* p) noexcept {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<std::uint8_t>(p[i])) << (8 * i);
  return v;
}

}  // namespace doppel::wire
