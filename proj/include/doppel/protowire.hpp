#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>

namespace doppel::wire {

enum class WireType : std::uint8_t { varint = 0, fixed64 = 1, length_delimited = 2, fixed32 = 5 };

/// Appends protobuf wire-format fields to a byte string.
class Writer {
 public:
  void varint(std::uint64_t v);
  void tag(std::uint32_t field, WireType type);

  void uint_field(std::uint32_t field, std::uint64_t v);
  /// Negative values take ten bytes (two's complement), as int64 does.
  void int_field(std::uint32_t field, std::int64_t v);
  void bytes_field(std::uint32_t field, std::string_view bytes);
  void float_field(std::uint32_t field, float v);

  const std::string& bytes() const noexcept { return buf_; }
  std::string take() { return std::move(buf_); }

 private:
  std::string buf_;
};

/// Sequential reader over one message. Offsets in errors are absolute
/// positions in the outermost buffer.
class Reader {
 public:
  explicit Reader(std::string_view data, std::size_t base_offset = 0) : data_(data), base_(base_offset) {}

  bool done() const noexcept { return pos_ >= data_.size(); }
  std::size_t offset() const noexcept { return base_ + pos_; }

  /// (field number, wire type). Throws ParseError on field 0 or an unknown
  /// wire type.
  std::pair<std::uint32_t, WireType> tag();
  std::uint64_t varint();
  std::uint32_t fixed32();
  std::uint64_t fixed64();
  std::string_view length_delimited();
  /// A nested reader over the next length-delimited field.
  Reader message();
  void skip(WireType type);

 private:
  void need(std::size_t n) const;

  std::string_view data_;
  std::size_t base_ = 0;
  std::size_t pos_ = 0;
};

std::uint32_t float_bits(float v) noexcept;
float bits_float(std::uint32_t bits) noexcept;

/// Little-endian encodings used by tensor raw_data.
void append_le32(std::string& out, std::uint32_t v);
void append_le64(std::string& out, std::uint64_t v);
std::uint32_t read_le32(const char* p) noexcept;
std::uint64_t read_le64(const char* p) noexcept;

}  // namespace doppel::wire
