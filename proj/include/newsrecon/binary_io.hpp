#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "newsrecon/error.hpp"

namespace newsrecon::io {

/// Little-endian append-only byte buffer.
class ByteWriter {
 public:
  void put_bytes(std::span<const std::byte> bytes) { buf_.insert(buf_.end(), bytes.begin(), bytes.end()); }
  void put_magic(std::string_view magic) { put_bytes(std::as_bytes(std::span(magic.data(), magic.size()))); }
  void put_u8(std::uint8_t v) { buf_.push_back(std::byte{v}); }
  void put_u16(std::uint16_t v) { put_le(v); }
  void put_u32(std::uint32_t v) { put_le(v); }
  void put_u64(std::uint64_t v) { put_le(v); }
  void put_f32(float v) { put_le(std::bit_cast<std::uint32_t>(v)); }
  void put_f32s(std::span<const float> values);
  void put_string(std::string_view s);
  /// Appends XXH64 of everything written so far.
  void put_checksum();

  const std::vector<std::byte>& bytes() const { return buf_; }
  std::vector<std::byte> take() { return std::move(buf_); }

 private:
  template <class T>
  void put_le(T v) {
    for (std::size_t i = 0; i < sizeof(T); ++i) buf_.push_back(static_cast<std::byte>((v >> (8 * i)) & 0xFF));
  }
  std::vector<std::byte> buf_;
};

/// Bounds-checked little-endian reader; every failure is a FormatError naming
/// the byte offset.
class ByteReader {
 public:
  ByteReader(std::span<const std::byte> data, std::string source) : data_(data), source_(std::move(source)) {}

  void expect_magic(std::string_view magic);
  std::uint8_t u8() { return get_le<std::uint8_t>("u8"); }
  std::uint16_t u16() { return get_le<std::uint16_t>("u16"); }
  std::uint32_t u32() { return get_le<std::uint32_t>("u32"); }
  std::uint64_t u64() { return get_le<std::uint64_t>("u64"); }
  float f32() { return std::bit_cast<float>(u32()); }
  void f32s(std::span<float> out, std::string_view what);
  std::string string(std::string_view what);
  /// Reads the trailing checksum and compares it with XXH64 of all prior bytes.
  void verify_checksum();
  void expect_end();

  std::size_t offset() const { return pos_; }
  std::size_t remaining() const { return data_.size() - pos_; }
  [[noreturn]] void fail(const std::string& what) const;

 private:
  void need(std::size_t n, std::string_view what);
  template <class T>
  T get_le(std::string_view what) {
    need(sizeof(T), what);
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i)
      v |= static_cast<T>(static_cast<T>(std::to_integer<std::uint8_t>(data_[pos_ + i])) << (8 * i));
    pos_ += sizeof(T);
    return v;
  }

  std::span<const std::byte> data_;
  std::string source_;
  std::size_t pos_ = 0;
};

std::vector<std::byte> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::byte> bytes);

}  // namespace newsrecon::io
