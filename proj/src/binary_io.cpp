#include "newsrecon/binary_io.hpp"

#include <fstream>

#include "newsrecon/hash.hpp"

namespace newsrecon::io {

void ByteWriter::put_f32s(std::span<const float> values) {
  buf_.reserve(buf_.size() + values.size() * 4);
  for (float v : values) put_f32(v);
}

void ByteWriter::put_string(std::string_view s) {
  put_u32(static_cast<std::uint32_t>(s.size()));
  put_bytes(std::as_bytes(std::span(s.data(), s.size())));
}

void ByteWriter::put_checksum() { put_u64(xxh64(std::span<const std::byte>(buf_))); }

void ByteReader::fail(const std::string& what) const { throw FormatError(source_ + ": " + what, pos_); }

void ByteReader::need(std::size_t n, std::string_view what) {
  if (remaining() < n) {
    fail("truncated payload reading " + std::string(what) + ": need " + std::to_string(n) + " bytes, " +
         std::to_string(remaining()) + " left");
  }
}

void ByteReader::expect_magic(std::string_view magic) {
  need(magic.size(), "magic");
  for (std::size_t i = 0; i < magic.size(); ++i) {
    if (std::to_integer<char>(data_[pos_ + i]) != magic[i]) fail("bad magic, expected \"" + std::string(magic) + "\"");
  }
  pos_ += magic.size();
}

void ByteReader::f32s(std::span<float> out, std::string_view what) {
  need(out.size() * 4, what);
  for (float& v : out) v = f32();
}

std::string ByteReader::string(std::string_view what) {
  const std::uint32_t len = u32();
  need(len, what);
  std::string s(reinterpret_cast<const char*>(data_.data() + pos_), len);
  pos_ += len;
  return s;
}

void ByteReader::verify_checksum() {
  const std::size_t covered = pos_;
  const std::uint64_t expected = xxh64(data_.first(covered));
  const std::uint64_t stored = u64();
  if (stored != expected) {
    pos_ = covered;
    fail("checksum mismatch: stored " + hex64(stored) + ", computed " + hex64(expected));
  }
}

void ByteReader::expect_end() {
  if (remaining() != 0) fail(std::to_string(remaining()) + " trailing bytes after checksum");
}

std::vector<std::byte> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  in.seekg(0, std::ios::end);
  const auto size = static_cast<std::size_t>(in.tellg());
  in.seekg(0);
  std::vector<std::byte> bytes(size);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(size));
  if (!in) throw Error("read failed: " + path.string());
  return bytes;
}

void write_file(const std::filesystem::path& path, std::span<const std::byte> bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open for writing: " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write failed: " + path.string());
}

}  // namespace newsrecon::io
