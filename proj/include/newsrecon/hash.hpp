#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace newsrecon {

/// XXH64 (seed 0 by default). Used for file checksums, request fixture keys and
/// template cache ids, so the value must stay stable across releases.
std::uint64_t xxh64(std::span<const std::byte> data, std::uint64_t seed = 0);
std::uint64_t xxh64(std::string_view text, std::uint64_t seed = 0);

/// Streaming variant for large payloads.
class Xxh64State {
 public:
  explicit Xxh64State(std::uint64_t seed = 0);
  void update(std::span<const std::byte> data);
  void update(std::string_view text);
  std::uint64_t digest() const;

 private:
  std::uint64_t seed_;
  std::uint64_t acc_[4];
  std::byte buffer_[32];
  std::size_t buffered_ = 0;
  std::uint64_t total_ = 0;
};

/// 16 lowercase hex digits.
std::string hex64(std::uint64_t value);

}  // namespace newsrecon
