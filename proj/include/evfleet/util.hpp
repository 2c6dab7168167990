#pragma once

#include <charconv>
#include <cstdint>
#include <string>
#include <string_view>

namespace evfleet {

// 64-bit FNV-1a. Stable across platforms; used for content hashes of
// datasets, configs and exported files.
class Fnv1a {
 public:
  void update(std::string_view bytes) {
    for (unsigned char c : bytes) {
      state_ ^= c;
      state_ *= 0x100000001b3ULL;
    }
  }
  std::uint64_t digest() const { return state_; }
  std::string hex() const;

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

std::uint64_t hash_bytes(std::string_view bytes);
// Hash of a whole file's contents; throws std::runtime_error when unreadable.
std::uint64_t hash_file(const std::string& path);
std::string to_hex(std::uint64_t value);

// Shortest round-trip decimal representation. Byte-stable for a given value.
inline std::string format_double(double value) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc{}) return "nan";
  return std::string(buf, end);
}

}  // namespace evfleet
