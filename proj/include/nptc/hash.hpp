#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>

namespace nptc {

// 64-bit FNV-1a. Used to fingerprint cache inputs, not for security.
class Fnv1a {
 public:
  void update(std::span<const std::byte> bytes);
  void update(std::string_view text);
  template <typename T>
  void update_value(const T& value) {
    update(std::as_bytes(std::span<const T>(&value, 1)));
  }
  std::uint64_t digest() const { return state_; }

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

std::uint64_t hash_bytes(std::span<const std::byte> bytes);
std::uint64_t hash_file(const std::filesystem::path& path);
std::string hash_hex(std::uint64_t hash);

}  // namespace nptc
