#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "nptc/error.hpp"

namespace nptc {

static_assert(std::endian::native == std::endian::little,
              "cache formats are little-endian; add byte swapping for this host");

// Minimal little-endian stream helpers for the cache formats.
class BinaryWriter {
 public:
  explicit BinaryWriter(const std::string& path)
      : path_(path), out_(path, std::ios::binary) {
    if (!out_) throw IoError("cannot write " + path);
  }

  template <typename T>
  void write(const T& value) {
    static_assert(std::is_trivially_copyable_v<T>);
    out_.write(reinterpret_cast<const char*>(&value), sizeof(T));
  }

  template <typename T>
  void write_span(std::span<const T> values) {
    static_assert(std::is_trivially_copyable_v<T>);
    out_.write(reinterpret_cast<const char*>(values.data()),
               static_cast<std::streamsize>(values.size_bytes()));
  }

  void write_string(const std::string& s) {
    write(static_cast<std::uint32_t>(s.size()));
    out_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }

  void write_magic(const char (&magic)[5]) { out_.write(magic, 4); }

  void close() {
    out_.close();
    if (!out_) throw IoError("failed writing " + path_);
  }

 private:
  std::string path_;
  std::ofstream out_;
};

class BinaryReader {
 public:
  explicit BinaryReader(const std::string& path)
      : path_(path), in_(path, std::ios::binary) {
    if (!in_) throw CacheMiss("cannot open " + path);
  }

  template <typename T>
  T read() {
    static_assert(std::is_trivially_copyable_v<T>);
    T value{};
    in_.read(reinterpret_cast<char*>(&value), sizeof(T));
    check();
    return value;
  }

  template <typename T>
  std::vector<T> read_vector(std::size_t count) {
    static_assert(std::is_trivially_copyable_v<T>);
    std::vector<T> values(count);
    in_.read(reinterpret_cast<char*>(values.data()),
             static_cast<std::streamsize>(count * sizeof(T)));
    check();
    return values;
  }

  std::string read_string() {
    const auto n = read<std::uint32_t>();
    if (n > (1u << 20)) throw ParseError(path_ + ": implausible string length");
    std::string s(n, '\0');
    in_.read(s.data(), n);
    check();
    return s;
  }

  void expect_magic(const char (&magic)[5]) {
    char got[4];
    in_.read(got, 4);
    check();
    if (std::memcmp(got, magic, 4) != 0)
      throw ParseError(path_ + ": bad magic, expected '" + std::string(magic) +
                       "'");
  }

  const std::string& path() const { return path_; }

 private:
  void check() {
    if (!in_) throw ParseError(path_ + ": truncated file");
  }

  std::string path_;
  std::ifstream in_;
};

}  // namespace nptc
