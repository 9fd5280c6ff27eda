#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lhn/tensor.hpp"

namespace lhn::io {

// Little-endian binary container used by every model file.
//
//   magic    4 bytes ASCII
//   version  u32
//   payload  sequence of u8 / u32 / u64 / f64 / string / tensor records
//
// string = u64 length + bytes; tensor = u64 rank + rank * u64 extents +
// product(extents) * f64. Doubles are stored as their IEEE-754 bit pattern,
// so a round trip is bit-exact.
class Writer {
 public:
  Writer(std::string_view magic, std::uint32_t version);

  void u8(std::uint8_t v);
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f64(double v);
  void str(std::string_view s);
  void f64s(std::span<const double> values);
  void tensor(const Tensor& t);
  void bytes(std::span<const std::uint8_t> raw);

  const std::vector<std::uint8_t>& buffer() const noexcept { return buf_; }

 private:
  std::vector<std::uint8_t> buf_;
};

class Reader {
 public:
  /// Validates magic and version; throws FormatError / UnsupportedVersionError.
  Reader(std::vector<std::uint8_t> data, std::string_view magic, std::uint32_t version);

  std::uint8_t u8();
  std::uint32_t u32();
  std::uint64_t u64();
  double f64();
  std::string str();
  std::vector<double> f64s(std::size_t count);
  Tensor tensor();
  std::vector<std::uint8_t> bytes(std::size_t count);

  std::size_t offset() const noexcept { return pos_; }
  bool at_end() const noexcept { return pos_ == data_.size(); }
  /// Throws FormatError if unread bytes remain.
  void expect_end() const;

 private:
  void need(std::size_t n, const char* what) const;

  std::vector<std::uint8_t> data_;
  std::size_t pos_ = 0;
};

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);

/// Writes to a sibling temp file then renames over the target.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_text_atomic(const std::filesystem::path& path, std::string_view text);

/// FNV-1a 64-bit.
std::uint64_t fnv1a(std::span<const std::uint8_t> bytes);
std::string hex64(std::uint64_t v);

}  // namespace lhn::io
