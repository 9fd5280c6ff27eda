#include "lhn/binary_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>
#include <system_error>

#include "lhn/error.hpp"

namespace lhn::io {

static_assert(std::endian::native == std::endian::little, "model files assume a little-endian host");

namespace {

// Upper bound on tensor rank and string length accepted from disk.
constexpr std::uint64_t kMaxRank = 8;
constexpr std::uint64_t kMaxString = 1u << 20;

}  // namespace

Writer::Writer(std::string_view magic, std::uint32_t version) {
  if (magic.size() != 4) throw ParameterError("container magic must be 4 bytes");
  buf_.insert(buf_.end(), magic.begin(), magic.end());
  u32(version);
}

void Writer::u8(std::uint8_t v) { buf_.push_back(v); }

void Writer::u32(std::uint32_t v) {
  std::uint8_t raw[4];
  std::memcpy(raw, &v, 4);
  buf_.insert(buf_.end(), raw, raw + 4);
}

void Writer::u64(std::uint64_t v) {
  std::uint8_t raw[8];
  std::memcpy(raw, &v, 8);
  buf_.insert(buf_.end(), raw, raw + 8);
}

void Writer::f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

void Writer::str(std::string_view s) {
  u64(s.size());
  buf_.insert(buf_.end(), s.begin(), s.end());
}

void Writer::f64s(std::span<const double> values) {
  for (double v : values) f64(v);
}

void Writer::tensor(const Tensor& t) {
  u64(t.rank());
  for (auto e : t.shape()) u64(e);
  f64s(t.data());
}

void Writer::bytes(std::span<const std::uint8_t> raw) { buf_.insert(buf_.end(), raw.begin(), raw.end()); }

Reader::Reader(std::vector<std::uint8_t> data, std::string_view magic, std::uint32_t version)
    : data_(std::move(data)) {
  need(4, "magic");
  if (std::memcmp(data_.data(), magic.data(), 4) != 0) {
    throw FormatError(0, "bad magic, expected '" + std::string(magic) + "'");
  }
  pos_ = 4;
  const auto found = u32();
  if (found != version) {
    throw UnsupportedVersionError("unsupported " + std::string(magic) + " version " +
                                  std::to_string(found) + " (expected " + std::to_string(version) + ")");
  }
}

void Reader::need(std::size_t n, const char* what) const {
  if (data_.size() - pos_ < n) {
    throw FormatError(pos_, std::string("truncated while reading ") + what);
  }
}

std::uint8_t Reader::u8() {
  need(1, "u8");
  return data_[pos_++];
}

std::uint32_t Reader::u32() {
  need(4, "u32");
  std::uint32_t v;
  std::memcpy(&v, data_.data() + pos_, 4);
  pos_ += 4;
  return v;
}

std::uint64_t Reader::u64() {
  need(8, "u64");
  std::uint64_t v;
  std::memcpy(&v, data_.data() + pos_, 8);
  pos_ += 8;
  return v;
}

double Reader::f64() { return std::bit_cast<double>(u64()); }

std::string Reader::str() {
  const auto start = pos_;
  const auto len = u64();
  if (len > kMaxString) throw FormatError(start, "string length out of range");
  need(len, "string");
  std::string s(reinterpret_cast<const char*>(data_.data() + pos_), len);
  pos_ += len;
  return s;
}

std::vector<double> Reader::f64s(std::size_t count) {
  if (count > (data_.size() - pos_) / 8) need(count * 8, "f64 array");
  std::vector<double> out(count);
  for (auto& v : out) v = f64();
  return out;
}

Tensor Reader::tensor() {
  const auto start = pos_;
  const auto rank = u64();
  if (rank == 0 || rank > kMaxRank) throw FormatError(start, "tensor rank out of range");
  Shape shape(rank);
  std::uint64_t count = 1;
  for (auto& e : shape) {
    e = u64();
    if (e == 0) throw FormatError(pos_ - 8, "zero tensor extent");
    if (count > (data_.size() / 8) / e + 1) throw FormatError(pos_ - 8, "tensor too large for file");
    count *= e;
  }
  return Tensor(std::move(shape), f64s(count));
}

std::vector<std::uint8_t> Reader::bytes(std::size_t count) {
  need(count, "bytes");
  std::vector<std::uint8_t> out(data_.begin() + static_cast<std::ptrdiff_t>(pos_),
                                data_.begin() + static_cast<std::ptrdiff_t>(pos_ + count));
  pos_ += count;
  return out;
}

void Reader::expect_end() const {
  if (!at_end()) throw FormatError(pos_, "trailing bytes after payload");
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw InputError("write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw InputError("cannot rename onto " + path.string());
  }
}

void write_text_atomic(const std::filesystem::path& path, std::string_view text) {
  write_file_atomic(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::uint64_t fnv1a(std::span<const std::uint8_t> bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (auto b : bytes) {
    h ^= b;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << v;
  return os.str();
}

}  // namespace lhn::io
