#pragma once

// Little-endian byte encoding shared by the model and dataset formats.

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <istream>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ccmt {

std::uint32_t crc32(std::span<const std::uint8_t> bytes, std::uint32_t running = 0);

class ByteWriter {
 public:
  void u8(std::uint8_t v) { buf_.push_back(v); }
  void u16(std::uint16_t v) { put_le(v, 2); }
  void u32(std::uint32_t v) { put_le(v, 4); }
  void u64(std::uint64_t v) { put_le(v, 8); }
  void f32(float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    u32(bits);
  }
  void f64(double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    u64(bits);
  }
  void bytes(std::string_view s) { buf_.insert(buf_.end(), s.begin(), s.end()); }
  // u32 length prefix then raw bytes.
  void str(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s);
  }

  std::vector<std::uint8_t>& buffer() { return buf_; }
  const std::vector<std::uint8_t>& buffer() const { return buf_; }

 private:
  void put_le(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t> buf_;
};

// Bounds-checked little-endian reader over a stream of known length. Keeps a
// running CRC32 of every byte consumed. Truncation throws ParseError with the
// offset of the field that was cut short; `record` (when set) is attached to errors.
class ByteReader {
 public:
  ByteReader(std::istream& in, std::uint64_t size) : in_(in), size_(size) {}

  std::uint8_t u8() { return static_cast<std::uint8_t>(get_le(1)); }
  std::uint16_t u16() { return static_cast<std::uint16_t>(get_le(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(get_le(4)); }
  std::uint64_t u64() { return get_le(8); }
  float f32() {
    const auto bits = u32();
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }
  double f64() {
    const auto bits = u64();
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }
  void read(std::span<std::uint8_t> out, const char* what);
  std::string str(std::size_t max_len);

  std::uint64_t offset() const { return pos_; }
  std::uint64_t remaining() const { return size_ - pos_; }
  std::uint32_t crc() const { return crc_; }
  void require(std::uint64_t n, const char* what);

  void set_record(std::optional<std::uint64_t> r) { record_ = r; }
  [[noreturn]] void fail(const std::string& what) const;
  [[noreturn]] void fail_at(const std::string& what, std::uint64_t offset) const;

 private:
  std::uint64_t get_le(int n);

  std::istream& in_;
  std::uint64_t size_;
  std::uint64_t pos_ = 0;
  std::uint32_t crc_ = 0;
  std::optional<std::uint64_t> record_;
};

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace ccmt
