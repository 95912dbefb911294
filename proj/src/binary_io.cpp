#include "ccmt/binary_io.hpp"

#include <zlib.h>

#include <fstream>

#include "ccmt/error.hpp"

namespace ccmt {

std::uint32_t crc32(std::span<const std::uint8_t> bytes, std::uint32_t running) {
  uLong c = running;
  // zlib takes uInt lengths; feed in chunks.
  const std::uint8_t* p = bytes.data();
  std::size_t left = bytes.size();
  while (left > 0) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(left, 1u << 30));
    c = ::crc32(c, p, chunk);
    p += chunk;
    left -= chunk;
  }
  return static_cast<std::uint32_t>(c);
}

void ByteReader::read(std::span<std::uint8_t> out, const char* what) {
  require(out.size(), what);
  in_.read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(out.size()));
  if (static_cast<std::size_t>(in_.gcount()) != out.size()) fail(std::string("short read in ") + what);
  crc_ = crc32(out, crc_);
  pos_ += out.size();
}

std::string ByteReader::str(std::size_t max_len) {
  const auto start = offset();
  const auto len = u32();
  if (len > max_len) fail_at("string length " + std::to_string(len) + " exceeds limit", start);
  std::string s(len, '\0');
  read({reinterpret_cast<std::uint8_t*>(s.data()), s.size()}, "string");
  return s;
}

void ByteReader::require(std::uint64_t n, const char* what) {
  if (remaining() < n)
    fail(std::string("truncated input: need ") + std::to_string(n) + " bytes for " + what + ", " +
         std::to_string(remaining()) + " left");
}

void ByteReader::fail(const std::string& what) const { fail_at(what, offset()); }

void ByteReader::fail_at(const std::string& what, std::uint64_t offset) const {
  throw ParseError(what, offset, record_);
}

std::uint64_t ByteReader::get_le(int n) {
  std::uint8_t b[8];
  read({b, static_cast<std::size_t>(n)}, "integer field");
  std::uint64_t v = 0;
  for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed for '" + path.string() + "'");
  return bytes;
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

}  // namespace ccmt
