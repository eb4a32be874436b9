// SPDX-License-Identifier: Apache-2.0
#include "mgs/io_util.hpp"

#include <array>
#include <sstream>

namespace mgs::io {

BinWriter::BinWriter(const fs::path& path) : out_(path, std::ios::binary | std::ios::trunc), path_(path) {
  if (!out_) raise(Err::io, "cannot open " + path.string() + " for writing");
}

void BinWriter::u8(std::uint8_t v) { bytes(&v, 1); }

void BinWriter::u16(std::uint16_t v) {
  std::uint8_t b[2] = {std::uint8_t(v), std::uint8_t(v >> 8)};
  bytes(b, 2);
}

void BinWriter::u32(std::uint32_t v) {
  std::uint8_t b[4];
  for (int i = 0; i < 4; ++i) b[i] = std::uint8_t(v >> (8 * i));
  bytes(b, 4);
}

void BinWriter::u64(std::uint64_t v) {
  std::uint8_t b[8];
  for (int i = 0; i < 8; ++i) b[i] = std::uint8_t(v >> (8 * i));
  bytes(b, 8);
}

void BinWriter::bytes(const void* data, std::size_t n) {
  out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
  if (!out_) raise(Err::io, "write failed on " + path_.string());
  offset_ += n;
}

void BinWriter::magic(std::string_view tag) {
  if (tag.size() != 4) raise(Err::io, "magic must be 4 bytes");
  bytes(tag.data(), 4);
}

void BinWriter::close() {
  out_.close();
  if (!out_) raise(Err::io, "close failed on " + path_.string());
}

BinReader::BinReader(const fs::path& path) : in_(path, std::ios::binary), path_(path) {
  if (!in_) raise(Err::io, "cannot open " + path.string() + " for reading");
}

void BinReader::bytes(void* data, std::size_t n) {
  in_.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in_.gcount()) != n)
    raise(Err::parse, "unexpected end of file in " + path_.string());
  offset_ += n;
}

std::uint8_t BinReader::u8() {
  std::uint8_t v;
  bytes(&v, 1);
  return v;
}

std::uint16_t BinReader::u16() {
  std::uint8_t b[2];
  bytes(b, 2);
  return std::uint16_t(b[0] | (b[1] << 8));
}

std::uint32_t BinReader::u32() {
  std::uint8_t b[4];
  bytes(b, 4);
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

std::uint64_t BinReader::u64() {
  std::uint8_t b[8];
  bytes(b, 8);
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

void BinReader::expect_magic(std::string_view tag) {
  char b[4];
  bytes(b, 4);
  if (std::string_view(b, 4) != tag)
    raise(Err::parse, path_.string() + ": bad magic, expected " + std::string(tag));
}

bool BinReader::eof() { return in_.peek() == std::ifstream::traits_type::eof(); }

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(Err::io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const fs::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) raise(Err::io, "cannot open " + path.string() + " for writing");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) raise(Err::io, "write failed on " + path.string());
}

std::uint64_t fnv1a(std::string_view data, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::uint64_t fnv1a_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(Err::io, "cannot open " + path.string());
  std::uint64_t h = 0xcbf29ce484222325ull;
  std::array<char, 65536> buf;
  while (in) {
    in.read(buf.data(), buf.size());
    const auto got = in.gcount();
    h = fnv1a(std::string_view(buf.data(), static_cast<std::size_t>(got)), h);
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[i] = digits[v & 0xf];
    v >>= 4;
  }
  return s;
}

}  // namespace mgs::io
