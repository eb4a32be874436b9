// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include "mgs/error.hpp"

namespace mgs::io {

namespace fs = std::filesystem;

// Little-endian scalar codec used by all binary file formats.
class BinWriter {
 public:
  explicit BinWriter(const fs::path& path);
  void u8(std::uint8_t v);
  void u16(std::uint16_t v);
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void bytes(const void* data, std::size_t n);
  void magic(std::string_view tag);  // exactly 4 bytes
  std::uint64_t offset() const { return offset_; }
  void close();

 private:
  std::ofstream out_;
  fs::path path_;
  std::uint64_t offset_ = 0;
};

class BinReader {
 public:
  explicit BinReader(const fs::path& path);
  std::uint8_t u8();
  std::uint16_t u16();
  std::uint32_t u32();
  std::uint64_t u64();
  void bytes(void* data, std::size_t n);
  void expect_magic(std::string_view tag);
  bool eof();
  std::uint64_t offset() const { return offset_; }

 private:
  std::ifstream in_;
  fs::path path_;
  std::uint64_t offset_ = 0;
};

std::string read_text_file(const fs::path& path);
void write_text_file(const fs::path& path, std::string_view content);

// FNV-1a 64-bit; used for config hashes and determinism checks.
std::uint64_t fnv1a(std::string_view data, std::uint64_t seed = 0xcbf29ce484222325ull);
std::uint64_t fnv1a_file(const fs::path& path);
std::string hex64(std::uint64_t v);

}  // namespace mgs::io
