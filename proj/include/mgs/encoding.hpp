// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <string_view>

#include "mgs/error.hpp"

namespace mgs {

using u128 = unsigned __int128;

// Taxonomic cluster identifier. 0 is reserved for "unclassified".
using TaxId = std::uint32_t;
inline constexpr TaxId kUnclassified = 0;

// 2-bit base codes in alphabetical order, so packed-integer order equals
// lexicographic string order.
inline constexpr std::uint8_t kBadBase = 0xff;
inline constexpr unsigned kMaxK = 60;

std::uint8_t encode_base(char b) noexcept;  // kBadBase outside {A,C,G,T,a,c,g,t}
char decode_base(std::uint8_t code) noexcept;

// Raw 128-bit k-mer word. Bases are packed most-significant-base-first;
// unused low bits are zero, so for equal k the (hi, lo) integer order is the
// lexicographic order of the base strings. Equality is bitwise.
struct Kmer128 {
  std::uint64_t hi = 0;
  std::uint64_t lo = 0;

  friend auto operator<=>(const Kmer128&, const Kmer128&) = default;
};

// A k-mer word together with its base count. k <= 60 (120 used bits).
struct PackedKmer {
  Kmer128 word;
  std::uint16_t k = 0;

  friend bool operator==(const PackedKmer&, const PackedKmer&) = default;
  friend auto operator<=>(const PackedKmer&, const PackedKmer&) = default;
};

PackedKmer pack_kmer(std::string_view s);               // k = |s|
PackedKmer pack_kmer(std::string_view s, unsigned k);   // Err::length_mismatch if k != |s|
std::string unpack_kmer(const PackedKmer& km);
std::string unpack_kmer(Kmer128 word, unsigned k);

// First k2 bases of km, re-packed; Err::prefix_too_long if k2 > km.k.
PackedKmer prefix(const PackedKmer& km, unsigned k2);
Kmer128 prefix_word(Kmer128 word, unsigned k2) noexcept;

Kmer128 reverse_complement(Kmer128 word, unsigned k) noexcept;
Kmer128 canonical(Kmer128 word, unsigned k) noexcept;  // min(word, revcomp)

// Numeric rank in [0, 4^k): the low-aligned integer value of the k-mer.
u128 kmer_rank(Kmer128 word, unsigned k) noexcept;
Kmer128 kmer_from_rank(u128 rank, unsigned k) noexcept;

// Fixed 16-byte little-endian record: bytes 0..7 = lo, 8..15 = hi.
void store_record(Kmer128 word, std::uint8_t out[16]) noexcept;
Kmer128 load_record(const std::uint8_t in[16]) noexcept;

}  // namespace mgs
