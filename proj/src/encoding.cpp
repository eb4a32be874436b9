// SPDX-License-Identifier: Apache-2.0
#include "mgs/encoding.hpp"

#include <array>
#include <cstring>

namespace mgs {

namespace {

constexpr std::array<std::uint8_t, 256> make_base_table() {
  std::array<std::uint8_t, 256> t{};
  for (auto& v : t) v = kBadBase;
  t['A'] = t['a'] = 0;
  t['C'] = t['c'] = 1;
  t['G'] = t['g'] = 2;
  t['T'] = t['t'] = 3;
  return t;
}

constexpr auto kBaseTable = make_base_table();
constexpr char kBaseChar[4] = {'A', 'C', 'G', 'T'};

u128 to_u128(Kmer128 w) noexcept { return (u128(w.hi) << 64) | w.lo; }

Kmer128 from_u128(u128 v) noexcept {
  return Kmer128{static_cast<std::uint64_t>(v >> 64), static_cast<std::uint64_t>(v)};
}

}  // namespace

std::uint8_t encode_base(char b) noexcept { return kBaseTable[static_cast<unsigned char>(b)]; }

char decode_base(std::uint8_t code) noexcept { return kBaseChar[code & 3]; }

PackedKmer pack_kmer(std::string_view s) {
  if (s.empty() || s.size() > kMaxK)
    raise(Err::length_mismatch, "k-mer length must be in [1, 60], got " + std::to_string(s.size()));
  u128 v = 0;
  for (char c : s) {
    const std::uint8_t code = encode_base(c);
    if (code == kBadBase) raise(Err::ambiguous_base, std::string("ambiguous base '") + c + "'");
    v = (v << 2) | code;
  }
  const unsigned k = static_cast<unsigned>(s.size());
  v <<= (128 - 2 * k);
  return PackedKmer{from_u128(v), static_cast<std::uint16_t>(k)};
}

PackedKmer pack_kmer(std::string_view s, unsigned k) {
  if (s.size() != k)
    raise(Err::length_mismatch,
          "expected " + std::to_string(k) + " bases, got " + std::to_string(s.size()));
  return pack_kmer(s);
}

std::string unpack_kmer(Kmer128 word, unsigned k) {
  std::string s(k, '?');
  u128 v = to_u128(word);
  for (unsigned i = 0; i < k; ++i) {
    s[i] = kBaseChar[static_cast<unsigned>(v >> 126) & 3];
    v <<= 2;
  }
  return s;
}

std::string unpack_kmer(const PackedKmer& km) { return unpack_kmer(km.word, km.k); }

Kmer128 prefix_word(Kmer128 word, unsigned k2) noexcept {
  const unsigned bits = 2 * k2;  // bits kept from the top
  if (bits == 0) return Kmer128{};
  if (bits >= 128) return word;
  if (bits <= 64) {
    const std::uint64_t mask = bits == 64 ? ~0ull : ~0ull << (64 - bits);
    return Kmer128{word.hi & mask, 0};
  }
  const std::uint64_t mask = ~0ull << (128 - bits);
  return Kmer128{word.hi, word.lo & mask};
}

PackedKmer prefix(const PackedKmer& km, unsigned k2) {
  if (k2 > km.k)
    raise(Err::prefix_too_long, "prefix length " + std::to_string(k2) + " exceeds k=" + std::to_string(km.k));
  return PackedKmer{prefix_word(km.word, k2), static_cast<std::uint16_t>(k2)};
}

Kmer128 reverse_complement(Kmer128 word, unsigned k) noexcept {
  u128 v = to_u128(word) >> (128 - 2 * k);
  u128 r = 0;
  for (unsigned i = 0; i < k; ++i) {
    r = (r << 2) | ((v & 3) ^ 3);  // complement: A<->T, C<->G
    v >>= 2;
  }
  return from_u128(r << (128 - 2 * k));
}

Kmer128 canonical(Kmer128 word, unsigned k) noexcept {
  const Kmer128 rc = reverse_complement(word, k);
  return rc < word ? rc : word;
}

u128 kmer_rank(Kmer128 word, unsigned k) noexcept { return to_u128(word) >> (128 - 2 * k); }

Kmer128 kmer_from_rank(u128 rank, unsigned k) noexcept { return from_u128(rank << (128 - 2 * k)); }

void store_record(Kmer128 word, std::uint8_t out[16]) noexcept {
  for (int i = 0; i < 8; ++i) out[i] = static_cast<std::uint8_t>(word.lo >> (8 * i));
  for (int i = 0; i < 8; ++i) out[8 + i] = static_cast<std::uint8_t>(word.hi >> (8 * i));
}

Kmer128 load_record(const std::uint8_t in[16]) noexcept {
  Kmer128 w;
  for (int i = 7; i >= 0; --i) w.lo = (w.lo << 8) | in[i];
  for (int i = 7; i >= 0; --i) w.hi = (w.hi << 8) | in[8 + i];
  return w;
}

}  // namespace mgs
