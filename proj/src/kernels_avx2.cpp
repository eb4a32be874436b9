// SPDX-License-Identifier: Apache-2.0
#if defined(MGS_HAVE_AVX2)

#include <immintrin.h>

#include "mgs/kernels.hpp"

namespace mgs::kernels::detail {

void encode_bases_scalar(const char* seq, std::size_t n, std::uint8_t* out);
std::size_t advance_lt_scalar(const Kmer128* rec, std::size_t n, Kmer128 pivot);

namespace {

// Low-nibble lookup over case-folded bytes: 'a'=0x61, 'c'=0x63, 'g'=0x67,
// 't'=0x74 have distinct low nibbles {1, 3, 7, 4}. A second lookup recovers
// the full expected byte so aliases (e.g. 'q' sharing nibble 1) are rejected.
inline __m256i nibble_table(std::uint8_t v1, std::uint8_t v3, std::uint8_t v4, std::uint8_t v7,
                            std::uint8_t other) {
  alignas(32) std::uint8_t t[32];
  for (int i = 0; i < 16; ++i) t[i] = other;
  t[1] = v1;
  t[3] = v3;
  t[4] = v4;
  t[7] = v7;
  for (int i = 0; i < 16; ++i) t[16 + i] = t[i];
  return _mm256_load_si256(reinterpret_cast<const __m256i*>(t));
}

}  // namespace

void encode_bases_avx2(const char* seq, std::size_t n, std::uint8_t* out) {
  const __m256i code_lut = nibble_table(0x00, 0x01, 0x03, 0x02, 0xff);
  const __m256i char_lut = nibble_table('a', 'c', 't', 'g', 0x00);
  const __m256i low_mask = _mm256_set1_epi8(0x0f);
  const __m256i case_bit = _mm256_set1_epi8(0x20);
  const __m256i bad = _mm256_set1_epi8(static_cast<char>(0xff));

  std::size_t i = 0;
  for (; i + 32 <= n; i += 32) {
    const __m256i raw = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(seq + i));
    const __m256i folded = _mm256_or_si256(raw, case_bit);
    const __m256i nib = _mm256_and_si256(folded, low_mask);
    const __m256i code = _mm256_shuffle_epi8(code_lut, nib);
    const __m256i expect = _mm256_shuffle_epi8(char_lut, nib);
    const __m256i ok = _mm256_cmpeq_epi8(folded, expect);
    const __m256i result = _mm256_blendv_epi8(bad, code, ok);
    _mm256_storeu_si256(reinterpret_cast<__m256i*>(out + i), result);
  }
  if (i < n) encode_bases_scalar(seq + i, n - i, out + i);
}

namespace {

// Per-record (rec < pivot) for the two 16-byte records in one vector.
// Memory layout per record is {hi, lo}, so qwords are [hi0, lo0, hi1, lo1].
inline void less_than_pair(__m256i v, __m256i pivot, __m256i bias, bool& lt0, bool& lt1) {
  const __m256i vb = _mm256_xor_si256(v, bias);
  const __m256i pb = _mm256_xor_si256(pivot, bias);
  const __m256i gt = _mm256_cmpgt_epi64(pb, vb);  // pivot qword > rec qword (unsigned)
  const __m256i eq = _mm256_cmpeq_epi64(v, pivot);
  // Move each record's lo-qword verdict into its hi-qword lane.
  const __m256i gt_lo = _mm256_shuffle_epi32(gt, 0x4e);
  const __m256i lt = _mm256_or_si256(gt, _mm256_and_si256(eq, gt_lo));
  const int mask = _mm256_movemask_epi8(lt);
  lt0 = (mask & 1) != 0;
  lt1 = (mask & (1 << 16)) != 0;
}

}  // namespace

std::size_t advance_lt_avx2(const Kmer128* rec, std::size_t n, Kmer128 pivot) {
  static_assert(sizeof(Kmer128) == 16);
  const __m256i pv = _mm256_set_epi64x(static_cast<long long>(pivot.lo), static_cast<long long>(pivot.hi),
                                       static_cast<long long>(pivot.lo), static_cast<long long>(pivot.hi));
  const __m256i bias = _mm256_set1_epi64x(static_cast<long long>(0x8000000000000000ull));
  std::size_t i = 0;
  while (i + 2 <= n) {
    const __m256i v = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(rec + i));
    bool lt0 = false, lt1 = false;
    less_than_pair(v, pv, bias, lt0, lt1);
    if (lt0 && lt1) {
      i += 2;
      continue;
    }
    return i + (lt0 ? 1 : 0);
  }
  return i + advance_lt_scalar(rec + i, n - i, pivot);
}

}  // namespace mgs::kernels::detail

#endif  // MGS_HAVE_AVX2
