// SPDX-License-Identifier: Apache-2.0
#include "mgs/kernels.hpp"

#include <array>
#include <atomic>

namespace mgs::kernels {

namespace detail {
// Defined in kernels_avx2.cpp when the target supports it.
#if defined(MGS_HAVE_AVX2)
void encode_bases_avx2(const char* seq, std::size_t n, std::uint8_t* out);
std::size_t advance_lt_avx2(const Kmer128* rec, std::size_t n, Kmer128 pivot);
#endif

void encode_bases_scalar(const char* seq, std::size_t n, std::uint8_t* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] = encode_base(seq[i]);
}

std::size_t advance_lt_scalar(const Kmer128* rec, std::size_t n, Kmer128 pivot) {
  std::size_t i = 0;
  while (i < n && rec[i] < pivot) ++i;
  return i;
}
}  // namespace detail

const char* isa_name(Isa isa) noexcept { return isa == Isa::avx2 ? "avx2" : "scalar"; }

Isa detect_isa() noexcept {
#if defined(MGS_HAVE_AVX2)
  if (__builtin_cpu_supports("avx2")) return Isa::avx2;
#endif
  return Isa::scalar;
}

namespace {
std::atomic<Isa> g_isa{detect_isa()};
}

Isa active_isa() noexcept { return g_isa.load(std::memory_order_relaxed); }

Isa set_isa(Isa isa) noexcept {
#if !defined(MGS_HAVE_AVX2)
  isa = Isa::scalar;
#endif
  return g_isa.exchange(isa, std::memory_order_relaxed);
}

void encode_bases(const char* seq, std::size_t n, std::uint8_t* out, Isa isa) {
#if defined(MGS_HAVE_AVX2)
  if (isa == Isa::avx2) {
    detail::encode_bases_avx2(seq, n, out);
    return;
  }
#else
  (void)isa;
#endif
  detail::encode_bases_scalar(seq, n, out);
}

void encode_bases(const char* seq, std::size_t n, std::uint8_t* out) {
  encode_bases(seq, n, out, active_isa());
}

std::size_t advance_lt(const Kmer128* rec, std::size_t n, Kmer128 pivot, Isa isa) {
#if defined(MGS_HAVE_AVX2)
  if (isa == Isa::avx2) return detail::advance_lt_avx2(rec, n, pivot);
#else
  (void)isa;
#endif
  return detail::advance_lt_scalar(rec, n, pivot);
}

std::size_t advance_lt(const Kmer128* rec, std::size_t n, Kmer128 pivot) {
  return advance_lt(rec, n, pivot, active_isa());
}

}  // namespace mgs::kernels
