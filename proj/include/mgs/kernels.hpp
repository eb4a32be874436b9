// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>

#include "mgs/encoding.hpp"

// Data-parallel inner loops with a scalar reference implementation and an
// AVX2 variant selected at runtime. Both variants are bit-identical; the
// equivalence tests in tests/test_kernels.cpp exercise them against each
// other on random inputs.
namespace mgs::kernels {

enum class Isa { scalar, avx2 };

const char* isa_name(Isa isa) noexcept;

// Best ISA supported by the running CPU.
Isa detect_isa() noexcept;

// Current dispatch choice (detect_isa() unless overridden).
Isa active_isa() noexcept;

// Override dispatch, e.g. to force the scalar reference path. Pass
// detect_isa() to restore the default. Returns the previous choice.
Isa set_isa(Isa isa) noexcept;

// out[i] = 2-bit code of seq[i] (A/C/G/T, case-insensitive) or 0xff.
void encode_bases(const char* seq, std::size_t n, std::uint8_t* out);
void encode_bases(const char* seq, std::size_t n, std::uint8_t* out, Isa isa);

// Length of the leading run of records strictly less than pivot, i.e. the
// index of the first record >= pivot (n if none). Records need not be sorted;
// the scan stops at the first non-qualifying record either way.
std::size_t advance_lt(const Kmer128* rec, std::size_t n, Kmer128 pivot);
std::size_t advance_lt(const Kmer128* rec, std::size_t n, Kmer128 pivot, Isa isa);

}  // namespace mgs::kernels
