// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mgs/encoding.hpp"

namespace mgs::prep {

namespace fs = std::filesystem;

// Lexicographic bucket partition of the k-mer space. boundaries[0] is the
// minimum k-mer; every k-mer belongs to the bucket whose lower bound is the
// largest boundary <= k-mer (boundary values are inclusive).
struct BucketSpec {
  unsigned k = 0;
  std::vector<Kmer128> boundaries;

  std::size_t count() const { return boundaries.size(); }
};

inline constexpr std::size_t kDefaultBucketCount = 512;
inline constexpr std::size_t kPreliminaryFactor = 8;
inline constexpr std::size_t kCalibrationSample = 1'000'000;

// Builds 8*target equal-range preliminary buckets over the sample, then
// greedily merges adjacent buckets (smallest combined mass first) down to
// `target`, keeping the maximum merged mass low.
BucketSpec calibrate_buckets(std::span<const Kmer128> sample, unsigned k, std::size_t target = kDefaultBucketCount);

std::size_t assign_bucket(Kmer128 km, const BucketSpec& spec) noexcept;

struct KmerBucket {
  std::size_t index = 0;
  std::vector<Kmer128> kmers;
  bool pinned = true;
};

struct CountedKmer {
  Kmer128 kmer;
  std::uint32_t count = 0;

  friend bool operator==(const CountedKmer&, const CountedKmer&) = default;
};

// Sort + run-length collapse; output strictly increasing.
std::vector<CountedKmer> sort_and_count(std::vector<Kmer128> kmers);

// Keeps entries with min_c <= count <= max_c (max_c = 0 means unbounded).
std::vector<CountedKmer> exclude_by_frequency(std::vector<CountedKmer> counted, std::uint64_t min_c,
                                              std::uint64_t max_c);

struct QueryKmerSet {
  unsigned k = 0;
  std::vector<std::vector<CountedKmer>> buckets;  // bucket index order; globally sorted
  std::uint64_t total_distinct = 0;
};

// Host-DRAM residency: pin the longest prefix of buckets whose bytes fit in
// the budget after reserving a sequential-write buffer per spilled bucket.
inline constexpr std::uint64_t kSpillBufferBytes = 1ull << 20;

struct ResidencyPlan {
  std::size_t pinned_prefix = 0;  // buckets [0, pinned_prefix) stay in memory
  std::uint64_t pinned_bytes = 0;
  std::uint64_t spill_bytes = 0;
};

ResidencyPlan plan_residency(std::span<const std::uint64_t> bucket_bytes, std::uint64_t host_budget);

// Emits every k-window of seq that is free of ambiguous bases.
void extract_kmers(std::string_view seq, unsigned k, const std::function<void(Kmer128)>& sink);
std::vector<Kmer128> extract_kmers(std::span<const std::string> reads, unsigned k);

// FASTA or FASTQ (plain text, auto-detected); quality lines ignored.
std::vector<std::string> read_sequences(const fs::path& path);
void for_each_sequence(const fs::path& path, const std::function<void(std::string_view)>& fn);

// Spilled-bucket files: raw little-endian 16-byte records, append-only.
void write_spill(const fs::path& path, std::span<const Kmer128> kmers);
void append_spill(const fs::path& path, std::span<const Kmer128> kmers);
std::vector<Kmer128> read_spill(const fs::path& path);

void write_query_set(const fs::path& path, const QueryKmerSet& set);
QueryKmerSet read_query_set(const fs::path& path);

struct PrepareParams {
  unsigned k = 60;
  std::size_t target_buckets = kDefaultBucketCount;
  std::uint64_t min_count = 1;
  std::uint64_t max_count = 0;  // 0 = unbounded
  std::uint64_t dram_budget = 0;  // 0 = unlimited (everything pinned)
  unsigned threads = 1;
  fs::path spill_dir;  // required when dram_budget may force spills
};

struct PrepareStats {
  std::uint64_t extracted = 0;
  std::uint64_t distinct = 0;
  std::uint64_t kept = 0;
  std::size_t spilled_buckets = 0;
};

// Runs extraction -> calibration -> bucketing (+ residency/spill) -> per-bucket
// sort/count -> frequency exclusion over a read file.
QueryKmerSet prepare_queries(const fs::path& reads_path, const PrepareParams& params,
                             PrepareStats* stats = nullptr);
QueryKmerSet prepare_queries(std::span<const std::string> reads, const PrepareParams& params,
                             PrepareStats* stats = nullptr);

}  // namespace mgs::prep
