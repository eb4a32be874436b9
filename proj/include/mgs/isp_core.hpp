// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <vector>

#include "mgs/encoding.hpp"
#include "mgs/kernels.hpp"
#include "mgs/query_prep.hpp"
#include "mgs/refdb.hpp"

namespace mgs::sim {
struct FtlMapping;
}

namespace mgs::isp {

inline constexpr std::size_t kBatchBytes = 1 << 20;          // two of these are in flight
inline constexpr std::uint64_t kIntersectionBudget = 1ull << 30;

// One transfer unit of query records; boundaries never split a record.
struct Batch {
  std::span<const Kmer128> payload;  // <= kBatchBytes worth of records
  std::size_t sequence = 0;
};

struct IntersectStats {
  std::uint64_t examined = 0;  // elements consumed; <= |query| + |db|
  std::uint64_t matches = 0;
};

// Sorted merge-join over two strictly increasing streams. The database-side
// cursor survives across feeds so bucketed queries stream against one pass of
// the database. Inversions among consumed elements raise Err::unsorted_input.
class Intersector {
 public:
  explicit Intersector(std::span<const Kmer128> db, kernels::Isa isa = kernels::active_isa());

  // Appends matches for this (globally sorted) query chunk to `out`.
  void feed(std::span<const Kmer128> query, std::vector<Kmer128>& out);

  const IntersectStats& stats() const { return stats_; }

 private:
  void consume_query_run(std::span<const Kmer128> query, std::size_t from, std::size_t to);

  std::span<const Kmer128> db_;
  std::size_t di_ = 0;
  std::size_t db_validated_ = 0;
  Kmer128 last_query_{};
  bool have_last_query_ = false;
  kernels::Isa isa_;
  IntersectStats stats_;
};

std::vector<Kmer128> stream_intersect(std::span<const Kmer128> query, std::span<const Kmer128> db,
                                      IntersectStats* stats = nullptr,
                                      kernels::Isa isa = kernels::active_isa());

// Sorted k-mers present in both query and database, with per-bucket provenance.
struct IntersectionSet {
  std::vector<Kmer128> kmers;
  std::vector<std::uint64_t> per_bucket;  // matches contributed by each query bucket
};

// TaxId -> matched count per sketch level (level_ks[0] = k_max, decreasing).
struct TaxHits {
  std::vector<unsigned> level_ks;
  std::map<TaxId, std::vector<std::uint64_t>> counts;

  friend bool operator==(const TaxHits&, const TaxHits&) = default;
};

// One-pass taxid retrieval over the streamed sketch tables: a merge-join with
// the k_max table accumulates exact hits while per-level prefix-change
// detection advances the smaller-level slot cursors. Each slot is charged at
// most once; cursors only move forward. Chunks may arrive incrementally as
// long as they are globally increasing (the resume path when the intersection
// outgrows its budget).
class StreamRetriever {
 public:
  explicit StreamRetriever(const db::StreamSketch& sketch);

  void feed(std::span<const Kmer128> inter);
  TaxHits finish();

  // Test hook: records every slot-cursor position change per level.
  struct CursorTrace {
    std::vector<std::vector<std::size_t>> positions;  // per smaller level
  };
  void set_trace(CursorTrace* trace) { trace_ = trace; }

 private:
  void charge_slots(Kmer128 q, std::size_t ti);
  void advance_table();

  const db::StreamSketch& sketch_;
  std::size_t ti_ = 0;
  std::vector<std::size_t> slot_cursor_;
  std::vector<char> slot_charged_;
  TaxHits hits_;
  Kmer128 last_q_{};
  bool have_last_q_ = false;
  CursorTrace* trace_ = nullptr;
};

TaxHits retrieve_taxids(std::span<const Kmer128> inter, const db::StreamSketch& sketch);

// Present iff (sum over levels of (k/k_max) * hits) / k_max-sketch-size >= tau.
std::set<TaxId> call_presence(const TaxHits& hits, const std::map<TaxId, std::uint32_t>& sketch_sizes,
                              double tau);

struct Step2Options {
  std::size_t batch_bytes = kBatchBytes;
  std::uint64_t intersection_budget = kIntersectionBudget;
  kernels::Isa isa = kernels::active_isa();
};

struct Step2Result {
  IntersectionSet intersection;
  TaxHits hits;
  IntersectStats stats;
  std::size_t retrieval_flushes = 0;  // budget-forced partial retrievals
};

// Step 2 end to end: bucketed query batches -> intersection -> retrieval,
// flushing partial intersections to the retriever whenever the budget fills.
Step2Result run_step2(const prep::QueryKmerSet& query, std::span<const Kmer128> db,
                      const db::StreamSketch& sketch, const Step2Options& opts = {});

// Per-channel lanes over the placement stripes; block results concatenate in
// block order, matching the single-stream intersection exactly.
std::vector<Kmer128> striped_intersect(std::span<const Kmer128> query, std::span<const Kmer128> db,
                                       const sim::FtlMapping& mapping, unsigned threads = 1);

}  // namespace mgs::isp
