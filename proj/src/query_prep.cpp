// SPDX-License-Identifier: Apache-2.0
#include "mgs/query_prep.hpp"

#include <algorithm>
#include <atomic>
#include <cassert>
#include <thread>

#include "mgs/io_util.hpp"
#include "mgs/kernels.hpp"

namespace mgs::prep {

namespace {

u128 space_size(unsigned k) {
  // 4^k, saturated so that k >= 64 does not overflow (k <= 60 in practice).
  return k >= 64 ? ~u128(0) : (u128(1) << (2 * k));
}

}  // namespace

BucketSpec calibrate_buckets(std::span<const Kmer128> sample, unsigned k, std::size_t target) {
  if (sample.empty()) raise(Err::empty_sample, "bucket calibration needs a non-empty sample");
  if (target < 1) raise(Err::bad_range, "bucket target must be >= 1");
  const u128 space = space_size(k);
  if (u128(target) > space) target = static_cast<std::size_t>(space);

  std::size_t prelim = target * kPreliminaryFactor;
  if (u128(prelim) > space) prelim = static_cast<std::size_t>(space);

  // Equal-range preliminary buckets over the k-mer rank space.
  std::vector<u128> lower(prelim);
  for (std::size_t i = 0; i < prelim; ++i) lower[i] = space / prelim * i + std::min<u128>(i, space % prelim);

  const std::size_t n = std::min(sample.size(), kCalibrationSample);
  std::vector<std::uint64_t> mass(prelim, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const u128 r = kmer_rank(sample[i], k);
    // Index of the last lower bound <= r.
    std::size_t idx = static_cast<std::size_t>(std::upper_bound(lower.begin(), lower.end(), r) - lower.begin()) - 1;
    ++mass[idx];
  }

  // Greedy adjacent merge: repeatedly fuse the neighbour pair with the
  // smallest combined mass until `target` buckets remain.
  struct Seg {
    u128 lower;
    std::uint64_t mass;
  };
  std::vector<Seg> segs(prelim);
  for (std::size_t i = 0; i < prelim; ++i) segs[i] = {lower[i], mass[i]};
  while (segs.size() > target) {
    std::size_t best = 0;
    std::uint64_t best_mass = segs[0].mass + segs[1].mass;
    for (std::size_t i = 1; i + 1 < segs.size(); ++i) {
      const std::uint64_t m = segs[i].mass + segs[i + 1].mass;
      if (m < best_mass) {
        best = i;
        best_mass = m;
      }
    }
    segs[best].mass = best_mass;
    segs.erase(segs.begin() + static_cast<std::ptrdiff_t>(best) + 1);
  }

  BucketSpec spec;
  spec.k = k;
  spec.boundaries.reserve(segs.size());
  for (const Seg& s : segs) spec.boundaries.push_back(kmer_from_rank(s.lower, k));
  assert(spec.boundaries.front() == Kmer128{});
  return spec;
}

std::size_t assign_bucket(Kmer128 km, const BucketSpec& spec) noexcept {
  const auto it = std::upper_bound(spec.boundaries.begin(), spec.boundaries.end(), km);
  return static_cast<std::size_t>(it - spec.boundaries.begin()) - 1;
}

std::vector<CountedKmer> sort_and_count(std::vector<Kmer128> kmers) {
  std::sort(kmers.begin(), kmers.end());
  std::vector<CountedKmer> out;
  out.reserve(kmers.size());
  for (std::size_t i = 0; i < kmers.size();) {
    std::size_t j = i;
    while (j < kmers.size() && kmers[j] == kmers[i]) ++j;
    out.push_back({kmers[i], static_cast<std::uint32_t>(j - i)});
    i = j;
  }
  return out;
}

std::vector<CountedKmer> exclude_by_frequency(std::vector<CountedKmer> counted, std::uint64_t min_c,
                                              std::uint64_t max_c) {
  if (min_c < 1 || (max_c != 0 && min_c > max_c))
    raise(Err::bad_range, "frequency bounds must satisfy 1 <= min <= max");
  std::erase_if(counted, [&](const CountedKmer& c) {
    return c.count < min_c || (max_c != 0 && c.count > max_c);
  });
  return counted;
}

ResidencyPlan plan_residency(std::span<const std::uint64_t> bucket_bytes, std::uint64_t host_budget) {
  const std::size_t n = bucket_bytes.size();
  std::uint64_t max_bucket = 0;
  std::uint64_t total = 0;
  for (const std::uint64_t b : bucket_bytes) {
    max_bucket = std::max(max_bucket, b);
    total += b;
  }
  if (host_budget == 0) return {n, total, 0};  // unlimited
  if (host_budget < max_bucket)
    raise(Err::budget_too_small, "host budget smaller than the largest bucket");

  std::vector<std::uint64_t> prefix(n + 1, 0);
  for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + bucket_bytes[i];
  for (std::size_t p = n + 1; p-- > 0;) {
    const std::uint64_t reserve = kSpillBufferBytes * (n - p);
    if (prefix[p] + reserve <= host_budget)
      return {p, prefix[p], total - prefix[p]};
  }
  raise(Err::budget_too_small, "host budget cannot hold the spill buffers");
}

void extract_kmers(std::string_view seq, unsigned k, const std::function<void(Kmer128)>& sink) {
  if (k < 1 || k > kMaxK) raise(Err::bad_range, "k must be in [1, 60]");
  if (seq.size() < k) return;
  std::vector<std::uint8_t> codes(seq.size());
  kernels::encode_bases(seq.data(), seq.size(), codes.data());

  const u128 mask = space_size(k) - 1;
  const unsigned shift = 128 - 2 * k;
  u128 acc = 0;
  unsigned run = 0;  // valid bases accumulated since the last ambiguous one
  for (std::size_t i = 0; i < codes.size(); ++i) {
    if (codes[i] == kBadBase) {
      run = 0;
      continue;
    }
    acc = ((acc << 2) | codes[i]) & mask;
    if (++run >= k) {
      u128 hi_aligned = acc << shift;
      Kmer128 word{static_cast<std::uint64_t>(hi_aligned >> 64), static_cast<std::uint64_t>(hi_aligned)};
#if defined(MGS_CANONICAL_KMERS)
      word = canonical(word, k);
#endif
      sink(word);
    }
  }
}

std::vector<Kmer128> extract_kmers(std::span<const std::string> reads, unsigned k) {
  std::vector<Kmer128> out;
  for (const std::string& r : reads) extract_kmers(r, k, [&](Kmer128 km) { out.push_back(km); });
  return out;
}

void for_each_sequence(const fs::path& path, const std::function<void(std::string_view)>& fn) {
  std::ifstream in(path);
  if (!in) raise(Err::io, "cannot open " + path.string());
  std::string line;
  // Peek at the first non-empty line to pick the format.
  std::streampos start = in.tellg();
  char first = 0;
  while (std::getline(in, line)) {
    if (!line.empty()) {
      first = line[0];
      break;
    }
  }
  if (first == 0) return;  // empty file
  in.clear();
  in.seekg(start);

  if (first == '>') {
    std::string seq;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      if (line[0] == '>') {
        if (!seq.empty()) fn(seq);
        seq.clear();
      } else {
        seq += line;
      }
    }
    if (!seq.empty()) fn(seq);
  } else if (first == '@') {
    // 4-line FASTQ records; quality ignored.
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      if (line[0] != '@') raise(Err::parse, path.string() + ": malformed FASTQ header line");
      std::string seq;
      if (!std::getline(in, seq)) raise(Err::parse, path.string() + ": truncated FASTQ record");
      if (!seq.empty() && seq.back() == '\r') seq.pop_back();
      std::string plus, qual;
      if (!std::getline(in, plus) || plus.empty() || plus[0] != '+')
        raise(Err::parse, path.string() + ": missing FASTQ separator line");
      if (!std::getline(in, qual)) raise(Err::parse, path.string() + ": missing FASTQ quality line");
      fn(seq);
    }
  } else {
    raise(Err::parse, path.string() + ": unrecognized read format (expected FASTA or FASTQ)");
  }
}

std::vector<std::string> read_sequences(const fs::path& path) {
  std::vector<std::string> out;
  for_each_sequence(path, [&](std::string_view s) { out.emplace_back(s); });
  return out;
}

namespace {

void write_records(io::BinWriter& w, std::span<const Kmer128> kmers) {
  std::uint8_t rec[16];
  for (const Kmer128 km : kmers) {
    store_record(km, rec);
    w.bytes(rec, 16);
  }
}

}  // namespace

void write_spill(const fs::path& path, std::span<const Kmer128> kmers) {
  io::BinWriter w(path);
  write_records(w, kmers);
  w.close();
}

void append_spill(const fs::path& path, std::span<const Kmer128> kmers) {
  std::ofstream out(path, std::ios::binary | std::ios::app);
  if (!out) raise(Err::io, "cannot open " + path.string() + " for append");
  std::uint8_t rec[16];
  for (const Kmer128 km : kmers) {
    store_record(km, rec);
    out.write(reinterpret_cast<const char*>(rec), 16);
  }
  if (!out) raise(Err::io, "append failed on " + path.string());
}

std::vector<Kmer128> read_spill(const fs::path& path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) raise(Err::io, "cannot open " + path.string());
  const auto size = static_cast<std::uint64_t>(in.tellg());
  if (size % 16 != 0) raise(Err::parse, path.string() + ": spill file size not a multiple of 16");
  in.seekg(0);
  std::vector<Kmer128> out(size / 16);
  std::uint8_t rec[16];
  for (Kmer128& km : out) {
    in.read(reinterpret_cast<char*>(rec), 16);
    km = load_record(rec);
  }
  return out;
}

void write_query_set(const fs::path& path, const QueryKmerSet& set) {
  io::BinWriter w(path);
  w.magic("MGQS");
  w.u16(1);
  w.u16(static_cast<std::uint16_t>(set.k));
  w.u32(static_cast<std::uint32_t>(set.buckets.size()));
  w.u64(set.total_distinct);
  for (const auto& bucket : set.buckets) {
    w.u64(bucket.size());
    std::uint8_t rec[16];
    for (const CountedKmer& c : bucket) {
      store_record(c.kmer, rec);
      w.bytes(rec, 16);
      w.u32(c.count);
    }
  }
  w.close();
}

QueryKmerSet read_query_set(const fs::path& path) {
  io::BinReader r(path);
  r.expect_magic("MGQS");
  if (r.u16() != 1) raise(Err::parse, path.string() + ": unsupported version");
  QueryKmerSet set;
  set.k = r.u16();
  const std::uint32_t buckets = r.u32();
  set.total_distinct = r.u64();
  set.buckets.resize(buckets);
  std::uint8_t rec[16];
  for (auto& bucket : set.buckets) {
    bucket.resize(r.u64());
    for (CountedKmer& c : bucket) {
      r.bytes(rec, 16);
      c.kmer = load_record(rec);
      c.count = r.u32();
    }
  }
  return set;
}

QueryKmerSet prepare_queries(std::span<const std::string> reads, const PrepareParams& params,
                             PrepareStats* stats) {
  std::vector<Kmer128> all = extract_kmers(reads, params.k);
  if (stats) stats->extracted = all.size();
  if (all.empty()) {
    QueryKmerSet empty;
    empty.k = params.k;
    return empty;
  }

  const BucketSpec spec = calibrate_buckets(all, params.k, params.target_buckets);
  std::vector<std::vector<Kmer128>> raw(spec.count());
  for (const Kmer128 km : all) raw[assign_bucket(km, spec)].push_back(km);
  all.clear();
  all.shrink_to_fit();

  std::size_t pinned = raw.size();
  fs::path spill_dir;
  if (params.dram_budget != 0) {
    std::vector<std::uint64_t> bytes(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) bytes[i] = raw[i].size() * sizeof(Kmer128);
    const ResidencyPlan plan = plan_residency(bytes, params.dram_budget);
    pinned = plan.pinned_prefix;
    if (stats) stats->spilled_buckets = raw.size() - pinned;
    if (pinned < raw.size()) {
      spill_dir = params.spill_dir.empty() ? fs::temp_directory_path() : params.spill_dir;
      fs::create_directories(spill_dir);
      for (std::size_t i = pinned; i < raw.size(); ++i) {
        write_spill(spill_dir / ("bucket_" + std::to_string(i) + ".spill"), raw[i]);
        raw[i].clear();
        raw[i].shrink_to_fit();
      }
    }
  }

  QueryKmerSet set;
  set.k = params.k;
  set.buckets.resize(raw.size());
  std::vector<std::uint64_t> distinct_per_bucket(raw.size(), 0);

  // Pinned buckets are independent; workers pull indices from a shared cursor.
  const unsigned threads = std::max(1u, params.threads);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= pinned) return;
      auto counted = sort_and_count(std::move(raw[i]));
      distinct_per_bucket[i] = counted.size();
      set.buckets[i] = exclude_by_frequency(std::move(counted), params.min_count, params.max_count);
    }
  };
  if (threads == 1 || pinned <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < std::min<std::size_t>(threads, pinned); ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  // Spilled buckets come back one at a time to respect the budget.
  for (std::size_t i = pinned; i < raw.size(); ++i) {
    const fs::path p = spill_dir / ("bucket_" + std::to_string(i) + ".spill");
    auto counted = sort_and_count(read_spill(p));
    fs::remove(p);
    distinct_per_bucket[i] = counted.size();
    set.buckets[i] = exclude_by_frequency(std::move(counted), params.min_count, params.max_count);
  }

  for (std::size_t i = 0; i < set.buckets.size(); ++i) set.total_distinct += set.buckets[i].size();
  if (stats) {
    stats->kept = set.total_distinct;
    stats->distinct = 0;
    for (const std::uint64_t d : distinct_per_bucket) stats->distinct += d;
  }
  return set;
}

QueryKmerSet prepare_queries(const fs::path& reads_path, const PrepareParams& params,
                             PrepareStats* stats) {
  std::vector<std::string> reads = read_sequences(reads_path);
  return prepare_queries(reads, params, stats);
}

}  // namespace mgs::prep
