// SPDX-License-Identifier: Apache-2.0
#include "mgs/abundance.hpp"

#include <algorithm>
#include <atomic>
#include <thread>

#include "mgs/io_util.hpp"
#include "mgs/query_prep.hpp"

namespace mgs::abn {

SpeciesIndex build_species_index(TaxId taxid, std::string_view genome, unsigned k) {
  if (taxid == kUnclassified) raise(Err::bad_range, "taxid 0 is reserved");
  SpeciesIndex index;
  index.taxid = taxid;
  index.genome_length = genome.size();
  index.k = k;

  std::vector<std::pair<Kmer128, std::uint32_t>> hits;
  std::uint32_t pos = 0;
  // extract_kmers skips ambiguous windows; track the window start by hand.
  std::size_t emitted = 0;
  std::vector<std::uint32_t> starts;
  {
    // Reconstruct window positions: walk the sequence mirroring the
    // extraction rule (a window ends at index i when the last k bases are
    // clean, so it starts at i - k + 1).
    unsigned run = 0;
    for (std::size_t i = 0; i < genome.size(); ++i) {
      if (encode_base(genome[i]) == kBadBase) {
        run = 0;
        continue;
      }
      if (++run >= k) starts.push_back(static_cast<std::uint32_t>(i - k + 1));
    }
  }
  prep::extract_kmers(genome, k, [&](Kmer128 km) {
    hits.emplace_back(km, starts[emitted]);
    ++emitted;
  });
  (void)pos;

  std::sort(hits.begin(), hits.end());
  for (std::size_t i = 0; i < hits.size();) {
    SpeciesIndex::Entry e;
    e.kmer = hits[i].first;
    while (i < hits.size() && hits[i].first == e.kmer) e.locations.push_back(hits[i++].second);
    index.entries.push_back(std::move(e));
  }
  return index;
}

UnifiedIndex merge_indexes(std::span<const SpeciesIndex> indexes) {
  UnifiedIndex unified;
  if (indexes.empty()) return unified;
  unified.k = indexes.front().k;

  std::uint64_t offset = 0;
  for (std::size_t i = 0; i < indexes.size(); ++i) {
    if (indexes[i].k != unified.k) raise(Err::k_mismatch, "species indexes disagree on k");
    if (i > 0 && indexes[i].taxid <= indexes[i - 1].taxid)
      raise(Err::unsorted_input, "species indexes must be ascending by taxid");
    unified.species.push_back({indexes[i].taxid, indexes[i].genome_length, offset});
    offset += indexes[i].genome_length;
  }

  // K-way merge over the sorted entry lists.
  std::vector<std::size_t> cursor(indexes.size(), 0);
  while (true) {
    const Kmer128* next = nullptr;
    for (std::size_t i = 0; i < indexes.size(); ++i) {
      if (cursor[i] >= indexes[i].entries.size()) continue;
      const Kmer128& km = indexes[i].entries[cursor[i]].kmer;
      if (!next || km < *next) next = &km;
    }
    if (!next) break;
    UnifiedIndex::Entry e;
    e.kmer = *next;
    for (std::size_t i = 0; i < indexes.size(); ++i) {
      if (cursor[i] >= indexes[i].entries.size()) continue;
      const auto& src = indexes[i].entries[cursor[i]];
      if (src.kmer == e.kmer) {
        for (const std::uint32_t loc : src.locations)
          e.locations.push_back(unified.species[i].offset + loc);
        ++cursor[i];
      }
    }
    unified.entries.push_back(std::move(e));
  }
  return unified;
}

std::pair<TaxId, std::uint64_t> map_back(const UnifiedIndex& unified, std::uint64_t global_location) {
  auto it = std::upper_bound(unified.species.begin(), unified.species.end(), global_location,
                             [](std::uint64_t v, const UnifiedIndex::Species& s) { return v < s.offset; });
  if (it == unified.species.begin()) raise(Err::bad_range, "global location below first offset");
  --it;
  const std::uint64_t local = global_location - it->offset;
  if (local >= it->genome_length) raise(Err::bad_range, "global location beyond genome length");
  return {it->taxid, local};
}

AbundanceProfile estimate_abundance(std::span<const std::string> reads, const UnifiedIndex& unified,
                                    const std::set<TaxId>& candidates, unsigned threads) {
  for (const TaxId t : candidates) {
    const bool known = std::any_of(unified.species.begin(), unified.species.end(),
                                   [&](const auto& s) { return s.taxid == t; });
    if (!known) raise(Err::bad_range, "candidate taxid missing from the unified index");
  }

  std::map<TaxId, std::uint64_t> assigned;
  std::uint64_t unclassified_reads = 0;

  auto classify = [&](const std::string& read) -> TaxId {
    std::map<TaxId, std::uint64_t> votes;
    prep::extract_kmers(read, unified.k, [&](Kmer128 km) {
      const auto it = std::lower_bound(unified.entries.begin(), unified.entries.end(), km,
                                       [](const UnifiedIndex::Entry& e, Kmer128 v) { return e.kmer < v; });
      if (it == unified.entries.end() || !(it->kmer == km)) return;
      // One vote per owning taxid per k-mer.
      TaxId last = kUnclassified;
      for (const std::uint64_t g : it->locations) {
        const TaxId owner = map_back(unified, g).first;
        if (owner != last && candidates.count(owner)) {
          ++votes[owner];
          last = owner;
        }
      }
    });
    TaxId best = kUnclassified;
    std::uint64_t best_votes = 0;
    bool tie = false;
    for (const auto& [t, v] : votes) {
      if (v > best_votes) {
        best = t;
        best_votes = v;
        tie = false;
      } else if (v == best_votes && best_votes > 0) {
        tie = true;
      }
    }
    return tie || best_votes == 0 ? kUnclassified : best;
  };

  const unsigned n_threads = std::max(1u, threads);
  if (n_threads == 1 || reads.size() < 2) {
    for (const std::string& r : reads) {
      const TaxId t = classify(r);
      if (t == kUnclassified)
        ++unclassified_reads;
      else
        ++assigned[t];
    }
  } else {
    std::vector<std::map<TaxId, std::uint64_t>> partial(n_threads);
    std::vector<std::uint64_t> partial_unclassified(n_threads, 0);
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < n_threads; ++t)
      pool.emplace_back([&, t] {
        for (;;) {
          const std::size_t i = next.fetch_add(1);
          if (i >= reads.size()) return;
          const TaxId tax = classify(reads[i]);
          if (tax == kUnclassified)
            ++partial_unclassified[t];
          else
            ++partial[t][tax];
        }
      });
    for (auto& th : pool) th.join();
    for (unsigned t = 0; t < n_threads; ++t) {
      unclassified_reads += partial_unclassified[t];
      for (const auto& [tax, c] : partial[t]) assigned[tax] += c;
    }
  }

  AbundanceProfile profile;
  const std::uint64_t total = reads.size();
  if (total == 0) {
    profile.unclassified = 1.0;
    return profile;
  }
  for (const auto& [t, c] : assigned) profile.abundance[t] = double(c) / double(total);
  profile.unclassified = double(unclassified_reads) / double(total);
  return profile;
}

namespace {

constexpr std::uint16_t kIndexVersion = 1;

}  // namespace

void write_species_index(const fs::path& path, const SpeciesIndex& index) {
  io::BinWriter w(path);
  w.magic("MGIX");
  w.u16(kIndexVersion);
  w.u16(static_cast<std::uint16_t>(index.k));
  w.u32(index.taxid);
  w.u64(index.genome_length);
  w.u64(index.entries.size());
  std::uint8_t rec[16];
  for (const auto& e : index.entries) {
    store_record(e.kmer, rec);
    w.bytes(rec, 16);
    w.u32(static_cast<std::uint32_t>(e.locations.size()));
    for (const std::uint32_t loc : e.locations) w.u32(loc);
  }
  w.close();
}

SpeciesIndex read_species_index(const fs::path& path) {
  io::BinReader r(path);
  r.expect_magic("MGIX");
  if (r.u16() != kIndexVersion) raise(Err::parse, path.string() + ": unsupported index version");
  SpeciesIndex index;
  index.k = r.u16();
  index.taxid = r.u32();
  index.genome_length = r.u64();
  index.entries.resize(r.u64());
  std::uint8_t rec[16];
  for (auto& e : index.entries) {
    r.bytes(rec, 16);
    e.kmer = load_record(rec);
    e.locations.resize(r.u32());
    for (std::uint32_t& loc : e.locations) loc = r.u32();
  }
  return index;
}

std::string serialize_unified(const UnifiedIndex& unified) {
  std::string out;
  auto u16 = [&](std::uint16_t v) {
    out.push_back(char(v));
    out.push_back(char(v >> 8));
  };
  auto u32 = [&](std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(char(v >> (8 * i)));
  };
  auto u64 = [&](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(char(v >> (8 * i)));
  };
  out += "MGUI";
  u16(kIndexVersion);
  u16(static_cast<std::uint16_t>(unified.k));
  u64(unified.entries.size());
  u32(static_cast<std::uint32_t>(unified.species.size()));
  for (const auto& s : unified.species) {
    u32(s.taxid);
    u64(s.genome_length);
    u64(s.offset);
  }
  std::uint8_t rec[16];
  for (const auto& e : unified.entries) {
    store_record(e.kmer, rec);
    out.append(reinterpret_cast<const char*>(rec), 16);
    u32(static_cast<std::uint32_t>(e.locations.size()));
    for (const std::uint64_t g : e.locations) u64(g);
  }
  return out;
}

void write_unified_index(const fs::path& path, const UnifiedIndex& unified) {
  io::write_text_file(path, serialize_unified(unified));
}

UnifiedIndex read_unified_index(const fs::path& path) {
  io::BinReader r(path);
  r.expect_magic("MGUI");
  if (r.u16() != kIndexVersion) raise(Err::parse, path.string() + ": unsupported index version");
  UnifiedIndex unified;
  unified.k = r.u16();
  const std::uint64_t entry_count = r.u64();
  unified.species.resize(r.u32());
  for (auto& s : unified.species) {
    s.taxid = r.u32();
    s.genome_length = r.u64();
    s.offset = r.u64();
  }
  unified.entries.resize(entry_count);
  std::uint8_t rec[16];
  for (auto& e : unified.entries) {
    r.bytes(rec, 16);
    e.kmer = load_record(rec);
    e.locations.resize(r.u32());
    for (std::uint64_t& g : e.locations) g = r.u64();
  }
  return unified;
}

}  // namespace mgs::abn
