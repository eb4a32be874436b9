// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "mgs/encoding.hpp"

namespace mgs::abn {

namespace fs = std::filesystem;

inline constexpr unsigned kDefaultIndexK = 31;

// Per-species reference index: k-mer -> sorted local locations in the genome.
struct SpeciesIndex {
  TaxId taxid = 0;
  std::uint64_t genome_length = 0;
  unsigned k = 0;

  struct Entry {
    Kmer128 kmer;
    std::vector<std::uint32_t> locations;
  };
  std::vector<Entry> entries;  // sorted, unique by k-mer
};

SpeciesIndex build_species_index(TaxId taxid, std::string_view genome, unsigned k);

// Merged index over the candidate species with offset-adjusted locations.
struct UnifiedIndex {
  unsigned k = 0;

  struct Species {
    TaxId taxid = 0;
    std::uint64_t genome_length = 0;
    std::uint64_t offset = 0;  // sum of preceding genome lengths
  };
  std::vector<Species> species;  // ascending taxid

  struct Entry {
    Kmer128 kmer;
    std::vector<std::uint64_t> locations;  // global coordinates
  };
  std::vector<Entry> entries;
};

// K-way sorted merge; inputs must be ascending by taxid and share one k.
UnifiedIndex merge_indexes(std::span<const SpeciesIndex> indexes);

// Inverse of the offset adjustment; total and exact for valid indexes.
std::pair<TaxId, std::uint64_t> map_back(const UnifiedIndex& unified, std::uint64_t global_location);

struct AbundanceProfile {
  std::map<TaxId, double> abundance;
  double unclassified = 0.0;
};

// Per read, each k-mer votes once for every taxid owning one of its matched
// locations; the read goes to the max-vote taxid, ties stay unclassified.
AbundanceProfile estimate_abundance(std::span<const std::string> reads, const UnifiedIndex& unified,
                                    const std::set<TaxId>& candidates, unsigned threads = 1);

void write_species_index(const fs::path& path, const SpeciesIndex& index);
SpeciesIndex read_species_index(const fs::path& path);
std::string serialize_unified(const UnifiedIndex& unified);
void write_unified_index(const fs::path& path, const UnifiedIndex& unified);
UnifiedIndex read_unified_index(const fs::path& path);

}  // namespace mgs::abn
