// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mgs/encoding.hpp"

namespace mgs::db {

namespace fs = std::filesystem;

inline constexpr std::uint64_t kDefaultSeed = 0x9e3779b97f4a7c15ull;
inline constexpr std::size_t kMaxTaxidsPerEntry = 65535;

// Multiply-xor finalizer over the 128-bit word; drives bottom-s sketching.
std::uint64_t hash_kmer(Kmer128 word, std::uint64_t seed = kDefaultSeed) noexcept;

// On-disk sorted array of unique reference k-mers (the large streamed side).
struct SortedKmerDatabase {
  unsigned k = 0;
  std::vector<Kmer128> records;  // strictly increasing
};

SortedKmerDatabase build_kmer_db(std::span<const std::pair<TaxId, std::string>> genomes, unsigned k);

struct SketchEntry {
  Kmer128 kmer;
  std::vector<TaxId> taxids;  // non-empty, strictly increasing
};

struct SketchLevel {
  unsigned k = 0;
  std::vector<SketchEntry> entries;  // sorted by kmer, unique
};

// Per-level sketch tables; levels[0] is k_max and ks strictly decrease.
struct FlatSketch {
  std::vector<SketchLevel> levels;

  unsigned k_max() const { return levels.empty() ? 0 : levels.front().k; }
};

struct SketchParams {
  std::size_t sketch_size = 1000;               // bottom-s per taxid per level
  std::vector<unsigned> k_levels = {60, 50, 40, 30};
  std::uint64_t seed = kDefaultSeed;
};

// Bottom-s sketches per taxid per level, merged into flat tables. Smaller-level
// k-mers with no extension in the k_max table are anchored by force-including
// the contributing genome's lowest-hash extension, keeping prefix retrieval
// total across layouts.
FlatSketch build_sketches(std::span<const std::pair<TaxId, std::string>> genomes,
                          const SketchParams& params);

// Flattened multi-level layout for one-pass streaming retrieval: the k_max
// table stores k-mers and taxids; each smaller level stores only per-slot
// taxid lists, one slot per distinct k-prefix of the k_max table, holding the
// taxids not already attributed at any longer level for that prefix.
struct StreamSketch {
  unsigned k_max = 0;
  std::vector<SketchEntry> table;  // level k_max

  struct Level {
    unsigned k = 0;
    std::vector<std::vector<TaxId>> slots;
  };
  std::vector<Level> levels;  // strictly decreasing k < k_max
};

StreamSketch build_stream_sketch(const FlatSketch& flat);  // Err::inconsistent_levels

// Ternary search tree over base characters; terminal nodes at each level
// carry the same taxid lists as the flat tables. One traversal of a
// k_max-mer yields the hits at every level.
class TernaryTree {
 public:
  TernaryTree() = default;
  explicit TernaryTree(const FlatSketch& flat);

  // hits[i] = taxids matched at levels()[i] (empty span if none).
  std::vector<std::span<const TaxId>> lookup(Kmer128 query) const;

  const std::vector<unsigned>& levels() const { return levels_; }
  std::size_t node_count() const { return nodes_.size(); }

  std::string serialize() const;  // compact preorder encoding
  static TernaryTree deserialize(std::string_view bytes);

 private:
  struct Node {
    std::uint8_t split = 0;
    std::int32_t lo = -1, eq = -1, hi = -1;
    std::int32_t list = -1;  // index into lists_, -1 if not terminal
  };

  std::int32_t insert(std::int32_t root, const std::uint8_t* codes, unsigned len, std::int32_t list);

  std::vector<Node> nodes_;
  std::vector<std::vector<TaxId>> lists_;
  std::vector<unsigned> levels_;  // strictly decreasing, levels_[0] = k_max
  std::int32_t root_ = -1;
};

// Exact serialized byte counts per layout.
struct LayoutSizes {
  std::uint64_t flat = 0;
  std::uint64_t stream = 0;
  std::uint64_t tree = 0;
};

LayoutSizes structure_sizes(const FlatSketch& flat, const TernaryTree& tree, const StreamSketch& stream);

// Number of k_max-level sketch entries listing each taxid; the presence-call
// denominator.
std::map<TaxId, std::uint32_t> kmax_sketch_sizes(const FlatSketch& flat);

// Serialization. The database file is header {magic "MGIS", version u16,
// k u16, count u64} followed by fixed 16-byte little-endian records; sketch
// files carry a per-level section table {k, entry count, offset}.
std::string serialize_kmer_db(const SortedKmerDatabase& db);
std::string serialize_flat(const FlatSketch& flat);
std::string serialize_stream(const StreamSketch& stream);

void write_kmer_db(const fs::path& path, const SortedKmerDatabase& db);
SortedKmerDatabase read_kmer_db(const fs::path& path);  // verifies strictly increasing
void write_flat_sketch(const fs::path& path, const FlatSketch& flat);
FlatSketch read_flat_sketch(const fs::path& path);
void write_stream_sketch(const fs::path& path, const StreamSketch& stream);
StreamSketch read_stream_sketch(const fs::path& path);
void write_tree(const fs::path& path, const TernaryTree& tree);
TernaryTree read_tree(const fs::path& path);

}  // namespace mgs::db
