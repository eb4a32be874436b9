// SPDX-License-Identifier: Apache-2.0
#include "mgs/refdb.hpp"

#include <algorithm>
#include <cassert>
#include <map>
#include <set>

#include "mgs/io_util.hpp"
#include "mgs/query_prep.hpp"

namespace mgs::db {

namespace {

std::uint64_t mix64(std::uint64_t x) noexcept {
  x ^= x >> 33;
  x *= 0xff51afd7ed558ccdull;
  x ^= x >> 33;
  x *= 0xc4ceb9fe1a85ec53ull;
  x ^= x >> 33;
  return x;
}

// Inclusive upper end of the word range sharing the k-base prefix of x.
Kmer128 prefix_range_end(Kmer128 x, unsigned k) noexcept {
  const unsigned bits = 2 * k;
  if (bits >= 128) return x;
  if (bits <= 64) return {x.hi | (bits == 64 ? 0 : (~0ull >> bits)), ~0ull};
  return {x.hi, x.lo | (~0ull >> (bits - 64))};
}

std::uint8_t base_code_at(Kmer128 w, unsigned pos) noexcept {
  return pos < 32 ? static_cast<std::uint8_t>((w.hi >> (62 - 2 * pos)) & 3)
                  : static_cast<std::uint8_t>((w.lo >> (62 - 2 * (pos - 32))) & 3);
}

void merge_taxids(std::vector<TaxId>& into, std::span<const TaxId> more) {
  into.insert(into.end(), more.begin(), more.end());
  std::sort(into.begin(), into.end());
  into.erase(std::unique(into.begin(), into.end()), into.end());
}

std::vector<Kmer128> distinct_kmers(std::string_view seq, unsigned k) {
  std::vector<Kmer128> kmers;
  prep::extract_kmers(seq, k, [&](Kmer128 km) { kmers.push_back(km); });
  std::sort(kmers.begin(), kmers.end());
  kmers.erase(std::unique(kmers.begin(), kmers.end()), kmers.end());
  return kmers;
}

}  // namespace

std::uint64_t hash_kmer(Kmer128 word, std::uint64_t seed) noexcept {
  return mix64(word.hi ^ mix64(word.lo ^ seed));
}

SortedKmerDatabase build_kmer_db(std::span<const std::pair<TaxId, std::string>> genomes, unsigned k) {
  if (genomes.empty()) raise(Err::empty_input, "no genomes to index");
  if (k < 1 || k > kMaxK) raise(Err::bad_range, "database k must be in [1, 60]");
  SortedKmerDatabase db;
  db.k = k;
  for (const auto& [taxid, seq] : genomes)
    prep::extract_kmers(seq, k, [&](Kmer128 km) { db.records.push_back(km); });
  std::sort(db.records.begin(), db.records.end());
  db.records.erase(std::unique(db.records.begin(), db.records.end()), db.records.end());
  return db;
}

FlatSketch build_sketches(std::span<const std::pair<TaxId, std::string>> genomes,
                          const SketchParams& params) {
  if (genomes.empty()) raise(Err::empty_input, "no genomes to sketch");
  if (params.k_levels.empty()) raise(Err::bad_range, "at least one sketch level required");
  for (std::size_t i = 1; i < params.k_levels.size(); ++i)
    if (params.k_levels[i] >= params.k_levels[i - 1])
      raise(Err::bad_range, "sketch levels must be strictly decreasing");

  // Group sequences by taxid so repeated taxids sketch the union of k-mers.
  // The "N" joint keeps windows from spanning two sequences.
  std::map<TaxId, std::string> by_taxid;
  for (const auto& [taxid, seq] : genomes) {
    auto it = by_taxid.find(taxid);
    if (it == by_taxid.end())
      by_taxid.emplace(taxid, seq);
    else
      it->second += "N" + seq;
  }

  const std::size_t n_levels = params.k_levels.size();

  // taxid -> distinct k_max-mers; kept for anchoring smaller-level sketches.
  std::map<TaxId, std::vector<Kmer128>> kmax_sets;

  // Per level: (kmer, taxid) pairs before merging.
  std::vector<std::vector<std::pair<Kmer128, TaxId>>> pairs(n_levels);
  for (const auto& [taxid, seq] : by_taxid) {
    for (std::size_t li = 0; li < n_levels; ++li) {
      const unsigned k = params.k_levels[li];
      std::vector<Kmer128> kmers = distinct_kmers(seq, k);
      if (li == 0) kmax_sets[taxid] = kmers;
      if (kmers.size() > params.sketch_size) {
        std::vector<std::pair<std::uint64_t, Kmer128>> hashed;
        hashed.reserve(kmers.size());
        for (const Kmer128 km : kmers) hashed.emplace_back(hash_kmer(km, params.seed), km);
        std::nth_element(hashed.begin(), hashed.begin() + static_cast<std::ptrdiff_t>(params.sketch_size),
                         hashed.end());
        hashed.resize(params.sketch_size);
        kmers.clear();
        for (const auto& [h, km] : hashed) kmers.push_back(km);
        std::sort(kmers.begin(), kmers.end());
      }
      for (const Kmer128 km : kmers) pairs[li].emplace_back(km, taxid);
    }
  }

  FlatSketch flat;
  flat.levels.resize(n_levels);
  for (std::size_t li = 0; li < n_levels; ++li) {
    flat.levels[li].k = params.k_levels[li];
    auto& p = pairs[li];
    std::sort(p.begin(), p.end());
    auto& entries = flat.levels[li].entries;
    for (std::size_t i = 0; i < p.size();) {
      SketchEntry e;
      e.kmer = p[i].first;
      while (i < p.size() && p[i].first == e.kmer) e.taxids.push_back(p[i++].second);
      e.taxids.erase(std::unique(e.taxids.begin(), e.taxids.end()), e.taxids.end());
      if (e.taxids.size() > kMaxTaxidsPerEntry)
        raise(Err::capacity_exceeded, "taxid list exceeds 65535 entries");
      entries.push_back(std::move(e));
    }
  }

  // Totalize: every smaller-level sketch k-mer must be a prefix of some k_max
  // table entry. Anchor missing prefixes with the contributing genome's
  // lowest-hash extension; drop taxids with no extension anywhere.
  auto& table = flat.levels[0].entries;
  std::vector<std::pair<Kmer128, TaxId>> anchors;
  for (std::size_t li = 1; li < n_levels; ++li) {
    const unsigned k = flat.levels[li].k;
    auto& entries = flat.levels[li].entries;
    std::vector<SketchEntry> kept;
    for (SketchEntry& e : entries) {
      const Kmer128 range_end = prefix_range_end(e.kmer, k);
      const auto lo = std::lower_bound(table.begin(), table.end(), e.kmer,
                                       [](const SketchEntry& a, Kmer128 v) { return a.kmer < v; });
      const bool anchored_already =
          lo != table.end() && !(range_end < lo->kmer);
      if (anchored_already) {
        kept.push_back(std::move(e));
        continue;
      }
      std::vector<TaxId> surviving;
      for (const TaxId t : e.taxids) {
        const auto& owned = kmax_sets.at(t);
        auto pick_extension = [&](const std::vector<Kmer128>& set) -> const Kmer128* {
          auto it = std::lower_bound(set.begin(), set.end(), e.kmer);
          const Kmer128* best = nullptr;
          std::uint64_t best_hash = ~0ull;
          for (; it != set.end() && !(range_end < *it); ++it) {
            const std::uint64_t h = hash_kmer(*it, params.seed);
            if (h < best_hash) {
              best_hash = h;
              best = &*it;
            }
          }
          return best;
        };
        if (const Kmer128* ext = pick_extension(owned)) {
          anchors.emplace_back(*ext, t);
          surviving.push_back(t);
          continue;
        }
        bool found = false;
        for (const auto& [other, set] : kmax_sets) {
          if (const Kmer128* ext = pick_extension(set)) {
            anchors.emplace_back(*ext, other);
            surviving.push_back(t);
            found = true;
            break;
          }
        }
        if (!found) {
          // No genome extends this k-mer at k_max (tail window); drop it from
          // this taxid's sketch to keep the layouts semantically identical.
        }
      }
      if (!surviving.empty()) {
        e.taxids = std::move(surviving);
        kept.push_back(std::move(e));
      }
    }
    entries = std::move(kept);
  }

  if (!anchors.empty()) {
    std::sort(anchors.begin(), anchors.end());
    anchors.erase(std::unique(anchors.begin(), anchors.end()), anchors.end());
    std::vector<SketchEntry> merged;
    merged.reserve(table.size() + anchors.size());
    std::size_t ai = 0;
    for (SketchEntry& e : table) {
      while (ai < anchors.size() && anchors[ai].first < e.kmer)
        merged.push_back(SketchEntry{anchors[ai].first, {anchors[ai++].second}});
      while (ai < anchors.size() && anchors[ai].first == e.kmer) {
        merge_taxids(e.taxids, std::span<const TaxId>(&anchors[ai].second, 1));
        ++ai;
      }
      merged.push_back(std::move(e));
    }
    while (ai < anchors.size())
      merged.push_back(SketchEntry{anchors[ai].first, {anchors[ai++].second}});
    // Adjacent anchor runs with one k-mer collapse into a single entry.
    std::vector<SketchEntry> collapsed;
    for (SketchEntry& e : merged) {
      if (!collapsed.empty() && collapsed.back().kmer == e.kmer)
        merge_taxids(collapsed.back().taxids, e.taxids);
      else
        collapsed.push_back(std::move(e));
    }
    table = std::move(collapsed);
  }
  return flat;
}

StreamSketch build_stream_sketch(const FlatSketch& flat) {
  if (flat.levels.empty()) raise(Err::empty_input, "empty sketch");
  StreamSketch out;
  out.k_max = flat.levels.front().k;
  out.table = flat.levels.front().entries;

  const auto& table = out.table;
  auto table_range = [&](Kmer128 prefix, unsigned k) {
    const Kmer128 end = prefix_range_end(prefix, k);
    auto lo = std::lower_bound(table.begin(), table.end(), prefix,
                               [](const SketchEntry& a, Kmer128 v) { return a.kmer < v; });
    auto hi = lo;
    while (hi != table.end() && !(end < hi->kmer)) ++hi;
    return std::pair(lo, hi);
  };

  // Closure check: every smaller-level flat k-mer must be a table prefix.
  for (std::size_t li = 1; li < flat.levels.size(); ++li) {
    for (const SketchEntry& e : flat.levels[li].entries) {
      auto [lo, hi] = table_range(e.kmer, flat.levels[li].k);
      if (lo == hi)
        raise(Err::inconsistent_levels,
              "sketch k-mer at k=" + std::to_string(flat.levels[li].k) +
                  " is not a prefix of any k_max entry");
    }
  }

  for (std::size_t li = 1; li < flat.levels.size(); ++li) {
    const unsigned k = flat.levels[li].k;
    const auto& flat_entries = flat.levels[li].entries;
    StreamSketch::Level level;
    level.k = k;

    std::size_t i = 0;
    while (i < table.size()) {
      const Kmer128 slot_prefix = prefix_word(table[i].kmer, k);
      std::size_t j = i;
      while (j < table.size() && prefix_word(table[j].kmer, k) == slot_prefix) ++j;

      // Union of taxids attributed at every longer level for this prefix:
      // the k_max entries in range plus the flat tables of intermediate levels.
      std::vector<TaxId> attributed;
      for (std::size_t e = i; e < j; ++e) merge_taxids(attributed, table[e].taxids);
      for (std::size_t lj = 1; lj < li; ++lj) {
        const unsigned kj = flat.levels[lj].k;
        const auto& ej = flat.levels[lj].entries;
        std::size_t e = i;
        while (e < j) {
          const Kmer128 p = prefix_word(table[e].kmer, kj);
          auto it = std::lower_bound(ej.begin(), ej.end(), p,
                                     [](const SketchEntry& a, Kmer128 v) { return a.kmer < v; });
          if (it != ej.end() && it->kmer == p) merge_taxids(attributed, it->taxids);
          while (e < j && prefix_word(table[e].kmer, kj) == p) ++e;
        }
      }

      std::vector<TaxId> slot;
      const auto it = std::lower_bound(flat_entries.begin(), flat_entries.end(), slot_prefix,
                                       [](const SketchEntry& a, Kmer128 v) { return a.kmer < v; });
      if (it != flat_entries.end() && it->kmer == slot_prefix) {
        for (const TaxId t : it->taxids)
          if (!std::binary_search(attributed.begin(), attributed.end(), t)) slot.push_back(t);
      }
      level.slots.push_back(std::move(slot));
      i = j;
    }
    out.levels.push_back(std::move(level));
  }
  return out;
}

TernaryTree::TernaryTree(const FlatSketch& flat) {
  for (const SketchLevel& level : flat.levels) levels_.push_back(level.k);

  // Bisection insertion keeps the per-character BSTs shallow.
  std::vector<std::uint8_t> codes;
  auto insert_range = [&](const std::vector<SketchEntry>& entries, unsigned k, auto&& self,
                          std::size_t lo, std::size_t hi) -> void {
    if (lo >= hi) return;
    const std::size_t mid = lo + (hi - lo) / 2;
    const SketchEntry& e = entries[mid];
    codes.resize(k);
    for (unsigned i = 0; i < k; ++i) codes[i] = base_code_at(e.kmer, i);
    lists_.push_back(e.taxids);
    root_ = insert(root_, codes.data(), k, static_cast<std::int32_t>(lists_.size() - 1));
    self(entries, k, self, lo, mid);
    self(entries, k, self, mid + 1, hi);
  };
  for (const SketchLevel& level : flat.levels)
    insert_range(level.entries, level.k, insert_range, 0, level.entries.size());
}

std::int32_t TernaryTree::insert(std::int32_t root, const std::uint8_t* codes, unsigned len,
                                 std::int32_t list) {
  // Iterative walk/extend along codes[0..len). Links are addressed as
  // (parent, selector) because node allocation can reallocate nodes_.
  std::int32_t parent = -1;
  int selector = 0;  // 0 = root, 1 = lo, 2 = eq, 3 = hi
  std::int32_t cur = root;
  unsigned pos = 0;
  while (true) {
    if (cur == -1) {
      nodes_.push_back(Node{codes[pos], -1, -1, -1, -1});
      cur = static_cast<std::int32_t>(nodes_.size() - 1);
      if (parent == -1) {
        root = cur;
      } else {
        Node& p = nodes_[static_cast<std::size_t>(parent)];
        (selector == 1 ? p.lo : selector == 2 ? p.eq : p.hi) = cur;
      }
    }
    Node& n = nodes_[static_cast<std::size_t>(cur)];
    const std::uint8_t c = codes[pos];
    if (c < n.split) {
      parent = cur;
      selector = 1;
      cur = n.lo;
    } else if (c > n.split) {
      parent = cur;
      selector = 3;
      cur = n.hi;
    } else {
      if (pos + 1 == len) {
        n.list = list;
        return root;
      }
      parent = cur;
      selector = 2;
      cur = n.eq;
      ++pos;
    }
  }
}

std::vector<std::span<const TaxId>> TernaryTree::lookup(Kmer128 query) const {
  std::vector<std::span<const TaxId>> hits(levels_.size());
  if (levels_.empty()) return hits;
  const unsigned k_max = levels_.front();
  std::int32_t node = root_;
  unsigned pos = 0;
  while (node != -1 && pos < k_max) {
    const Node& n = nodes_[static_cast<std::size_t>(node)];
    const std::uint8_t c = base_code_at(query, pos);
    if (c < n.split) {
      node = n.lo;
    } else if (c > n.split) {
      node = n.hi;
    } else {
      ++pos;
      if (n.list != -1) {
        for (std::size_t li = 0; li < levels_.size(); ++li) {
          if (levels_[li] == pos) {
            hits[li] = lists_[static_cast<std::size_t>(n.list)];
            break;
          }
        }
      }
      node = n.eq;
    }
  }
  return hits;
}

namespace {

void append_u16(std::string& s, std::uint16_t v) {
  s.push_back(static_cast<char>(v));
  s.push_back(static_cast<char>(v >> 8));
}

void append_u32(std::string& s, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>(v >> (8 * i)));
}

void append_u64(std::string& s, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) s.push_back(static_cast<char>(v >> (8 * i)));
}

void append_record(std::string& s, Kmer128 w) {
  std::uint8_t rec[16];
  store_record(w, rec);
  s.append(reinterpret_cast<const char*>(rec), 16);
}

void append_taxids(std::string& s, const std::vector<TaxId>& taxids) {
  append_u16(s, static_cast<std::uint16_t>(taxids.size()));
  for (const TaxId t : taxids) append_u32(s, t);
}

class StringReader {
 public:
  explicit StringReader(std::string_view s) : s_(s) {}
  std::uint8_t u8() { return static_cast<std::uint8_t>(take(1)[0]); }
  std::uint16_t u16() {
    auto b = take(2);
    return static_cast<std::uint16_t>(static_cast<std::uint8_t>(b[0]) |
                                      (static_cast<std::uint8_t>(b[1]) << 8));
  }
  std::uint32_t u32() {
    auto b = take(4);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<std::uint8_t>(b[i]);
    return v;
  }
  std::uint64_t u64() {
    auto b = take(8);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | static_cast<std::uint8_t>(b[i]);
    return v;
  }
  Kmer128 record() {
    auto b = take(16);
    return load_record(reinterpret_cast<const std::uint8_t*>(b.data()));
  }
  std::string_view take(std::size_t n) {
    if (pos_ + n > s_.size()) raise(Err::parse, "truncated sketch data");
    std::string_view v = s_.substr(pos_, n);
    pos_ += n;
    return v;
  }
  bool done() const { return pos_ == s_.size(); }

 private:
  std::string_view s_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string TernaryTree::serialize() const {
  std::string out;
  out += "MGST";
  append_u16(out, 1);
  append_u16(out, static_cast<std::uint16_t>(levels_.size()));
  for (const unsigned k : levels_) append_u16(out, static_cast<std::uint16_t>(k));
  out.push_back(root_ == -1 ? 0 : 1);

  // Preorder, children in lo/eq/hi order. Unary eq-chains (no siblings, no
  // list) collapse into a skip record with 2-bit packed bases; everything
  // else is one flag byte per node.
  auto is_chain = [&](const Node& n) {
    return n.lo == -1 && n.hi == -1 && n.list == -1 && n.eq != -1;
  };
  auto emit = [&](std::int32_t idx, auto&& self) -> void {
    // Collect a maximal unary run starting here.
    std::vector<std::uint8_t> run;
    while (is_chain(nodes_[static_cast<std::size_t>(idx)]) && run.size() < 255) {
      run.push_back(nodes_[static_cast<std::size_t>(idx)].split);
      idx = nodes_[static_cast<std::size_t>(idx)].eq;
    }
    if (run.size() >= 2) {
      out.push_back(static_cast<char>(0x40));
      out.push_back(static_cast<char>(run.size()));
      std::uint8_t packed = 0;
      for (std::size_t i = 0; i < run.size(); ++i) {
        packed = static_cast<std::uint8_t>((packed << 2) | run[i]);
        if (i % 4 == 3) {
          out.push_back(static_cast<char>(packed));
          packed = 0;
        }
      }
      if (run.size() % 4 != 0)
        out.push_back(static_cast<char>(packed << (2 * (4 - run.size() % 4))));
    } else if (run.size() == 1) {
      // A single chain node costs the same either way; emit it plainly.
      out.push_back(static_cast<char>(0x08 | run[0]));
    }
    const Node& n = nodes_[static_cast<std::size_t>(idx)];
    std::uint8_t flags = n.split & 3;
    if (n.lo != -1) flags |= 0x04;
    if (n.eq != -1) flags |= 0x08;
    if (n.hi != -1) flags |= 0x10;
    if (n.list != -1) flags |= 0x20;
    out.push_back(static_cast<char>(flags));
    if (n.list != -1) append_taxids(out, lists_[static_cast<std::size_t>(n.list)]);
    if (n.lo != -1) self(n.lo, self);
    if (n.eq != -1) self(n.eq, self);
    if (n.hi != -1) self(n.hi, self);
  };
  if (root_ != -1) emit(root_, emit);
  return out;
}

TernaryTree TernaryTree::deserialize(std::string_view bytes) {
  StringReader r(bytes);
  if (r.take(4) != "MGST") raise(Err::parse, "bad ternary tree magic");
  if (r.u16() != 1) raise(Err::parse, "unsupported tree version");
  TernaryTree tree;
  const std::uint16_t n_levels = r.u16();
  for (std::uint16_t i = 0; i < n_levels; ++i) tree.levels_.push_back(r.u16());
  const bool has_root = r.u8() != 0;
  if (!has_root) return tree;

  auto read_node = [&](auto&& self) -> std::int32_t {
    std::uint8_t flags = r.u8();
    std::int32_t head = -1;
    std::int32_t tail = -1;
    if (flags == 0x40) {
      // Skip record: rebuild the unary chain.
      const std::uint8_t len = r.u8();
      const std::size_t packed_bytes = (len + 3) / 4;
      std::vector<std::uint8_t> codes;
      for (std::size_t i = 0; i < packed_bytes; ++i) {
        const std::uint8_t b = r.u8();
        for (int s = 6; s >= 0 && codes.size() < len; s -= 2)
          codes.push_back(static_cast<std::uint8_t>((b >> s) & 3));
      }
      for (const std::uint8_t c : codes) {
        tree.nodes_.push_back(Node{c, -1, -1, -1, -1});
        const auto idx = static_cast<std::int32_t>(tree.nodes_.size() - 1);
        if (tail != -1) tree.nodes_[static_cast<std::size_t>(tail)].eq = idx;
        if (head == -1) head = idx;
        tail = idx;
      }
      flags = r.u8();
    }
    tree.nodes_.push_back(Node{static_cast<std::uint8_t>(flags & 3), -1, -1, -1, -1});
    const auto idx = static_cast<std::int32_t>(tree.nodes_.size() - 1);
    if (tail != -1) tree.nodes_[static_cast<std::size_t>(tail)].eq = idx;
    if (head == -1) head = idx;
    if (flags & 0x20) {
      std::vector<TaxId> taxids(r.u16());
      for (TaxId& t : taxids) t = r.u32();
      tree.lists_.push_back(std::move(taxids));
      tree.nodes_[static_cast<std::size_t>(idx)].list = static_cast<std::int32_t>(tree.lists_.size() - 1);
    }
    if (flags & 0x04) tree.nodes_[static_cast<std::size_t>(idx)].lo = self(self);
    if (flags & 0x08) tree.nodes_[static_cast<std::size_t>(idx)].eq = self(self);
    if (flags & 0x10) tree.nodes_[static_cast<std::size_t>(idx)].hi = self(self);
    return head;
  };
  tree.root_ = read_node(read_node);
  return tree;
}

std::map<TaxId, std::uint32_t> kmax_sketch_sizes(const FlatSketch& flat) {
  std::map<TaxId, std::uint32_t> sizes;
  if (flat.levels.empty()) return sizes;
  for (const SketchEntry& e : flat.levels.front().entries)
    for (const TaxId t : e.taxids) ++sizes[t];
  return sizes;
}

std::string serialize_kmer_db(const SortedKmerDatabase& db) {
  std::string out;
  out += "MGIS";
  append_u16(out, 1);
  append_u16(out, static_cast<std::uint16_t>(db.k));
  append_u64(out, db.records.size());
  for (const Kmer128 km : db.records) append_record(out, km);
  return out;
}

std::string serialize_flat(const FlatSketch& flat) {
  std::vector<std::string> sections;
  for (const SketchLevel& level : flat.levels) {
    std::string s;
    for (const SketchEntry& e : level.entries) {
      append_record(s, e.kmer);
      append_taxids(s, e.taxids);
    }
    sections.push_back(std::move(s));
  }
  std::string out;
  out += "MGSK";
  append_u16(out, 1);
  append_u16(out, static_cast<std::uint16_t>(flat.levels.size()));
  std::uint64_t offset = out.size() + flat.levels.size() * 18;
  for (std::size_t i = 0; i < flat.levels.size(); ++i) {
    append_u16(out, static_cast<std::uint16_t>(flat.levels[i].k));
    append_u64(out, flat.levels[i].entries.size());
    append_u64(out, offset);
    offset += sections[i].size();
  }
  for (const std::string& s : sections) out += s;
  return out;
}

std::string serialize_stream(const StreamSketch& stream) {
  std::string table_section;
  for (const SketchEntry& e : stream.table) {
    append_record(table_section, e.kmer);
    append_taxids(table_section, e.taxids);
  }
  std::vector<std::string> level_sections;
  for (const auto& level : stream.levels) {
    std::string s;
    for (const auto& slot : level.slots) {
      append_u16(s, static_cast<std::uint16_t>(slot.size()));
      for (const TaxId t : slot) append_u32(s, t);
    }
    level_sections.push_back(std::move(s));
  }
  std::string out;
  out += "MGSS";
  append_u16(out, 1);
  append_u16(out, static_cast<std::uint16_t>(stream.k_max));
  append_u16(out, static_cast<std::uint16_t>(stream.levels.size()));
  std::uint64_t offset = out.size() + 16 + stream.levels.size() * 18;
  append_u64(out, stream.table.size());
  append_u64(out, offset);
  offset += table_section.size();
  for (std::size_t i = 0; i < stream.levels.size(); ++i) {
    append_u16(out, static_cast<std::uint16_t>(stream.levels[i].k));
    append_u64(out, stream.levels[i].slots.size());
    append_u64(out, offset);
    offset += level_sections[i].size();
  }
  out += table_section;
  for (const std::string& s : level_sections) out += s;
  return out;
}

LayoutSizes structure_sizes(const FlatSketch& flat, const TernaryTree& tree, const StreamSketch& stream) {
  return LayoutSizes{serialize_flat(flat).size(), serialize_stream(stream).size(),
                     tree.serialize().size()};
}

void write_kmer_db(const fs::path& path, const SortedKmerDatabase& db) {
  io::write_text_file(path, serialize_kmer_db(db));
}

SortedKmerDatabase read_kmer_db(const fs::path& path) {
  const std::string data = io::read_text_file(path);
  StringReader r(data);
  // Header {magic, version, k, count}; records must be strictly increasing.
  if (r.take(4) != "MGIS") raise(Err::parse, path.string() + ": bad database magic");
  if (r.u16() != 1) raise(Err::parse, path.string() + ": unsupported database version");
  SortedKmerDatabase db;
  db.k = r.u16();
  const std::uint64_t count = r.u64();
  db.records.resize(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    db.records[i] = r.record();
    if (i > 0 && !(db.records[i - 1] < db.records[i]))
      raise(Err::unsorted_input, path.string() + ": database records not strictly increasing");
  }
  return db;
}

void write_flat_sketch(const fs::path& path, const FlatSketch& flat) {
  io::write_text_file(path, serialize_flat(flat));
}

FlatSketch read_flat_sketch(const fs::path& path) {
  const std::string data = io::read_text_file(path);
  StringReader r(data);
  if (r.take(4) != "MGSK") raise(Err::parse, path.string() + ": bad sketch magic");
  if (r.u16() != 1) raise(Err::parse, path.string() + ": unsupported sketch version");
  FlatSketch flat;
  const std::uint16_t n_levels = r.u16();
  std::vector<std::uint64_t> counts(n_levels);
  flat.levels.resize(n_levels);
  for (std::uint16_t i = 0; i < n_levels; ++i) {
    flat.levels[i].k = r.u16();
    counts[i] = r.u64();
    r.u64();  // offset; sections follow in order
  }
  for (std::uint16_t i = 0; i < n_levels; ++i) {
    flat.levels[i].entries.resize(counts[i]);
    for (SketchEntry& e : flat.levels[i].entries) {
      e.kmer = r.record();
      e.taxids.resize(r.u16());
      for (TaxId& t : e.taxids) t = r.u32();
    }
  }
  return flat;
}

void write_stream_sketch(const fs::path& path, const StreamSketch& stream) {
  io::write_text_file(path, serialize_stream(stream));
}

StreamSketch read_stream_sketch(const fs::path& path) {
  const std::string data = io::read_text_file(path);
  StringReader r(data);
  if (r.take(4) != "MGSS") raise(Err::parse, path.string() + ": bad sketch magic");
  if (r.u16() != 1) raise(Err::parse, path.string() + ": unsupported sketch version");
  StreamSketch stream;
  stream.k_max = r.u16();
  const std::uint16_t n_levels = r.u16();
  const std::uint64_t table_count = r.u64();
  r.u64();  // table offset
  std::vector<std::uint64_t> slot_counts(n_levels);
  stream.levels.resize(n_levels);
  for (std::uint16_t i = 0; i < n_levels; ++i) {
    stream.levels[i].k = r.u16();
    slot_counts[i] = r.u64();
    r.u64();
  }
  stream.table.resize(table_count);
  for (SketchEntry& e : stream.table) {
    e.kmer = r.record();
    e.taxids.resize(r.u16());
    for (TaxId& t : e.taxids) t = r.u32();
  }
  for (std::uint16_t i = 0; i < n_levels; ++i) {
    stream.levels[i].slots.resize(slot_counts[i]);
    for (auto& slot : stream.levels[i].slots) {
      slot.resize(r.u16());
      for (TaxId& t : slot) t = r.u32();
    }
  }
  return stream;
}

void write_tree(const fs::path& path, const TernaryTree& tree) {
  io::write_text_file(path, tree.serialize());
}

TernaryTree read_tree(const fs::path& path) { return TernaryTree::deserialize(io::read_text_file(path)); }

}  // namespace mgs::db
