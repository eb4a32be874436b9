// SPDX-License-Identifier: Apache-2.0
//
// Independent oracle implementations used by the unit and acceptance suites.
// They recompute the spec'd semantics with naive code paths (binary searches,
// nested loops, tree walks) and never call the streaming implementations they
// check.
#pragma once

#include <algorithm>
#include <map>
#include <random>
#include <set>
#include <vector>

#include "mgs/encoding.hpp"
#include "mgs/isp_core.hpp"
#include "mgs/refdb.hpp"
#include "support/synthetic.hpp"

namespace mgs::test {

// Inclusive upper end of the word range sharing the k-base prefix of x.
inline Kmer128 prefix_end(Kmer128 x, unsigned k) {
  const unsigned bits = 2 * k;
  if (bits >= 128) return x;
  if (bits <= 64) return {x.hi | (bits == 64 ? 0 : (~0ull >> bits)), ~0ull};
  return {x.hi, x.lo | (~0ull >> (bits - 64))};
}

inline std::vector<TaxId> set_minus(std::vector<TaxId> a, const std::set<TaxId>& b) {
  std::erase_if(a, [&](TaxId t) { return b.count(t) != 0; });
  return a;
}

// Attribution oracle over the flat tables: per level, a slot (distinct
// k-prefix of the k_max table) matched by any intersecting k-mer charges the
// taxids not already attributed at a longer level for that prefix.
inline isp::TaxHits oracle_retrieve_flat(std::span<const Kmer128> inter, const db::FlatSketch& flat) {
  isp::TaxHits hits;
  for (const auto& level : flat.levels) hits.level_ks.push_back(level.k);
  if (flat.levels.empty()) return hits;
  const auto& table = flat.levels.front().entries;

  auto charge = [&](TaxId t, std::size_t level_idx) {
    auto& counts = hits.counts[t];
    if (counts.empty()) counts.assign(hits.level_ks.size(), 0);
    ++counts[level_idx];
  };

  // k_max: exact matches.
  for (const Kmer128 q : inter) {
    const auto it = std::lower_bound(table.begin(), table.end(), q,
                                     [](const db::SketchEntry& e, Kmer128 v) { return e.kmer < v; });
    if (it != table.end() && it->kmer == q)
      for (const TaxId t : it->taxids) charge(t, 0);
  }

  // Smaller levels: walk the table's distinct k-prefix slots.
  for (std::size_t li = 1; li < flat.levels.size(); ++li) {
    const unsigned k = flat.levels[li].k;
    const auto& flat_entries = flat.levels[li].entries;
    std::size_t i = 0;
    while (i < table.size()) {
      const Kmer128 x = prefix_word(table[i].kmer, k);
      std::size_t j = i;
      while (j < table.size() && prefix_word(table[j].kmer, k) == x) ++j;

      bool matched = false;
      for (const Kmer128 q : inter)
        if (prefix_word(q, k) == x) {
          matched = true;
          break;
        }
      if (matched) {
        std::set<TaxId> attributed;
        for (std::size_t e = i; e < j; ++e)
          attributed.insert(table[e].taxids.begin(), table[e].taxids.end());
        for (std::size_t lj = 1; lj < li; ++lj) {
          const unsigned kj = flat.levels[lj].k;
          const auto& ej = flat.levels[lj].entries;
          for (std::size_t e = i; e < j; ++e) {
            const Kmer128 p = prefix_word(table[e].kmer, kj);
            const auto it = std::lower_bound(ej.begin(), ej.end(), p,
                                             [](const db::SketchEntry& a, Kmer128 v) { return a.kmer < v; });
            if (it != ej.end() && it->kmer == p) attributed.insert(it->taxids.begin(), it->taxids.end());
          }
        }
        const auto it = std::lower_bound(flat_entries.begin(), flat_entries.end(), x,
                                         [](const db::SketchEntry& a, Kmer128 v) { return a.kmer < v; });
        if (it != flat_entries.end() && it->kmer == x)
          for (const TaxId t : set_minus(it->taxids, attributed)) charge(t, li);
      }
      i = j;
    }
  }
  return hits;
}

// Same attribution computed through ternary-tree traversals: every taxid list
// is fetched with TernaryTree::lookup, never from the flat tables.
inline isp::TaxHits oracle_retrieve_tree(std::span<const Kmer128> inter, const db::TernaryTree& tree,
                                         const std::vector<db::SketchEntry>& table) {
  isp::TaxHits hits;
  hits.level_ks = tree.levels();
  if (hits.level_ks.empty()) return hits;
  const unsigned k_max = hits.level_ks.front();

  auto charge = [&](TaxId t, std::size_t level_idx) {
    auto& counts = hits.counts[t];
    if (counts.empty()) counts.assign(hits.level_ks.size(), 0);
    ++counts[level_idx];
  };

  for (const Kmer128 q : inter) {
    const auto lists = tree.lookup(q);
    for (const TaxId t : lists[0]) charge(t, 0);  // exact k_max terminal
  }

  for (std::size_t li = 1; li < hits.level_ks.size(); ++li) {
    const unsigned k = hits.level_ks[li];
    std::size_t i = 0;
    while (i < table.size()) {
      const Kmer128 x = prefix_word(table[i].kmer, k);
      std::size_t j = i;
      while (j < table.size() && prefix_word(table[j].kmer, k) == x) ++j;

      bool matched = false;
      for (const Kmer128 q : inter)
        if (prefix_word(q, k) == x) {
          matched = true;
          break;
        }
      if (matched) {
        // The slot list comes off any table entry's traversal at this level;
        // the subtraction set is everything deeper on the subtree's chains.
        std::set<TaxId> attributed;
        std::vector<TaxId> slot_list;
        for (std::size_t e = i; e < j; ++e) {
          const auto lists = tree.lookup(table[e].kmer);
          for (std::size_t lj = 0; lj < li; ++lj)
            attributed.insert(lists[lj].begin(), lists[lj].end());
          if (slot_list.empty() && !lists[li].empty())
            slot_list.assign(lists[li].begin(), lists[li].end());
        }
        for (const TaxId t : set_minus(slot_list, attributed)) charge(t, li);
      }
      i = j;
    }
  }
  return hits;
}

// Randomized prefix-closed sketch database plus a matching intersection set.
struct RandomSketchDb {
  db::FlatSketch flat;
  std::vector<Kmer128> inter;
};

inline RandomSketchDb random_sketch_db(std::mt19937_64& rng, unsigned k_max, std::size_t n_levels) {
  RandomSketchDb out;
  std::uniform_int_distribution<std::size_t> entry_count(3, 40);
  std::uniform_int_distribution<TaxId> taxid(1, 12);
  std::uniform_int_distribution<std::size_t> list_len(1, 4);

  // k_max table: random sorted unique k-mers with random taxid lists.
  std::set<Kmer128> kmers;
  const std::size_t n = entry_count(rng);
  while (kmers.size() < n) kmers.insert(random_kmer(k_max, rng));
  db::SketchLevel top;
  top.k = k_max;
  for (const Kmer128 km : kmers) {
    db::SketchEntry e;
    e.kmer = km;
    std::set<TaxId> ts;
    const std::size_t len = list_len(rng);
    while (ts.size() < len) ts.insert(taxid(rng));
    e.taxids.assign(ts.begin(), ts.end());
    top.entries.push_back(std::move(e));
  }
  out.flat.levels.push_back(std::move(top));

  // Smaller levels: subsets of the table's distinct prefixes (closure holds
  // by construction).
  std::vector<unsigned> ks;
  unsigned k = k_max;
  for (std::size_t li = 1; li < n_levels && k > 2; ++li) {
    k = k - 1 - static_cast<unsigned>(rng() % 3);
    if (k < 1) break;
    ks.push_back(k);
  }
  for (const unsigned kl : ks) {
    std::set<Kmer128> prefixes;
    for (const auto& e : out.flat.levels.front().entries) prefixes.insert(prefix_word(e.kmer, kl));
    db::SketchLevel level;
    level.k = kl;
    for (const Kmer128 p : prefixes) {
      if (rng() % 3 == 0) continue;  // leave some prefixes unsketched
      db::SketchEntry e;
      e.kmer = p;
      std::set<TaxId> ts;
      const std::size_t len = list_len(rng);
      while (ts.size() < len) ts.insert(taxid(rng));
      e.taxids.assign(ts.begin(), ts.end());
      level.entries.push_back(std::move(e));
    }
    if (!level.entries.empty()) out.flat.levels.push_back(std::move(level));
  }

  // Intersection: a blend of exact entries, prefix-sharing neighbours, and
  // random misses.
  std::set<Kmer128> inter;
  for (const auto& e : out.flat.levels.front().entries) {
    if (rng() % 2 == 0) inter.insert(e.kmer);
    if (rng() % 3 == 0) {
      // A sibling sharing a prefix: keep the first k_max - flip bases, fill
      // the rest from a random k-mer.
      const unsigned flip = 1 + static_cast<unsigned>(rng() % k_max);
      const Kmer128 keep = prefix_word(e.kmer, k_max - flip);
      const Kmer128 end = prefix_end(keep, k_max - flip);
      const Kmer128 rnd = random_kmer(k_max, rng);
      Kmer128 sibling;
      sibling.hi = keep.hi | (rnd.hi & (end.hi ^ keep.hi));
      sibling.lo = keep.lo | (rnd.lo & (end.lo ^ keep.lo));
      inter.insert(sibling);
    }
  }
  for (int i = 0; i < 5; ++i) inter.insert(random_kmer(k_max, rng));
  out.inter.assign(inter.begin(), inter.end());
  return out;
}

}  // namespace mgs::test
