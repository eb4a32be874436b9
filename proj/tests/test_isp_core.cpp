// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>

#include "mgs/isp_core.hpp"
#include "mgs/ssd_sim.hpp"
#include "support/oracles.hpp"
#include "support/synthetic.hpp"

using namespace mgs;

namespace {

std::vector<Kmer128> sorted_unique(std::vector<Kmer128> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

std::vector<Kmer128> random_set(std::size_t n, unsigned k, std::mt19937_64& rng) {
  std::vector<Kmer128> v;
  v.reserve(n);
  for (std::size_t i = 0; i < n; ++i) v.push_back(test::random_kmer(k, rng));
  return sorted_unique(v);
}

}  // namespace

TEST_CASE("intersection examples") {
  const std::vector<Kmer128> q = sorted_unique(
      {pack_kmer("AAC").word, pack_kmer("GGT").word, pack_kmer("TTA").word});
  const std::vector<Kmer128> d = sorted_unique(
      {pack_kmer("AAC").word, pack_kmer("CCC").word, pack_kmer("GGT").word});
  CHECK(isp::stream_intersect(q, d) ==
        std::vector<Kmer128>{pack_kmer("AAC").word, pack_kmer("GGT").word});

  const std::vector<Kmer128> disjoint = {pack_kmer("CCA").word};
  CHECK(isp::stream_intersect(disjoint, d).empty());
  CHECK(isp::stream_intersect({}, d).empty());
  CHECK(isp::stream_intersect(q, {}).empty());
}

TEST_CASE("intersection equals the hash-set oracle with single-pass examination") {
  std::mt19937_64 rng(139);
  for (const kernels::Isa isa : {kernels::Isa::scalar, kernels::detect_isa()}) {
    const auto q = random_set(100000, 14, rng);
    const auto d = random_set(100000, 14, rng);

    std::set<Kmer128> dset(d.begin(), d.end());
    std::vector<Kmer128> expected;
    for (const Kmer128 km : q)
      if (dset.count(km)) expected.push_back(km);

    isp::IntersectStats stats;
    const auto got = isp::stream_intersect(q, d, &stats, isa);
    CHECK(got == expected);
    CHECK(stats.examined <= q.size() + d.size());
  }
}

TEST_CASE("intersection detects unsorted input") {
  std::vector<Kmer128> bad = {pack_kmer("GGT").word, pack_kmer("AAC").word};
  const std::vector<Kmer128> d = {pack_kmer("AAC").word, pack_kmer("GGT").word};
  CHECK_THROWS_AS((void)isp::stream_intersect(bad, d), Error);
  // An inversion on the database side is caught once the cursor crosses it.
  const std::vector<Kmer128> probe = {pack_kmer("AAC").word, pack_kmer("TTA").word};
  CHECK_THROWS_AS((void)isp::stream_intersect(probe, bad), Error);
  // Duplicates violate strict monotonicity too.
  std::vector<Kmer128> dup = {pack_kmer("AAC").word, pack_kmer("AAC").word};
  CHECK_THROWS_AS((void)isp::stream_intersect(dup, d), Error);
}

TEST_CASE("batch splits never change the intersection") {
  std::mt19937_64 rng(149);
  const auto q = random_set(5000, 12, rng);
  const auto d = random_set(4000, 12, rng);
  const auto whole = isp::stream_intersect(q, d);

  for (int round = 0; round < 30; ++round) {
    isp::Intersector ix(d);
    std::vector<Kmer128> out;
    std::size_t i = 0;
    while (i < q.size()) {
      const std::size_t len = std::min<std::size_t>(q.size() - i, 1 + rng() % 700);
      ix.feed(std::span<const Kmer128>(q.data() + i, len), out);
      i += len;
    }
    CHECK(out == whole);
  }
}

TEST_CASE("retrieval on the worked toy") {
  db::FlatSketch flat;
  flat.levels.push_back({5, {{pack_kmer("AATCC").word, {2}}}});
  flat.levels.push_back({4, {{pack_kmer("AATC").word, {2, 7}}}});
  const db::StreamSketch stream = db::build_stream_sketch(flat);

  const std::vector<Kmer128> inter = {pack_kmer("AATCC").word};
  const isp::TaxHits hits = isp::retrieve_taxids(inter, stream);
  REQUIRE(hits.level_ks == std::vector<unsigned>{5, 4});
  CHECK(hits.counts.at(2) == std::vector<std::uint64_t>{1, 0});
  CHECK(hits.counts.at(7) == std::vector<std::uint64_t>{0, 1});

  CHECK(isp::retrieve_taxids({}, stream).counts.empty());
}

TEST_CASE("a slot whose taxids are all attributed deeper charges nothing") {
  // Two 5-mers sharing the AATC prefix own {2} and {7}; the 4-level list
  // {2, 7} is therefore fully attributed and the slot stays empty, even for
  // a query that matches the prefix but neither entry.
  db::FlatSketch flat;
  flat.levels.push_back({5, {{pack_kmer("AATCA").word, {2}}, {pack_kmer("AATCG").word, {7}}}});
  flat.levels.push_back({4, {{pack_kmer("AATC").word, {2, 7}}}});
  const db::StreamSketch stream = db::build_stream_sketch(flat);
  REQUIRE(stream.levels[0].slots.size() == 1);
  CHECK(stream.levels[0].slots[0].empty());

  const std::vector<Kmer128> inter = {pack_kmer("AATCC").word};
  const isp::TaxHits got = isp::retrieve_taxids(inter, stream);
  CHECK(got.counts.empty());
  CHECK(got == test::oracle_retrieve_flat(inter, flat));
  CHECK(got == test::oracle_retrieve_tree(inter, db::TernaryTree(flat), flat.levels.front().entries));
}

TEST_CASE("retrieval equals the tree and flat oracles on random databases") {
  std::mt19937_64 rng(151);
  for (int round = 0; round < 100; ++round) {
    const test::RandomSketchDb data = test::random_sketch_db(rng, 10 + rng() % 6, 1 + rng() % 4);
    const db::StreamSketch stream = db::build_stream_sketch(data.flat);
    const db::TernaryTree tree(data.flat);

    const isp::TaxHits got = isp::retrieve_taxids(data.inter, stream);
    const isp::TaxHits flat_oracle = test::oracle_retrieve_flat(data.inter, data.flat);
    const isp::TaxHits tree_oracle =
        test::oracle_retrieve_tree(data.inter, tree, data.flat.levels.front().entries);
    CHECK(got == flat_oracle);
    CHECK(got == tree_oracle);
  }
}

TEST_CASE("retrieval cursors only move forward") {
  std::mt19937_64 rng(157);
  const test::RandomSketchDb data = test::random_sketch_db(rng, 12, 3);
  const db::StreamSketch stream = db::build_stream_sketch(data.flat);

  isp::StreamRetriever r(stream);
  isp::StreamRetriever::CursorTrace trace;
  r.set_trace(&trace);
  r.feed(data.inter);
  (void)r.finish();
  for (const auto& level : trace.positions) {
    for (std::size_t i = 1; i < level.size(); ++i) CHECK(level[i - 1] <= level[i]);
  }
}

TEST_CASE("chunked retrieval equals one-shot retrieval") {
  std::mt19937_64 rng(163);
  for (int round = 0; round < 30; ++round) {
    const test::RandomSketchDb data = test::random_sketch_db(rng, 12, 3);
    const db::StreamSketch stream = db::build_stream_sketch(data.flat);
    const isp::TaxHits whole = isp::retrieve_taxids(data.inter, stream);

    isp::StreamRetriever r(stream);
    std::size_t i = 0;
    while (i < data.inter.size()) {
      const std::size_t len = std::min<std::size_t>(data.inter.size() - i, 1 + rng() % 5);
      r.feed(std::span<const Kmer128>(data.inter.data() + i, len));
      i += len;
    }
    CHECK(r.finish() == whole);
  }
}

TEST_CASE("presence thresholding") {
  isp::TaxHits hits;
  hits.level_ks = {10};
  hits.counts[4] = {8};
  const std::map<TaxId, std::uint32_t> sizes = {{4, 8}, {5, 10}};

  CHECK(isp::call_presence(hits, sizes, 1.0) == std::set<TaxId>{4});  // hits == sketch size
  CHECK(isp::call_presence(hits, sizes, 0.2) == std::set<TaxId>{4});
  isp::TaxHits none;
  none.level_ks = {10};
  CHECK(isp::call_presence(none, sizes, 0.2).empty());
  CHECK_THROWS_AS((void)isp::call_presence(hits, sizes, 0.0), Error);
  CHECK_THROWS_AS((void)isp::call_presence(hits, sizes, 1.5), Error);

  // Level weighting: k/k_max scales smaller-level hits.
  isp::TaxHits two;
  two.level_ks = {10, 5};
  two.counts[4] = {0, 8};  // eight half-weight hits = 4 effective
  CHECK(isp::call_presence(two, sizes, 0.5) == std::set<TaxId>{4});
  CHECK(isp::call_presence(two, sizes, 0.6).empty());
}

TEST_CASE("run_step2 flushes partial intersections without changing results") {
  std::mt19937_64 rng(167);
  std::vector<std::string> reads;
  for (int i = 0; i < 100; ++i) reads.push_back(test::random_genome(80, rng));

  prep::PrepareParams pp;
  pp.k = 10;
  pp.target_buckets = 8;
  const prep::QueryKmerSet query = prep::prepare_queries(reads, pp);

  std::vector<std::pair<TaxId, std::string>> genomes = {{1, test::random_genome(600, rng)},
                                                        {2, reads[0] + reads[1]}};
  const db::SortedKmerDatabase kdb = db::build_kmer_db(genomes, 10);
  db::SketchParams sp;
  sp.k_levels = {10, 7};
  sp.sketch_size = 64;
  const db::FlatSketch flat = db::build_sketches(genomes, sp);
  const db::StreamSketch stream = db::build_stream_sketch(flat);

  const isp::Step2Result big = isp::run_step2(query, kdb.records, stream);
  isp::Step2Options tiny;
  tiny.batch_bytes = 64;           // few records per batch
  tiny.intersection_budget = 128;  // flush every 8 records
  const isp::Step2Result small = isp::run_step2(query, kdb.records, stream, tiny);

  CHECK(big.intersection.kmers == small.intersection.kmers);
  CHECK(big.intersection.per_bucket == small.intersection.per_bucket);
  CHECK(big.hits == small.hits);
  CHECK(small.retrieval_flushes > 0);

  // Provenance sums to the intersection size.
  std::uint64_t total = 0;
  for (const std::uint64_t b : big.intersection.per_bucket) total += b;
  CHECK(total == big.intersection.kmers.size());
}

TEST_CASE("striped lanes match the single-stream intersection") {
  std::mt19937_64 rng(173);
  const auto q = random_set(20000, 13, rng);
  const auto d = random_set(30000, 13, rng);
  const auto whole = isp::stream_intersect(q, d);

  sim::SsdConfig cfg = sim::ssd_c();
  cfg.pages_per_block = 4;
  cfg.page_size = 1024;  // 4 KiB blocks -> 256 records per block
  const sim::FtlMapping mapping = sim::place_database(d.size() * sizeof(Kmer128), cfg);

  CHECK(isp::striped_intersect(q, d, mapping, 1) == whole);
  CHECK(isp::striped_intersect(q, d, mapping, 4) == whole);
}
