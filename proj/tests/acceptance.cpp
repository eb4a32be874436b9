// SPDX-License-Identifier: Apache-2.0
//
// Acceptance suite: one pass/fail line per criterion, nonzero exit if any
// fails. Each criterion pins its tolerances in code; the oracles live in
// tests/support and never call the code paths they check.
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "mgs/abundance.hpp"
#include "mgs/cli.hpp"
#include "mgs/io_util.hpp"
#include "mgs/isp_core.hpp"
#include "mgs/query_prep.hpp"
#include "mgs/refdb.hpp"
#include "mgs/ssd_sim.hpp"
#include "support/oracles.hpp"
#include "support/synthetic.hpp"

using namespace mgs;
namespace fs = std::filesystem;

namespace {

struct Criterion {
  int id;
  const char* name;
  bool passed;
  double seconds;
  std::string detail;
};

std::vector<Criterion> g_results;

template <typename Fn>
void run_criterion(int id, const char* name, double budget_seconds, Fn&& fn) {
  const auto start = std::chrono::steady_clock::now();
  bool ok = false;
  std::string detail;
  try {
    detail = fn();
    ok = true;
  } catch (const std::exception& e) {
    detail = e.what();
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (ok && budget_seconds > 0 && secs > budget_seconds) {
    ok = false;
    detail = "exceeded runtime budget of " + std::to_string(budget_seconds) + "s";
  }
  g_results.push_back({id, name, ok, secs, detail});
  std::printf("[%s] criterion %d: %-28s (%.2fs) %s\n", ok ? "PASS" : "FAIL", id, name, secs,
              detail.c_str());
  std::fflush(stdout);
}

void require(bool cond, const std::string& msg) {
  if (!cond) throw std::runtime_error(msg);
}

fs::path work_dir() {
  static const fs::path p = [] {
    fs::path dir = fs::temp_directory_path() / "mgs_acceptance";
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
  }();
  return p;
}

// ---- criterion 1: FTL arithmetic -------------------------------------------

std::string ftl_arithmetic(const fs::path& out) {
  sim::SsdConfig cfg = sim::ssd_c();
  cfg.pages_per_block = 768;  // 12 MiB physical blocks
  require(cfg.block_bytes() == 12ull << 20, "block size must be 12 MiB");

  const std::uint64_t blocks_expected = 349525;
  const std::uint64_t db_bytes = blocks_expected * cfg.block_bytes();  // ~4.0 TB
  const sim::FtlMapping mapping = sim::place_database(db_bytes, cfg);
  require(mapping.block_ids.size() == blocks_expected,
          "block count " + std::to_string(mapping.block_ids.size()));

  const sim::FtlMetadata md = sim::metadata_size(mapping);
  const std::uint64_t l2p_formula = 4 * blocks_expected + 16;
  const std::uint64_t total_formula = 8 * blocks_expected + 16;
  require(md.l2p_bytes == 1398116, "l2p bytes " + std::to_string(md.l2p_bytes));
  require(md.l2p_bytes + 64 >= l2p_formula && md.l2p_bytes <= l2p_formula + 64, "l2p formula drift");
  require(md.total() + 64 >= total_formula && md.total() <= total_formula + 64, "total formula drift");
  require(md.total() < (27ull << 20) / 10, "total metadata above 2.7 MiB");

  char buf[160];
  std::snprintf(buf, sizeof buf, "blocks=%zu l2p=%llu B (~1.3 MB) total=%llu B (~2.6 MB)",
                mapping.block_ids.size(), (unsigned long long)md.l2p_bytes,
                (unsigned long long)md.total());
  io::write_text_file(out / "c1_ftl.txt", std::string(buf) + "\n");
  return buf;
}

// ---- criterion 2: multi-level retrieval equivalence ------------------------

std::string retrieval_equivalence(const fs::path& out) {
  std::mt19937_64 rng(20240901);
  std::size_t checked = 0;
  std::uint64_t hash = 0xcbf29ce484222325ull;
  for (int round = 0; round < 500; ++round) {
    const unsigned k_max = 8 + static_cast<unsigned>(rng() % 9);  // up to 16
    const std::size_t n_levels = 1 + rng() % 4;
    const test::RandomSketchDb data = test::random_sketch_db(rng, k_max, n_levels);
    const db::StreamSketch stream = db::build_stream_sketch(data.flat);
    const db::TernaryTree tree(data.flat);

    const isp::TaxHits got = isp::retrieve_taxids(data.inter, stream);
    const isp::TaxHits flat_oracle = test::oracle_retrieve_flat(data.inter, data.flat);
    const isp::TaxHits tree_oracle =
        test::oracle_retrieve_tree(data.inter, tree, data.flat.levels.front().entries);
    require(got == flat_oracle, "stream != flat oracle at round " + std::to_string(round));
    require(got == tree_oracle, "stream != tree oracle at round " + std::to_string(round));
    ++checked;
    for (const auto& [t, counts] : got.counts)
      for (const std::uint64_t c : counts) hash = io::fnv1a(std::to_string(t) + ":" + std::to_string(c), hash);
  }
  io::write_text_file(out / "c2_retrieval.txt", io::hex64(hash) + "\n");
  return std::to_string(checked) + " randomized databases, three routes identical";
}

// ---- criterion 3: end-to-end ground truth -----------------------------------

std::string end_to_end(const fs::path& out) {
  std::mt19937_64 rng(777);
  double worst_l1 = 0;
  for (int community = 0; community < 20; ++community) {
    const std::size_t n_genomes = 5 + rng() % 16;  // 5..20
    const test::Community c =
        test::make_community(n_genomes, 10000, 100000, 1500 * n_genomes, 150, rng);

    const fs::path root = out / ("c3_community_" + std::to_string(community));
    fs::create_directories(root / "genomes");
    for (const auto& [taxid, g] : c.genomes)
      io::write_text_file(root / "genomes" / (std::to_string(taxid) + ".fasta"),
                          ">g\n" + g + "\n");
    io::write_text_file(root / "reads.fasta", test::to_fasta(c.reads));

    cli::BuildDbOptions b;
    b.genome_dir = root / "genomes";
    b.out_dir = root / "db";
    b.k = 31;
    b.levels = {31, 25, 19};
    b.sketch_size = 400;
    b.index_k = 15;
    require(cli::cmd_build_db(b) == 0, "build-db failed");

    cli::AnalyzeOptions a;
    a.reads = root / "reads.fasta";
    a.db_dir = root / "db";
    a.out_dir = root / "run";
    a.tau = 0.2;
    a.threads = 2;
    require(cli::cmd_analyze(a) == 0, "analyze failed");

    // Presence must match the ground truth exactly.
    std::set<TaxId> truth;
    for (const auto& [taxid, g] : c.genomes) truth.insert(taxid);
    std::set<TaxId> got;
    {
      const std::string csv = io::read_text_file(root / "run" / "presence.csv");
      std::size_t pos = csv.find('\n') + 1;
      while (pos < csv.size()) {
        const std::size_t end = csv.find('\n', pos);
        got.insert(static_cast<TaxId>(std::stoul(csv.substr(pos, end - pos))));
        pos = end + 1;
      }
    }
    require(got == truth, "presence mismatch in community " + std::to_string(community));

    // Abundance within L1 <= 0.05 of the known mixture.
    std::map<TaxId, double> est;
    double unclassified = 0;
    {
      const std::string csv = io::read_text_file(root / "run" / "abundance.csv");
      std::size_t pos = csv.find('\n') + 1;
      while (pos < csv.size()) {
        const std::size_t comma = csv.find(',', pos);
        const std::size_t end = csv.find('\n', pos);
        const TaxId t = static_cast<TaxId>(std::stoul(csv.substr(pos, comma - pos)));
        const double v = std::stod(csv.substr(comma + 1, end - comma - 1));
        if (t == kUnclassified)
          unclassified = v;
        else
          est[t] = v;
        pos = end + 1;
      }
    }
    double l1 = unclassified;
    for (std::size_t i = 0; i < c.genomes.size(); ++i) {
      const TaxId t = c.genomes[i].first;
      l1 += std::abs(c.fractions[i] - (est.count(t) ? est.at(t) : 0.0));
    }
    worst_l1 = std::max(worst_l1, l1);
    require(l1 <= 0.05, "L1 error " + std::to_string(l1) + " in community " + std::to_string(community));
  }
  char buf[96];
  std::snprintf(buf, sizeof buf, "20 communities recovered exactly, worst L1 = %.4f", worst_l1);
  return buf;
}

// ---- criterion 4: intersection kernel ---------------------------------------

std::string intersection_kernel(const fs::path& out) {
  std::mt19937_64 rng(424242);
  // A dense 9-mer space so the intersection is substantial, not vacuous.
  auto make_set = [&](std::size_t n) {
    std::set<Kmer128> s;
    while (s.size() < n) s.insert(test::random_kmer(9, rng));
    return std::vector<Kmer128>(s.begin(), s.end());
  };
  const auto a = make_set(100000);
  const auto b = make_set(100000);

  std::set<Kmer128> bset(b.begin(), b.end());
  std::vector<Kmer128> expected;
  for (const Kmer128 km : a)
    if (bset.count(km)) expected.push_back(km);

  for (const kernels::Isa isa : {kernels::Isa::scalar, kernels::detect_isa()}) {
    isp::IntersectStats stats;
    const auto got = isp::stream_intersect(a, b, &stats, isa);
    require(got == expected, std::string("mismatch on ") + kernels::isa_name(isa));
    require(stats.examined <= a.size() + b.size(),
            "examined " + std::to_string(stats.examined) + " exceeds single-pass bound");
  }
  isp::IntersectStats stats;
  (void)isp::stream_intersect(a, b, &stats, kernels::Isa::scalar);
  prep::write_spill(out / "c4_intersection.bin", expected);
  char buf[96];
  std::snprintf(buf, sizeof buf, "|A|=|B|=100000, matches=%zu, examined=%llu <= 200000",
                expected.size(), (unsigned long long)stats.examined);
  return buf;
}

// ---- criterion 5: overlap benefit -------------------------------------------

std::string overlap_benefit(const fs::path& out) {
  // Sort and in-storage rates of comparable magnitude, 128 buckets.
  const sim::SsdConfig cfg = sim::ssd_p();
  sim::Workload w;
  w.db_bytes = 100ull << 30;
  w.extracted_bytes = 6ull << 30;
  w.query_bytes = 6ull << 30;
  w.buckets = 128;
  w.sort_bps = 1e9;

  const sim::ExperimentResult r = sim::run_experiment("overlap", cfg, w);
  require(r.summary.size() == 2, "expected two summary rows");
  const double serialized = r.summary[0].total_us;
  const double overlapped = r.summary[1].total_us;
  require(overlapped <= serialized, "overlap slower than serial");
  const double reduction = 1.0 - overlapped / serialized;
  require(reduction >= 0.20, "reduction " + std::to_string(reduction) + " below 20%");

  // Dominance on 1000 randomized workloads, zero violations.
  std::mt19937_64 rng(5150);
  for (int round = 0; round < 1000; ++round) {
    const std::size_t n = 1 + rng() % 64;
    sim::StageDurations st;
    for (std::size_t i = 0; i < n; ++i) {
      st.sort_us.push_back(double(rng() % 100000) / 10.0);
      st.transfer_us.push_back(double(rng() % 100000) / 10.0);
      st.intersect_us.push_back(double(rng() % 100000) / 10.0);
    }
    const double s = sim::sim_pipeline_stages(st, false).total_us;
    const double p = sim::sim_pipeline_stages(st, true).total_us;
    require(p <= s + 1e-6, "dominance violated at round " + std::to_string(round));
  }

  sim::write_summary_csv(out / "c5_overlap.csv", r.summary);
  char buf[96];
  std::snprintf(buf, sizeof buf, "overlap reduces total time by %.1f%%; 1000/1000 dominance",
                reduction * 100.0);
  return buf;
}

// ---- criterion 6: internal-bandwidth scaling --------------------------------

std::string channel_scaling(const fs::path& out) {
  sim::SsdConfig cfg = sim::ssd_c();
  const std::uint64_t bytes = 2ull << 30;
  std::string csv = "channels,throughput_bps\n";
  double base_tp = 0;
  for (const std::uint32_t ch : {4u, 8u, 16u, 32u}) {
    cfg.channels = ch;
    const sim::SeqReadResult r = sim::sim_sequential_read(bytes, cfg);
    const double tp = r.throughput_bps();
    require(tp <= ch * cfg.channel_rate_bps * 1.0000001, "throughput above the channel ceiling");
    if (base_tp == 0) base_tp = tp;
    const double linear = base_tp * ch / 4.0;
    require(std::abs(tp - linear) / linear <= 0.05,
            "non-linear at " + std::to_string(ch) + " channels");
    csv += std::to_string(ch) + "," + std::to_string(tp) + "\n";
  }
  io::write_text_file(out / "c6_channels.csv", csv);
  return "throughput linear in channels {4,8,16,32} within 5%, capped by channel rate";
}

// ---- criterion 7: multi-sample byte accounting ------------------------------

std::string multi_sample(const fs::path& out) {
  const sim::PipelineRates rates{1e9, 8e9, 19.2e9};
  const std::uint64_t db = 100ull << 30;
  std::string csv = "samples,db_bytes_read,speedup\n";
  double prev = 0;
  for (std::uint32_t s = 1; s <= 16; ++s) {
    const sim::MultiSampleResult r = sim::sim_multi_sample(s, 16, db, 6ull << 30, rates);
    require(r.db_bytes_read == db, "expected exactly one database pass at S=" + std::to_string(s));
    require(r.baseline_bytes_read == std::uint64_t(s) * db, "baseline byte accounting");
    require(r.speedup() >= prev - 1e-12, "speedup not monotone at S=" + std::to_string(s));
    prev = r.speedup();
    csv += std::to_string(s) + "," + std::to_string(r.db_bytes_read) + "," +
           std::to_string(r.speedup()) + "\n";
  }
  io::write_text_file(out / "c7_multi_sample.csv", csv);
  char buf[96];
  std::snprintf(buf, sizeof buf, "one DB pass for all S in 1..16; speedup rises to %.2fx", prev);
  return buf;
}

// ---- criterion 8: structure-size ordering -----------------------------------

std::string structure_sizes(const fs::path& out) {
  std::mt19937_64 rng(31337);
  std::vector<std::pair<TaxId, std::string>> genomes;
  for (TaxId t = 1; t <= 50; ++t) genomes.emplace_back(t, test::random_genome(40000, rng));

  db::SketchParams params;
  params.k_levels = {32, 24, 16, 8};
  params.sketch_size = 2000;
  const db::FlatSketch flat = db::build_sketches(genomes, params);
  const std::size_t entries = flat.levels.front().entries.size();
  require(entries >= 100000, "generated only " + std::to_string(entries) + " entries");

  const db::StreamSketch stream = db::build_stream_sketch(flat);
  const db::TernaryTree tree(flat);
  const db::LayoutSizes sizes = db::structure_sizes(flat, tree, stream);

  require(sizes.flat > sizes.stream, "flat <= streamed tables");
  require(sizes.stream > sizes.tree, "streamed tables <= tree");

  char buf[160];
  std::snprintf(buf, sizeof buf, "%zu entries: flat=%llu > stream=%llu > tree=%llu bytes", entries,
                (unsigned long long)sizes.flat, (unsigned long long)sizes.stream,
                (unsigned long long)sizes.tree);
  io::write_text_file(out / "c8_sizes.csv",
                      "layout,bytes\nflat," + std::to_string(sizes.flat) + "\nstream," +
                          std::to_string(sizes.stream) + "\ntree," + std::to_string(sizes.tree) + "\n");
  return buf;
}

// ---- criterion 9: determinism ------------------------------------------------

std::string determinism() {
  // Re-run the file-producing criteria with identical seeds in two sandboxes
  // and compare every output byte for byte.
  const fs::path a = work_dir() / "pass_a";
  const fs::path b = work_dir() / "pass_b";
  for (const fs::path& dir : {a, b}) {
    fs::create_directories(dir);
    (void)ftl_arithmetic(dir);
    (void)retrieval_equivalence(dir);
    (void)end_to_end(dir);
    (void)intersection_kernel(dir);
    (void)overlap_benefit(dir);
    (void)channel_scaling(dir);
    (void)multi_sample(dir);
    (void)structure_sizes(dir);
  }

  // Compare everything except manifests (they record wall-clock duration).
  std::size_t compared = 0;
  for (const auto& entry : fs::recursive_directory_iterator(a)) {
    if (!entry.is_regular_file()) continue;
    if (entry.path().filename() == "manifest.json") continue;
    const fs::path rel = fs::relative(entry.path(), a);
    require(fs::exists(b / rel), "missing twin for " + rel.string());
    require(io::fnv1a_file(entry.path()) == io::fnv1a_file(b / rel),
            "hash mismatch on " + rel.string());
    ++compared;
  }
  require(compared > 100, "too few files compared");
  return std::to_string(compared) + " output files byte-identical across reruns";
}

}  // namespace

int main() {
  const fs::path out = work_dir() / "main";
  fs::create_directories(out);

  run_criterion(1, "ftl-arithmetic", 1, [&] { return ftl_arithmetic(out); });
  run_criterion(2, "multi-level-retrieval", 60, [&] { return retrieval_equivalence(out); });
  run_criterion(3, "end-to-end-recovery", 300, [&] { return end_to_end(out); });
  run_criterion(4, "intersection-kernel", 10, [&] { return intersection_kernel(out); });
  run_criterion(5, "overlap-benefit", 30, [&] { return overlap_benefit(out); });
  run_criterion(6, "channel-scaling", 10, [&] { return channel_scaling(out); });
  run_criterion(7, "multi-sample-streaming", 10, [&] { return multi_sample(out); });
  run_criterion(8, "structure-size-ordering", 30, [&] { return structure_sizes(out); });
  run_criterion(9, "determinism", 0, [&] { return determinism(); });

  int failures = 0;
  for (const Criterion& c : g_results)
    if (!c.passed) ++failures;
  std::printf("%d/9 criteria passed\n", 9 - failures);
  return failures == 0 ? 0 : 1;
}
