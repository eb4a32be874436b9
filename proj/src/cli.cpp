// SPDX-License-Identifier: Apache-2.0
#include "mgs/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>

#include <json.hpp>

#include "mgs/abundance.hpp"
#include "mgs/io_util.hpp"
#include "mgs/isp_core.hpp"
#include "mgs/query_prep.hpp"

namespace mgs::cli {

namespace {

using nlohmann::json;

class Stopwatch {
 public:
  std::uint64_t elapsed_ms() const {
    const auto now = std::chrono::steady_clock::now();
    return static_cast<std::uint64_t>(
        std::chrono::duration_cast<std::chrono::milliseconds>(now - start_).count());
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string join_levels(const std::vector<unsigned>& levels) {
  std::string s;
  for (const unsigned k : levels) {
    if (!s.empty()) s += ",";
    s += std::to_string(k);
  }
  return s;
}

void finish_manifest(RunManifest& m, const fs::path& out_dir, const Stopwatch& watch,
                     const std::vector<fs::path>& inputs) {
  m.duration_ms = watch.elapsed_ms();
  m.config_hash = io::hex64(config_hash(m.command, m.parameters, inputs));
  write_manifest(out_dir / "manifest.json", m);
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (const char c : s) {
    if (c == '"') out += "\"\"";
    else out += c;
  }
  return out + "\"";
}

}  // namespace

std::uint64_t config_hash(const std::string& command,
                          const std::map<std::string, std::string>& parameters,
                          const std::vector<fs::path>& input_files) {
  std::uint64_t h = io::fnv1a(command);
  for (const auto& [key, value] : parameters) h = io::fnv1a(key + "=" + value + "\n", h);
  for (const fs::path& p : input_files) {
    h = io::fnv1a(p.filename().string(), h);
    h ^= io::fnv1a_file(p);
    h *= 0x100000001b3ull;
  }
  return h;
}

void write_manifest(const fs::path& path, const RunManifest& m) {
  json j;
  j["command"] = m.command;
  j["parameters"] = m.parameters;
  j["inputs"] = m.inputs;
  j["outputs"] = m.outputs;
  j["tool_version"] = m.tool_version;
  j["config_hash"] = m.config_hash;
  j["duration_ms"] = m.duration_ms;
  io::write_text_file(path, j.dump(2) + "\n");
}

RunManifest read_manifest(const fs::path& path) {
  if (!fs::exists(path)) raise(Err::missing_manifest, "no manifest at " + path.string());
  const json j = json::parse(io::read_text_file(path));
  RunManifest m;
  m.command = j.value("command", "");
  if (j.contains("parameters"))
    for (const auto& [key, value] : j["parameters"].items()) m.parameters[key] = value;
  if (j.contains("inputs")) m.inputs = j["inputs"].get<std::vector<std::string>>();
  if (j.contains("outputs")) m.outputs = j["outputs"].get<std::vector<std::string>>();
  m.tool_version = j.value("tool_version", "");
  m.config_hash = j.value("config_hash", "");
  m.duration_ms = j.value("duration_ms", 0ull);
  return m;
}

int exit_code_for(const Error& error) noexcept {
  switch (error.code()) {
    case Err::unknown_scenario:
    case Err::bad_range:
    case Err::bad_threshold:
      return 2;
    default:
      return 1;
  }
}

int cmd_build_db(const BuildDbOptions& opts) {
  Stopwatch watch;

  // Collect <taxid>.fasta inputs up front; an empty directory is an error and
  // must not leave partial outputs behind.
  std::vector<std::pair<TaxId, fs::path>> genome_files;
  if (fs::exists(opts.genome_dir)) {
    for (const auto& entry : fs::directory_iterator(opts.genome_dir)) {
      if (!entry.is_regular_file()) continue;
      const fs::path p = entry.path();
      const std::string ext = p.extension().string();
      if (ext != ".fasta" && ext != ".fa" && ext != ".fna") continue;
      const std::string stem = p.stem().string();
      TaxId taxid = 0;
      try {
        taxid = static_cast<TaxId>(std::stoul(stem));
      } catch (const std::exception&) {
        raise(Err::parse, p.string() + ": genome files must be named <taxid>.fasta");
      }
      if (taxid == kUnclassified) raise(Err::parse, p.string() + ": taxid 0 is reserved");
      genome_files.emplace_back(taxid, p);
    }
  }
  if (genome_files.empty())
    raise(Err::empty_input, "no <taxid>.fasta genomes in " + opts.genome_dir.string());
  std::sort(genome_files.begin(), genome_files.end());

  std::vector<std::pair<TaxId, std::string>> genomes;
  std::vector<fs::path> inputs;
  for (const auto& [taxid, path] : genome_files) {
    std::string joined;
    prep::for_each_sequence(path, [&](std::string_view seq) {
      if (!joined.empty()) joined += "N";  // windows must not span contigs
      joined.append(seq);
    });
    genomes.emplace_back(taxid, std::move(joined));
    inputs.push_back(path);
  }

  std::vector<unsigned> levels = opts.levels;
  if (levels.empty()) {
    for (unsigned step = 0; step <= 30; step += 10)
      if (opts.k > step) levels.push_back(opts.k - step);
  }
  if (levels.front() != opts.k) raise(Err::bad_range, "first sketch level must equal k");

  const db::SortedKmerDatabase kdb = db::build_kmer_db(genomes, opts.k);
  db::SketchParams sp;
  sp.sketch_size = opts.sketch_size;
  sp.k_levels = levels;
  sp.seed = opts.seed;
  const db::FlatSketch flat = db::build_sketches(genomes, sp);
  const db::StreamSketch stream = db::build_stream_sketch(flat);
  const db::TernaryTree tree(flat);

  fs::create_directories(opts.out_dir / "idx");
  db::write_kmer_db(opts.out_dir / "kmers.mgdb", kdb);
  db::write_flat_sketch(opts.out_dir / "sketch_flat.mgsk", flat);
  db::write_stream_sketch(opts.out_dir / "sketch_stream.mgss", stream);
  db::write_tree(opts.out_dir / "sketch_tree.mgst", tree);
  for (const auto& [taxid, seq] : genomes) {
    const abn::SpeciesIndex index = abn::build_species_index(taxid, seq, opts.index_k);
    abn::write_species_index(opts.out_dir / "idx" / (std::to_string(taxid) + ".mgix"), index);
  }
  io::write_text_file(opts.out_dir / "db.info",
                      "k = " + std::to_string(opts.k) + "\nlevels = " + join_levels(levels) +
                          "\nsketch_size = " + std::to_string(opts.sketch_size) +
                          "\nindex_k = " + std::to_string(opts.index_k) +
                          "\nseed = " + std::to_string(opts.seed) + "\n");

  RunManifest m;
  m.command = "build-db";
  m.parameters = {{"k", std::to_string(opts.k)},
                  {"levels", join_levels(levels)},
                  {"sketch_size", std::to_string(opts.sketch_size)},
                  {"index_k", std::to_string(opts.index_k)},
                  {"seed", std::to_string(opts.seed)}};
  for (const fs::path& p : inputs) m.inputs.push_back(p.string());
  m.outputs = {"kmers.mgdb", "sketch_flat.mgsk", "sketch_stream.mgss", "sketch_tree.mgst", "db.info"};
  finish_manifest(m, opts.out_dir, watch, inputs);
  return 0;
}

int cmd_analyze(const AnalyzeOptions& opts) {
  Stopwatch watch;
  fs::create_directories(opts.out_dir);

  const db::SortedKmerDatabase kdb = db::read_kmer_db(opts.db_dir / "kmers.mgdb");
  if (opts.k_override != 0 && opts.k_override != kdb.k)
    raise(Err::k_mismatch, "requested k=" + std::to_string(opts.k_override) +
                               " but the database was built with k=" + std::to_string(kdb.k));
  const db::FlatSketch flat = db::read_flat_sketch(opts.db_dir / "sketch_flat.mgsk");
  const db::StreamSketch stream = db::read_stream_sketch(opts.db_dir / "sketch_stream.mgss");

  const std::vector<std::string> reads = prep::read_sequences(opts.reads);

  prep::PrepareParams pp;
  pp.k = kdb.k;
  pp.target_buckets = opts.buckets;
  pp.min_count = opts.min_count;
  pp.max_count = opts.max_count;
  pp.dram_budget = opts.dram_budget;
  pp.threads = opts.threads;
  pp.spill_dir = opts.out_dir / "spill";
  prep::PrepareStats pstats;
  const prep::QueryKmerSet query = prep::prepare_queries(reads, pp, &pstats);

  isp::Step2Options s2opts;
  s2opts.intersection_budget = opts.intersect_budget;
  const isp::Step2Result step2 = isp::run_step2(query, kdb.records, stream, s2opts);
  const auto sketch_sizes = db::kmax_sketch_sizes(flat);
  const std::set<TaxId> present = isp::call_presence(step2.hits, sketch_sizes, opts.tau);

  // Step 3 on the candidates: merge the per-species indexes, then vote.
  abn::AbundanceProfile profile;
  profile.unclassified = reads.empty() ? 0.0 : 1.0;
  if (!present.empty()) {
    std::vector<abn::SpeciesIndex> indexes;
    for (const TaxId t : present)
      indexes.push_back(abn::read_species_index(opts.db_dir / "idx" / (std::to_string(t) + ".mgix")));
    const abn::UnifiedIndex unified = abn::merge_indexes(indexes);
    profile = abn::estimate_abundance(reads, unified, present, opts.threads);
    if (opts.keep_intermediates) abn::write_unified_index(opts.out_dir / "unified.mgui", unified);
  }

  std::string presence_csv = "taxid\n";
  for (const TaxId t : present) presence_csv += std::to_string(t) + "\n";
  io::write_text_file(opts.out_dir / "presence.csv", presence_csv);

  std::string abundance_csv = "taxid,abundance\n";
  if (!reads.empty()) {
    char buf[64];
    for (const auto& [t, a] : profile.abundance) {
      std::snprintf(buf, sizeof buf, "%u,%.9f\n", t, a);
      abundance_csv += buf;
    }
    std::snprintf(buf, sizeof buf, "0,%.9f\n", profile.unclassified);
    abundance_csv += buf;
  }
  io::write_text_file(opts.out_dir / "abundance.csv", abundance_csv);

  std::string hits_csv = "taxid,k,count\n";
  for (const auto& [t, counts] : step2.hits.counts)
    for (std::size_t li = 0; li < counts.size(); ++li)
      if (counts[li] > 0)
        hits_csv += std::to_string(t) + "," + std::to_string(step2.hits.level_ks[li]) + "," +
                    std::to_string(counts[li]) + "\n";
  io::write_text_file(opts.out_dir / "hits.csv", hits_csv);

  if (opts.keep_intermediates) {
    prep::write_query_set(opts.out_dir / "query_set.mgqs", query);
    prep::write_spill(opts.out_dir / "intersection.mgib", step2.intersection.kmers);
  }
  fs::remove_all(opts.out_dir / "spill");

  RunManifest m;
  m.command = "analyze";
  m.parameters = {{"k", std::to_string(kdb.k)},
                  {"tau", std::to_string(opts.tau)},
                  {"min_count", std::to_string(opts.min_count)},
                  {"max_count", std::to_string(opts.max_count)},
                  {"dram_budget", std::to_string(opts.dram_budget)},
                  {"buckets", std::to_string(opts.buckets)},
                  {"extracted", std::to_string(pstats.extracted)},
                  {"kept", std::to_string(pstats.kept)},
                  {"intersection", std::to_string(step2.intersection.kmers.size())}};
  m.inputs = {opts.reads.string(), (opts.db_dir / "kmers.mgdb").string()};
  m.outputs = {"presence.csv", "abundance.csv", "hits.csv"};
  finish_manifest(m, opts.out_dir, watch, {opts.reads, opts.db_dir / "kmers.mgdb"});
  return 0;
}

int cmd_simulate(const SimulateOptions& opts) {
  Stopwatch watch;
  const sim::SsdConfig cfg = sim::load_config(opts.config);
  const sim::ExperimentResult result = sim::run_experiment(opts.scenario, cfg, opts.workload);

  fs::create_directories(opts.out_dir);
  sim::write_timeline_csv(opts.out_dir / "timeline.csv", result.events);
  sim::write_summary_csv(opts.out_dir / "summary.csv", result.summary);

  RunManifest m;
  m.command = "simulate";
  m.parameters = {{"scenario", opts.scenario},
                  {"config", opts.config},
                  {"db_bytes", std::to_string(opts.workload.db_bytes)},
                  {"query_bytes", std::to_string(opts.workload.query_bytes)},
                  {"extracted_bytes", std::to_string(opts.workload.extracted_bytes)},
                  {"buckets", std::to_string(opts.workload.buckets)},
                  {"samples", std::to_string(opts.workload.samples)},
                  {"sample_capacity", std::to_string(opts.workload.sample_capacity)},
                  {"sort_bps", std::to_string(opts.workload.sort_bps)}};
  m.outputs = {"timeline.csv", "summary.csv"};
  finish_manifest(m, opts.out_dir, watch, {});
  return 0;
}

int cmd_report(const ReportOptions& opts) {
  Stopwatch watch;
  fs::create_directories(opts.out_dir);

  // One row per run, plus one row per summary line for simulation runs.
  std::string csv = "run,command,scenario,parameter,total_us,speedup_vs_baseline,config_hash,duration_ms\n";
  json summary = json::array();
  for (const fs::path& run : opts.runs) {
    const RunManifest m = read_manifest(run / "manifest.json");
    const std::string scenario =
        m.parameters.count("scenario") ? m.parameters.at("scenario") : "";
    const std::string base = csv_escape(run.string()) + "," + csv_escape(m.command) + "," +
                             csv_escape(scenario) + ",";
    const std::string tail = "," + m.config_hash + "," + std::to_string(m.duration_ms) + "\n";

    bool emitted = false;
    const fs::path summary_csv = run / "summary.csv";
    if (fs::exists(summary_csv)) {
      const std::string rows = io::read_text_file(summary_csv);
      std::size_t pos = rows.find('\n') + 1;
      while (pos < rows.size() && pos != std::string::npos) {
        const std::size_t end = rows.find('\n', pos);
        const std::string line = rows.substr(pos, end - pos);
        // scenario,parameter,total_us,speedup_vs_baseline
        std::vector<std::string> cols;
        std::size_t c = 0;
        while (c <= line.size()) {
          const std::size_t comma = line.find(',', c);
          cols.push_back(line.substr(c, comma - c));
          if (comma == std::string::npos) break;
          c = comma + 1;
        }
        if (cols.size() == 4) {
          csv += base + cols[1] + "," + cols[2] + "," + cols[3] + tail;
          emitted = true;
        }
        if (end == std::string::npos) break;
        pos = end + 1;
      }
    }
    if (!emitted) csv += base + ",," + tail;

    json j;
    j["run"] = run.string();
    j["command"] = m.command;
    j["scenario"] = scenario;
    j["parameters"] = m.parameters;
    j["config_hash"] = m.config_hash;
    j["duration_ms"] = m.duration_ms;
    j["outputs"] = m.outputs;
    summary.push_back(j);
  }
  io::write_text_file(opts.out_dir / "report.csv", csv);
  io::write_text_file(opts.out_dir / "report.json", summary.dump(2) + "\n");

  RunManifest m;
  m.command = "report";
  m.parameters = {{"runs", std::to_string(opts.runs.size())}};
  m.outputs = {"report.csv", "report.json"};
  finish_manifest(m, opts.out_dir, watch, {});
  return 0;
}

}  // namespace mgs::cli
