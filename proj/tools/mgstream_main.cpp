// SPDX-License-Identifier: Apache-2.0
//
// mgstream: sorted-stream metagenomic analysis toolkit with an SSD
// in-storage-processing simulator. Subcommands: build-db, analyze, simulate,
// report.
#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mgs/cli.hpp"
#include "mgs/kernels.hpp"

namespace {

std::vector<unsigned> parse_levels(const std::string& csv) {
  std::vector<unsigned> levels;
  std::size_t pos = 0;
  while (pos < csv.size()) {
    const std::size_t comma = csv.find(',', pos);
    const std::string tok = csv.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    if (!tok.empty()) levels.push_back(static_cast<unsigned>(std::stoul(tok)));
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return levels;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mgstream: streaming metagenomic analysis + SSD pipeline simulator"};
  app.set_version_flag("--version", mgs::cli::kToolVersion);
  app.require_subcommand(1);

  bool no_simd = false;
  app.add_flag("--no-simd", no_simd, "Force the scalar reference kernels");

  mgs::cli::BuildDbOptions build;
  std::string build_levels;
  auto* cmd_build = app.add_subcommand("build-db", "Build the k-mer database, sketches, and indexes");
  cmd_build->add_option("--genomes", build.genome_dir, "Directory of <taxid>.fasta genomes")->required();
  cmd_build->add_option("--out", build.out_dir, "Output database directory")->required();
  cmd_build->add_option("--k", build.k, "Database k-mer length (<= 60)")->default_val(60);
  cmd_build->add_option("--levels", build_levels, "Sketch levels, e.g. 60,50,40,30");
  cmd_build->add_option("--sketch-size", build.sketch_size, "Bottom-s sketch size per taxid")->default_val(1000);
  cmd_build->add_option("--index-k", build.index_k, "Per-species mapping index k")->default_val(31);
  cmd_build->add_option("--seed", build.seed, "Sketch hash seed");

  mgs::cli::AnalyzeOptions analyze;
  auto* cmd_analyze = app.add_subcommand("analyze", "Run the full pipeline on a read set");
  cmd_analyze->add_option("--reads", analyze.reads, "FASTA/FASTQ read file")->required();
  cmd_analyze->add_option("--db", analyze.db_dir, "Database directory from build-db")->required();
  cmd_analyze->add_option("--out", analyze.out_dir, "Output directory")->required();
  cmd_analyze->add_option("--tau", analyze.tau, "Presence containment threshold")->default_val(0.2);
  cmd_analyze->add_option("--min-count", analyze.min_count, "Minimum k-mer frequency kept")->default_val(1);
  cmd_analyze->add_option("--max-count", analyze.max_count, "Maximum k-mer frequency kept (0 = unbounded)")
      ->default_val(0);
  cmd_analyze->add_option("--dram-budget", analyze.dram_budget, "Host DRAM budget in bytes (0 = unlimited)")
      ->default_val(0);
  cmd_analyze->add_option("--intersect-budget", analyze.intersect_budget,
                          "Intersection memory budget in bytes before partial retrieval");
  cmd_analyze->add_option("--buckets", analyze.buckets, "Bucket count")->default_val(512);
  cmd_analyze->add_option("--threads", analyze.threads, "Worker thread cap")->default_val(1);
  cmd_analyze->add_option("--k", analyze.k_override, "Expected k (must match the database)");
  cmd_analyze->add_flag("--keep-intermediates", analyze.keep_intermediates,
                        "Keep the query set and intersection files");

  mgs::cli::SimulateOptions simulate;
  auto* cmd_simulate = app.add_subcommand("simulate", "Run an SSD pipeline scenario sweep");
  cmd_simulate
      ->add_option("--scenario", simulate.scenario,
                   "overlap | db_size | channels | ssd_count | host_dram | multi_sample")
      ->required();
  cmd_simulate->add_option("--config", simulate.config, "ssd-c, ssd-p, or a key=value file")
      ->default_val("ssd-c");
  cmd_simulate->add_option("--out", simulate.out_dir, "Output directory")->required();
  cmd_simulate->add_option("--db-bytes", simulate.workload.db_bytes, "Database size in bytes");
  cmd_simulate->add_option("--query-bytes", simulate.workload.query_bytes, "Selected query k-mer bytes");
  cmd_simulate->add_option("--extracted-bytes", simulate.workload.extracted_bytes,
                           "Raw extracted k-mer bytes");
  cmd_simulate->add_option("--sample-bytes", simulate.workload.sample_bytes, "Per-sample k-mer bytes");
  cmd_simulate->add_option("--buckets", simulate.workload.buckets, "Bucket count");
  cmd_simulate->add_option("--samples", simulate.workload.samples, "Sample count for multi_sample");
  cmd_simulate->add_option("--sample-capacity", simulate.workload.sample_capacity,
                           "Samples the host buffer can hold");
  cmd_simulate->add_option("--sort-rate", simulate.workload.sort_bps, "Host sort rate in bytes/s");
  cmd_simulate->add_option("--host-dram", simulate.workload.host_dram, "Host DRAM bytes");

  mgs::cli::ReportOptions report;
  auto* cmd_report = app.add_subcommand("report", "Consolidate run manifests into one table");
  cmd_report->add_option("--runs", report.runs, "Run directories")->required()->expected(-1);
  cmd_report->add_option("--out", report.out_dir, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (no_simd) mgs::kernels::set_isa(mgs::kernels::Isa::scalar);

  try {
    if (cmd_build->parsed()) {
      if (!build_levels.empty()) build.levels = parse_levels(build_levels);
      return mgs::cli::cmd_build_db(build);
    }
    if (cmd_analyze->parsed()) return mgs::cli::cmd_analyze(analyze);
    if (cmd_simulate->parsed()) return mgs::cli::cmd_simulate(simulate);
    if (cmd_report->parsed()) return mgs::cli::cmd_report(report);
  } catch (const mgs::Error& e) {
    std::fprintf(stderr, "mgstream: %s\n", e.what());
    return mgs::cli::exit_code_for(e);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "mgstream: %s\n", e.what());
    return 1;
  }
  return 2;
}
