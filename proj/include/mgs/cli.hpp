// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "mgs/refdb.hpp"
#include "mgs/ssd_sim.hpp"

namespace mgs::cli {

namespace fs = std::filesystem;

inline constexpr const char* kToolVersion = "0.1.0";

// One manifest per run; the config hash covers every parameter and input that
// affects the data outputs (not timing).
struct RunManifest {
  std::string command;
  std::map<std::string, std::string> parameters;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  std::string tool_version = kToolVersion;
  std::string config_hash;
  std::uint64_t duration_ms = 0;
};

std::uint64_t config_hash(const std::string& command,
                          const std::map<std::string, std::string>& parameters,
                          const std::vector<fs::path>& input_files);
void write_manifest(const fs::path& path, const RunManifest& manifest);
RunManifest read_manifest(const fs::path& path);  // Err::missing_manifest if absent

struct BuildDbOptions {
  fs::path genome_dir;
  fs::path out_dir;
  unsigned k = 60;
  std::vector<unsigned> levels;  // empty = k, k-10, k-20, k-30 (positive only)
  std::size_t sketch_size = 1000;
  unsigned index_k = 31;
  std::uint64_t seed = db::kDefaultSeed;
};

struct AnalyzeOptions {
  fs::path reads;
  fs::path db_dir;
  fs::path out_dir;
  double tau = 0.2;
  std::uint64_t min_count = 1;
  std::uint64_t max_count = 0;  // 0 = unbounded
  std::uint64_t dram_budget = 0;
  std::uint64_t intersect_budget = 1ull << 30;  // internal DRAM for the intersection
  std::size_t buckets = 512;
  unsigned threads = 1;
  unsigned k_override = 0;  // must match the database k when set
  bool keep_intermediates = false;
};

struct SimulateOptions {
  std::string scenario;
  std::string config = "ssd-c";
  sim::Workload workload;
  fs::path out_dir;
};

struct ReportOptions {
  std::vector<fs::path> runs;
  fs::path out_dir;
};

int cmd_build_db(const BuildDbOptions& opts);
int cmd_analyze(const AnalyzeOptions& opts);
int cmd_simulate(const SimulateOptions& opts);
int cmd_report(const ReportOptions& opts);

// Exit-code contract: 0 success, 1 data error, 2 usage error.
int exit_code_for(const Error& error) noexcept;

}  // namespace mgs::cli
