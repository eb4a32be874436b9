// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mgs/error.hpp"

namespace mgs::sim {

namespace fs = std::filesystem;

// NAND geometry, latencies, and bandwidth hierarchy for one device.
struct SsdConfig {
  std::uint32_t channels = 8;
  std::uint32_t dies_per_channel = 8;
  std::uint32_t planes_per_die = 4;
  std::uint32_t blocks_per_plane = 2048;
  std::uint32_t pages_per_block = 196;  // wordlines
  std::uint64_t page_size = 16384;
  double tR_us = 52.5;
  double tPROG_us = 700.0;
  double channel_rate_bps = 1.2e9;
  double interface_bps = 600e6;
  double internal_dram_bps = 12.8e9;

  std::uint64_t block_bytes() const { return std::uint64_t(pages_per_block) * page_size; }
  std::uint64_t capacity_bytes() const {
    return std::uint64_t(channels) * dies_per_channel * planes_per_die * blocks_per_plane * block_bytes();
  }
  // Pages one die can supply per second via multiplane array reads.
  double die_supply_bps() const { return planes_per_die * double(page_size) / (tR_us * 1e-6); }
  double aggregate_read_bps() const;
  // Program bandwidth across all dies; bounds spill-write ingest.
  double program_bps() const {
    return double(channels) * dies_per_channel * planes_per_die * double(page_size) / (tPROG_us * 1e-6);
  }
};

SsdConfig ssd_c();
SsdConfig ssd_p();

// Preset name ("ssd-c", "ssd-p") or a key=value text file path.
SsdConfig load_config(std::string_view name_or_path);
SsdConfig parse_config(std::string_view text);

// Block-level logical-to-physical placement for one database: blocks strided
// round-robin across channels, equal page offsets per stripe.
struct FtlMapping {
  std::uint64_t start_lpa = 0;
  std::uint64_t start_ppa = 0;
  std::uint64_t size_bytes = 0;
  std::uint64_t block_bytes = 0;
  std::uint32_t channels = 0;
  std::vector<std::uint32_t> block_ids;
  std::vector<std::uint32_t> read_counts;  // per block

  std::uint32_t channel_of(std::size_t i) const { return block_ids[i] % channels; }
};

FtlMapping place_database(std::uint64_t size_bytes, const SsdConfig& cfg);  // Err::capacity_exceeded

struct FtlMetadata {
  std::uint64_t l2p_bytes = 0;      // 4 B per block + 16 B start mapping + size
  std::uint64_t counter_bytes = 0;  // 4 B per block read counters

  std::uint64_t total() const { return l2p_bytes + counter_bytes; }
};

FtlMetadata metadata_size(const FtlMapping& mapping);

// Host command vocabulary; each command costs a fixed latency.
inline constexpr double kCommandLatencyUs = 10.0;
enum class HostCommand { init, step, write };
double command_overhead_us(std::size_t command_count);

struct ChipEvent {
  std::uint32_t channel = 0;
  std::uint32_t die = 0;
  bool transfer = false;  // false = array read occupying the die
  double start_us = 0;
  double end_us = 0;
};

struct SeqReadResult {
  double total_us = 0;
  std::uint64_t bytes = 0;
  std::vector<ChipEvent> events;  // filled only when recording

  double throughput_bps() const { return total_us > 0 ? bytes / (total_us * 1e-6) : 0.0; }
};

// Event-driven sequential read: per channel, die array reads (multiplane)
// pipeline with channel transfers; dies are granted the channel FIFO in die
// order. Returns the completion time of the last page.
SeqReadResult sim_sequential_read(std::uint64_t bytes, const SsdConfig& cfg, bool record_events = false);

enum class Stage { sort, transfer, intersect, retrieve };
const char* stage_name(Stage s) noexcept;

struct Event {
  Stage stage = Stage::sort;
  int bucket = 0;
  double start_us = 0;
  double end_us = 0;
};

struct Timeline {
  std::vector<Event> events;
  double total_us = 0;
  double stage_busy_us[4] = {0, 0, 0, 0};

  double utilization(Stage s) const {
    return total_us > 0 ? stage_busy_us[static_cast<int>(s)] / total_us : 0.0;
  }
};

struct PipelineRates {
  double sort_bps = 1e9;
  double interface_bps = 600e6;
  double isp_bps = 9.6e9;
};

// Host sort -> transfer -> in-storage intersect per bucket. overlap=false
// serializes everything; overlap=true sorts bucket i+1 while bucket i
// transfers/intersects, with transfers double-buffered (at most two buckets
// in flight beyond the intersect stage).
Timeline sim_pipeline(std::span<const std::uint64_t> bucket_bytes, const PipelineRates& rates,
                      bool overlap, std::uint64_t retrieve_bytes = 0);

// Generalized form used by the experiment sweeps: explicit per-bucket stage
// durations (sort, transfer, intersect) in microseconds.
struct StageDurations {
  std::vector<double> sort_us;
  std::vector<double> transfer_us;
  std::vector<double> intersect_us;
};

Timeline sim_pipeline_stages(const StageDurations& stages, bool overlap, double retrieve_us = 0);

struct MultiSampleResult {
  std::uint64_t db_bytes_read = 0;
  double total_us = 0;
  std::uint64_t baseline_bytes_read = 0;
  double baseline_us = 0;

  double speedup() const { return total_us > 0 ? baseline_us / total_us : 0.0; }
};

// Buffering k-mers from up to `buffer_capacity` samples lets one database
// pass serve the whole buffer; the baseline streams the database per sample.
MultiSampleResult sim_multi_sample(std::uint32_t samples, std::uint32_t buffer_capacity,
                                   std::uint64_t db_bytes, std::uint64_t sample_bytes,
                                   const PipelineRates& rates);

struct Workload {
  std::uint64_t db_bytes = 100'000'000'000ull;
  std::uint64_t query_bytes = 6'500'000'000ull;      // selected k-mer set
  std::uint64_t extracted_bytes = 60'000'000'000ull;  // raw extracted k-mers
  std::uint64_t sample_bytes = 6'500'000'000ull;
  std::uint32_t buckets = 512;
  std::uint32_t samples = 16;
  std::uint32_t sample_capacity = 16;
  double sort_bps = 1e9;
  double swap_amplification = 8.0;  // random page-swap cost factor for the baseline
  std::uint64_t host_dram = 0;      // 0 = ample
};

// Effective in-storage intersect rate: full internal flash bandwidth,
// throttled when the internal DRAM traffic (query fetch + intersection write
// + metadata) would exceed the DRAM budget.
double isp_rate_bps(const SsdConfig& cfg, const Workload& w);

struct SummaryRow {
  std::string scenario;
  double parameter = 0;
  double total_us = 0;
  double baseline_us = 0;
  double speedup = 0;
};

struct TimedEvent {
  std::string scenario;
  double parameter = 0;
  Stage stage = Stage::sort;
  int bucket = 0;
  double start_us = 0;
  double end_us = 0;
};

struct ExperimentResult {
  std::vector<TimedEvent> events;
  std::vector<SummaryRow> summary;
};

// scenario in {overlap, db_size, channels, ssd_count, host_dram, multi_sample}.
ExperimentResult run_experiment(std::string_view scenario, const SsdConfig& cfg, const Workload& w);

void write_timeline_csv(const fs::path& path, std::span<const TimedEvent> events);
void write_summary_csv(const fs::path& path, std::span<const SummaryRow> rows);

}  // namespace mgs::sim
