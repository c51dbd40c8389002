#pragma once

// Pipeline orchestration behind the CLI: dump -> learn -> fuzz plus the
// benchmark harness. Every stage communicates through files under one run
// directory, and cmd_fuzz consumes only the invariants JSON, never traces.

#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "invscov/analysis.hpp"
#include "invscov/fuzzer.hpp"
#include "invscov/ir.hpp"
#include "invscov/miner.hpp"

namespace invscov {

struct PipelineConfig {
  std::string program_path;
  std::string corpus_dir;
  std::string out_dir = "out";
  uint64_t seed_execs = 20000;      // budget of the corpus-producing run
  uint64_t campaign_execs = 100000; // budget of each fuzzing campaign
  uint64_t rng_seed = 1;
  std::string mode = "edge-only";   // edge-only | invscov
  int trials = 3;
  uint64_t step_budget = 1'000'000;
};

struct PipelineError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---- file helpers -------------------------------------------------------------

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view data);
std::vector<std::vector<uint8_t>> read_corpus_dir(
    const std::filesystem::path& dir);

Program load_program_file(const std::filesystem::path& path);

// ppts.json: program points, selected variables, types, comparability ids
// and static bounds. Schema documented in docs/file-formats.md.
std::string program_points_json(const Program& p, const AnalysisResult& a);

std::string stats_jsonl(const CampaignStats& stats);

// ---- subcommands --------------------------------------------------------------

// Writes ppts.json, program.decls and traces.dtrace under out_dir.
void cmd_dump(const PipelineConfig& config);

// Reads ppts/decls/dtrace products, learns, prunes, deduplicates; writes
// invariants.json and learn_report.txt.
void cmd_learn(const PipelineConfig& config);

// Runs one campaign; writes corpus/, crashes/, stats.jsonl and perf.json.
CampaignResult cmd_fuzz(const PipelineConfig& config);

// Re-executes a directory of inputs and reports per-input fault triage.
void cmd_triage(const PipelineConfig& config);

// ---- benchmark harness ---------------------------------------------------------

struct TargetBenchResult {
  std::string name;
  std::vector<uint64_t> edge_bugs;  // unique bugs per trial
  std::vector<uint64_t> inv_bugs;
  std::set<uint64_t> edge_hashes;   // union of crash hashes over trials
  std::set<uint64_t> inv_hashes;
  std::vector<bool> edge_found_planted;  // bug-instruction crash per trial
  std::vector<bool> inv_found_planted;
  double edge_eps = 0.0;  // median execs/sec
  double inv_eps = 0.0;
  double overhead = 0.0;  // edge_eps / inv_eps
  size_t invariant_uses = 0;
  uint64_t seed_corpus_size = 0;
};

// Full per-target pipeline: seed run (edge-only), mining over its corpus,
// then `trials` campaigns per mode from that corpus.
TargetBenchResult run_target_bench(const Program& p,
                                   std::span<const std::vector<uint8_t>> seeds,
                                   const std::string& name,
                                   uint64_t seed_execs, uint64_t campaign_execs,
                                   int trials, uint64_t base_seed,
                                   uint64_t step_budget = 1'000'000);

struct BenchReport {
  std::vector<TargetBenchResult> targets;
  double median_overhead = 0.0;
  std::string text;  // rendered table
};

// program_path names the suite directory (one subdirectory per target with
// target.ir and seeds/).
BenchReport cmd_bench(const PipelineConfig& config);

double median(std::vector<double> xs);
uint64_t median_u64(std::vector<uint64_t> xs);

}  // namespace invscov
