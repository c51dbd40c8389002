#pragma once

// The evolutionary fuzzing loop: corpus management, havoc-style mutation,
// input evaluation with edge + invariant-check feedback, and crash triage
// keyed by the stripped call-stack hash. The whole campaign is a
// deterministic function of (program, seeds, invariants, rng seed, budget).

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "invscov/feedback.hpp"
#include "invscov/interp.hpp"
#include "invscov/ir.hpp"
#include "invscov/miner.hpp"
#include "invscov/rng.hpp"

namespace invscov {

constexpr size_t kMaxInputLen = 4096;

struct CorpusEntry {
  std::vector<uint8_t> bytes;
  uint64_t exec_steps = 0;
  size_t novel_at_add = 0;  // (index, bucket) pairs new when this was saved
  std::vector<std::pair<uint16_t, uint8_t>> signature;
};

struct Corpus {
  std::vector<CorpusEntry> entries;
  size_t cursor = 0;
  std::vector<size_t> favored;
  size_t favored_cursor = 0;
  size_t adds_since_favored = 0;

  size_t size() const { return entries.size(); }
};

struct CrashInfo {
  std::vector<uint8_t> input;
  FaultKind kind = FaultKind::BugInstruction;
  std::vector<std::string> stack;  // stripped function names, outermost first
};

// One representative per stripped-call-stack hash; first wins.
using CrashSet = std::map<uint64_t, CrashInfo>;

struct StatsWindow {
  uint64_t executions = 0;
  uint64_t corpus_size = 0;
  uint64_t crashes = 0;      // faulting executions so far
  uint64_t unique_bugs = 0;  // distinct call-stack hashes
  double map_density = 0.0;  // fraction of map indices ever hit
};

struct CampaignStats {
  uint64_t executions = 0;
  uint64_t crashes = 0;
  uint64_t unique_bugs = 0;
  uint64_t corpus_size = 0;
  uint64_t timeouts = 0;
  double map_density = 0.0;
  std::vector<StatsWindow> series;  // one record per execution window
  // Wall-clock measurements; excluded from determinism guarantees.
  double wall_seconds = 0.0;
  double execs_per_sec = 0.0;
};

// Fuzz-time checks resolved against the value tables, grouped per block.
struct CheckPlan {
  struct Site {
    uint16_t id = 0;
    InvariantKind kind = InvariantKind::NonZero;
    std::vector<Wide> params;
    std::vector<int> vars;       // value indices
    std::vector<ScalarType> var_types;
    int slot = 0;                // per-activation outcome cache slot
    bool emit = true;            // false: reuse the dominator's outcome
  };
  // sites[function][block]
  std::vector<std::vector<std::vector<Site>>> sites;
  std::vector<int> slots_per_function;

  bool empty() const { return sites.empty(); }
};

// reuse_dominator_outcomes=false emits every check locally (same ids); used
// to validate that deduplication is semantics-preserving.
CheckPlan build_check_plan(const InvariantReport& report, const Program& p,
                           bool reuse_dominator_outcomes = true);

struct FuzzConfig {
  uint64_t budget_execs = 100000;
  uint64_t rng_seed = 1;
  uint64_t step_budget = 1'000'000;
  uint64_t stats_window = 4096;
};

struct CampaignResult {
  Corpus corpus;
  CrashSet crashes;
  CampaignStats stats;
};

// Executes one input with coverage (and, when `plan` is non-null, invariant
// check) instrumentation. The map is cleared first; prev_loc resets.
struct EvalOutcome {
  ExecutionResult exec;
  NoveltySummary novelty;
  bool saved = false;
};

EvalOutcome evaluate_input(const Program& p, std::span<const uint8_t> input,
                           const CheckPlan* plan, FeedbackState& fs,
                           CoverageMap& map, uint64_t step_budget);

// Round-robin pick, favoring the greedy-cover subset with probability 0.9.
size_t pick_testcase(Corpus& c, Rng& rng);

// Iteration count for one mutation stage: clamp(64 * speed * novelty, 16, 1024).
uint64_t calibrate(const CorpusEntry& entry, uint64_t avg_steps);

// 1..64 stacked havoc operations; never returns the unmodified input.
std::vector<uint8_t> mutate(const std::vector<uint8_t>& input, Rng& rng,
                            const Corpus& corpus);

// Greedy set cover of the union of entry signatures; used for the favored
// subset.
std::vector<size_t> greedy_cover(
    const std::vector<CorpusEntry>& entries);

// The campaign loop. `invariants == nullptr` is the plain edge-coverage
// baseline. Seeds must be non-empty (a single empty input is allowed);
// budget must be positive.
CampaignResult fuzz_loop(const Program& p,
                         std::span<const std::vector<uint8_t>> seeds,
                         const InvariantReport* invariants,
                         const FuzzConfig& config);

}  // namespace invscov
