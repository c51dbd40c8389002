#pragma once

// Likely-invariant mining over basic-block traces: decls/dtrace text IO in
// the Daikon layout, the online template learner, the inviolable-bound
// filter and the dominator-based deduplication of checks.

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "invscov/analysis.hpp"
#include "invscov/interp.hpp"
#include "invscov/ir.hpp"

namespace invscov {

constexpr uint64_t kMinSamples = 5;
constexpr size_t kMaxInvariantsPerBlock = 16;
constexpr Wide kMaxLinearCoeff = 32768;  // |a|, |b| <= 2^15

// One observation of a basic block's selected variables at block exit.
struct BlockStateRecord {
  int function = 0;
  int block = 0;
  uint64_t nonce = 0;
  // (name, canonical value), in DumpSet order.
  std::vector<std::pair<std::string, uint64_t>> observations;
};

enum class InvariantKind {
  ConstEqual,   // v == c
  OneOf,        // v in {c1..c3}
  LowerBound,   // v >= c
  UpperBound,   // v <= c
  NonZero,      // v != 0
  EqVars,       // v0 == v1
  LeVars,       // v0 <= v1
  Linear,       // v1 == a*v0 + b
};

const char* invariant_kind_name(InvariantKind k);

struct Invariant {
  int id = 0;  // unique positive, < 2^15, assigned by deduplicate()
  int function = 0;
  int block = 0;
  InvariantKind kind = InvariantKind::NonZero;
  std::vector<std::string> vars;    // 1 or 2 names
  std::vector<int> var_indices;     // resolved into the function value table
  std::vector<Wide> params;
  uint64_t samples = 0;
  int emission_block = -1;  // == block when the check runs here

  bool is_binary() const {
    return kind == InvariantKind::EqVars || kind == InvariantKind::LeVars ||
           kind == InvariantKind::Linear;
  }
  std::string describe(const Program& p) const;
};

// Predicate evaluation over the variables' mathematical values (one value
// per entry of `vars`). Shared by the learner, the pruning filter and the
// fuzz-time checks so all stages agree on semantics.
bool invariant_holds(InvariantKind kind, std::span<const Wide> params,
                     std::span<const Wide> values);

// 0 when the invariant holds, (id << 1) otherwise. The caller XORs the
// outcome into prev_loc.
uint16_t apply_check(const Invariant& inv, std::span<const Wide> values);

// ---- decls / dtrace text ----------------------------------------------------

// Daikon-style declarations: one ENTER/EXIT0 ppt pair per basic block, each
// variable with its type and comparability id (-1 stands for epsilon).
std::string write_decls(const Program& p, const AnalysisResult& analysis);

// One dtrace entry pair (ENTER and EXIT0 sharing the nonce) for a record.
std::string render_dtrace_record(const Program& p, const BlockStateRecord& r);

// Parses dtrace text back into records (the EXIT0 entries are authoritative;
// ENTER duplicates are skipped). Throws std::runtime_error on malformed
// input.
void parse_dtrace(std::string_view text, const Program& p,
                  const std::function<void(const BlockStateRecord&)>& sink);
std::vector<BlockStateRecord> parse_dtrace(std::string_view text,
                                           const Program& p);

// ---- trace recording --------------------------------------------------------

struct TraceStats {
  uint64_t records = 0;
  uint64_t inputs_traced = 0;
  uint64_t inputs_skipped = 0;  // faulting or budget-exhausted inputs
};

// Executes every corpus input with the block-exit hook and hands the
// resulting records to `sink` in execution order with globally increasing
// nonces. Inputs that fault (or run out of budget) are skipped with a
// warning and contribute no records.
TraceStats record_traces(
    const Program& p, const AnalysisResult& analysis,
    std::span<const std::vector<uint8_t>> corpus,
    const std::function<void(const BlockStateRecord&)>& sink,
    const std::function<void(const std::string&)>& warn = {},
    uint64_t step_budget = 1'000'000);

// ---- learning ----------------------------------------------------------------

// Single-pass online learner; state is partitioned per program point.
class InvariantLearner {
 public:
  InvariantLearner(const Program& p, const AnalysisResult& analysis,
                   uint64_t min_samples = kMinSamples);
  ~InvariantLearner();
  InvariantLearner(InvariantLearner&&) noexcept;

  void observe(const BlockStateRecord& r);
  // Surviving templates per program point with >= min_samples records, in a
  // deterministic order. No ids are assigned yet.
  std::vector<Invariant> finish();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

std::vector<Invariant> learn_invariants(const Program& p,
                                        const AnalysisResult& analysis,
                                        std::span<const BlockStateRecord> records,
                                        uint64_t min_samples = kMinSamples);

// ---- pruning -----------------------------------------------------------------

struct PruneResult {
  std::vector<Invariant> kept;
  std::vector<Invariant> pruned;  // logically implied by the static ranges
};

PruneResult prune_inviolable(std::vector<Invariant> invs,
                             const AnalysisResult& analysis);

// Keeps at most `max_per_block` invariants per block, preferring binary
// kinds, then higher sample counts, then learn order.
std::vector<Invariant> cap_invariants(std::vector<Invariant> invs,
                                      size_t max_per_block = kMaxInvariantsPerBlock);

// ---- deduplication -----------------------------------------------------------

struct InvariantReport {
  // Every surviving (program point, invariant) use. Uses sharing a canonical
  // invariant along a dominator chain share one id; `emission_block` names
  // the block whose check computes the outcome.
  std::vector<Invariant> uses;
  size_t emission_sites = 0;
  size_t reuse_sites = 0;
};

// When the same canonical invariant (kind + variables + parameters) appears
// at blocks A and B with A dominating B, the check is emitted only at the
// top-most such dominator and B reuses its outcome. Assigns ids densely
// from 1 (id 0 is reserved for "holds").
InvariantReport deduplicate(std::vector<Invariant> invs, const Program& p);

// ---- JSON --------------------------------------------------------------------

std::string invariants_to_json(const InvariantReport& report, const Program& p);
InvariantReport invariants_from_json(std::string_view text, const Program& p);

std::string wide_to_string(Wide v);
Wide wide_from_string(std::string_view s);

}  // namespace invscov
