#pragma once

// Static analyses that shape and prune invariant learning: comparability
// classes, dump-variable selection and conservative value-range analysis.
// All of them are pure functions over an immutable, validated Function.

#include <cstdint>
#include <string>
#include <vector>

#include "invscov/ir.hpp"

namespace invscov {

// Per-function assignment of IR values to comparability classes. Class ids
// are positive; kEpsilon marks values untouched by the walk, which count as
// comparable with every class.
struct ComparabilityMap {
  static constexpr int kEpsilon = 0;

  std::vector<int> class_of;  // indexed by value index
  int next_id = 1;

  int of(int value_index) const { return class_of[value_index]; }
  bool comparable(int v1, int v2) const {
    int a = class_of[v1], b = class_of[v2];
    if (a == kEpsilon || b == kEpsilon) return true;
    return a == b;
  }
};

// Union step over class labels, mirroring the dumper pass:
//   - one side classed, the other epsilon: the epsilon side adopts the class
//   - both epsilon: both receive a fresh id
//   - both classed: every member of v2's class is relabeled to v1's class
void merge_comparability(std::vector<int>& class_of, int& next_id, int v1,
                         int v2);

// Walks the instructions in order: unary/cast merge result with operand,
// binary merges result with both operands, gep merges result with the
// address operand and all value indices with the first value index, load
// assigns a fresh class to its result. Everything else keeps epsilon.
ComparabilityMap compute_comparability(const Function& f);

// Per-block ordered list of value indices selected for tracing. A value in
// the block's state is selected iff it is source-named (name does not start
// with '_'), a value index operand of a gep, an operand or result of a
// load/store, or the function's return value.
struct DumpSet {
  std::vector<std::vector<int>> per_block;

  const std::vector<int>& block(int id) const { return per_block[id]; }
};

DumpSet select_dump_variables(const Function& f);

bool is_source_named(std::string_view value_name);

// Integer interval, kept in mathematical (infinite-precision enough) form.
// Every interval produced by the analysis is clamped to its value's type
// range, so the type bounds play the role of -inf/+inf.
struct Interval {
  Wide lo = 0;
  Wide hi = -1;  // lo > hi encodes "no value seen yet" (bottom)

  bool is_bottom() const { return lo > hi; }
  bool contains(Wide v) const { return !is_bottom() && lo <= v && v <= hi; }

  static Interval bottom() { return {0, -1}; }
  static Interval of(Wide lo, Wide hi) { return {lo, hi}; }
  static Interval point(Wide v) { return {v, v}; }
  static Interval type_range(ScalarType t) {
    return {t.min_value(), t.max_value()};
  }

  Interval hull(const Interval& o) const {
    if (is_bottom()) return o;
    if (o.is_bottom()) return *this;
    return {lo < o.lo ? lo : o.lo, hi > o.hi ? hi : o.hi};
  }
  Interval intersect(const Interval& o) const {
    if (is_bottom() || o.is_bottom()) return bottom();
    Interval r{lo > o.lo ? lo : o.lo, hi < o.hi ? hi : o.hi};
    return r;
  }
  bool operator==(const Interval&) const = default;
};

// Sound per-value ranges: every runtime value of v in any execution lies in
// range(v). Unmodeled opcodes yield the type's full range; three ascending
// widenings per value jump to the type bounds to guarantee termination.
struct RangeMap {
  std::vector<Interval> range;  // indexed by value index

  const Interval& of(int value_index) const { return range[value_index]; }
};

RangeMap compute_ranges(const Function& f);

// All three analyses over every function, indexed like Program::functions.
struct AnalysisResult {
  std::vector<ComparabilityMap> comparability;
  std::vector<DumpSet> dump;
  std::vector<RangeMap> ranges;
};

AnalysisResult analyze_program(const Program& p);

}  // namespace invscov
