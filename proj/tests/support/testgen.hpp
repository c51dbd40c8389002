#pragma once

// Test-only generators and independent oracles: random CFGs with the
// brute-force path-enumeration dominance oracle, random valid programs for
// the analysis/interpreter suites, and the transitive-closure comparability
// oracle. None of this reuses the implementation paths it checks.

#include <set>
#include <string>
#include <vector>

#include "invscov/ir.hpp"
#include "invscov/rng.hpp"

namespace invscov::testgen {

// Random CFG where every block is reachable from block 0 and no block has
// more than two successors.
Cfg random_cfg(Rng& rng, int max_blocks);

// Dominator sets by enumerating every simple root-to-block path and
// intersecting the node sets.
std::vector<std::set<int>> brute_force_dominators(const Cfg& cfg);

// Immediate dominator derived from the brute-force sets (-1 for the root).
int brute_force_idom(const std::vector<std::set<int>>& doms, int block);

struct GenOptions {
  int max_instrs = 40;
  bool with_memory = true;
  bool with_loops = true;
  bool with_diamonds = true;
};

// Textual source of a random valid single-function program ("entry fn main")
// that terminates on any input of >= 8 bytes within the default budget.
std::string random_program_text(Rng& rng, const GenOptions& opts = {});

// Transitive-closure comparability oracle: connected components over the
// pair-merge events a reference walker emits, plus fresh singleton classes
// for otherwise-untouched load results. Returns one representative id per
// value, -1 meaning epsilon.
std::vector<int> closure_comparability(const Function& f);

// True iff the two labelings induce the same partition and the same epsilon
// set (class ids themselves need not match).
bool same_partition(const std::vector<int>& a, const std::vector<int>& b,
                    int eps_a, int eps_b);

}  // namespace invscov::testgen
