#include "invscov/miner.hpp"

#include <algorithm>
#include <cassert>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace invscov {

const char* invariant_kind_name(InvariantKind k) {
  switch (k) {
    case InvariantKind::ConstEqual: return "const-equal";
    case InvariantKind::OneOf: return "one-of";
    case InvariantKind::LowerBound: return "lower-bound";
    case InvariantKind::UpperBound: return "upper-bound";
    case InvariantKind::NonZero: return "non-zero";
    case InvariantKind::EqVars: return "eq-vars";
    case InvariantKind::LeVars: return "le-vars";
    case InvariantKind::Linear: return "linear";
  }
  return "?";
}

std::string wide_to_string(Wide v) {
  if (v == 0) return "0";
  bool neg = v < 0;
  unsigned __int128 u = neg ? static_cast<unsigned __int128>(-v)
                            : static_cast<unsigned __int128>(v);
  std::string s;
  while (u) {
    s.push_back(static_cast<char>('0' + static_cast<int>(u % 10)));
    u /= 10;
  }
  if (neg) s.push_back('-');
  std::reverse(s.begin(), s.end());
  return s;
}

Wide wide_from_string(std::string_view s) {
  bool neg = false;
  size_t i = 0;
  if (!s.empty() && (s[0] == '-' || s[0] == '+')) {
    neg = s[0] == '-';
    i = 1;
  }
  Wide v = 0;
  for (; i < s.size(); ++i) {
    if (s[i] < '0' || s[i] > '9')
      throw std::runtime_error("bad integer literal: " + std::string(s));
    v = v * 10 + (s[i] - '0');
  }
  return neg ? -v : v;
}

std::string Invariant::describe(const Program& p) const {
  const Function& f = p.functions[function];
  std::ostringstream os;
  os << f.name << "." << f.blocks[block].label << ": ";
  switch (kind) {
    case InvariantKind::ConstEqual:
      os << vars[0] << " == " << wide_to_string(params[0]);
      break;
    case InvariantKind::OneOf: {
      os << vars[0] << " in {";
      for (size_t i = 0; i < params.size(); ++i)
        os << (i ? ", " : "") << wide_to_string(params[i]);
      os << "}";
      break;
    }
    case InvariantKind::LowerBound:
      os << vars[0] << " >= " << wide_to_string(params[0]);
      break;
    case InvariantKind::UpperBound:
      os << vars[0] << " <= " << wide_to_string(params[0]);
      break;
    case InvariantKind::NonZero:
      os << vars[0] << " != 0";
      break;
    case InvariantKind::EqVars:
      os << vars[0] << " == " << vars[1];
      break;
    case InvariantKind::LeVars:
      os << vars[0] << " <= " << vars[1];
      break;
    case InvariantKind::Linear:
      os << vars[1] << " == " << wide_to_string(params[0]) << "*" << vars[0]
         << " + " << wide_to_string(params[1]);
      break;
  }
  return os.str();
}

bool invariant_holds(InvariantKind kind, std::span<const Wide> params,
                     std::span<const Wide> values) {
  switch (kind) {
    case InvariantKind::ConstEqual:
      return values[0] == params[0];
    case InvariantKind::OneOf:
      for (Wide p : params)
        if (values[0] == p) return true;
      return false;
    case InvariantKind::LowerBound:
      return values[0] >= params[0];
    case InvariantKind::UpperBound:
      return values[0] <= params[0];
    case InvariantKind::NonZero:
      return values[0] != 0;
    case InvariantKind::EqVars:
      return values[0] == values[1];
    case InvariantKind::LeVars:
      return values[0] <= values[1];
    case InvariantKind::Linear:
      return values[1] == params[0] * values[0] + params[1];
  }
  return true;
}

uint16_t apply_check(const Invariant& inv, std::span<const Wide> values) {
  if (invariant_holds(inv.kind, inv.params, values)) return 0;
  return static_cast<uint16_t>(inv.id << 1);
}

// ---- decls / dtrace ---------------------------------------------------------

namespace {

std::string ppt_base(const Program& p, int fn, int block) {
  return p.functions[fn].name + "." + p.functions[fn].blocks[block].label;
}

void write_ppt(std::ostringstream& os, const Program& p,
               const AnalysisResult& analysis, int fn, int block,
               bool enter) {
  const Function& f = p.functions[fn];
  os << "ppt " << ppt_base(p, fn, block) << (enter ? ":::ENTER" : ":::EXIT0")
     << "\n";
  os << "ppt-type " << (enter ? "enter" : "subexit") << "\n";
  for (int v : analysis.dump[fn].block(block)) {
    int comp = analysis.comparability[fn].of(v);
    os << "variable " << f.value_names[v] << "\n";
    os << "  var-kind variable\n";
    os << "  dec-type " << f.value_types[v].name() << "\n";
    os << "  rep-type int\n";
    os << "  comparability " << (comp == ComparabilityMap::kEpsilon ? -1 : comp)
       << "\n";
  }
  os << "\n";
}

}  // namespace

std::string write_decls(const Program& p, const AnalysisResult& analysis) {
  std::ostringstream os;
  os << "decl-version 2.0\n\n";
  for (size_t fi = 0; fi < p.functions.size(); ++fi) {
    for (const BasicBlock& b : p.functions[fi].blocks) {
      write_ppt(os, p, analysis, static_cast<int>(fi), b.id, true);
      write_ppt(os, p, analysis, static_cast<int>(fi), b.id, false);
    }
  }
  return os.str();
}

std::string render_dtrace_record(const Program& p, const BlockStateRecord& r) {
  const Function& f = p.functions[r.function];
  std::ostringstream os;
  // ENTER and EXIT0 entries share the nonce, logging the block state twice
  // at the end of the block to match the enter/exit pairing of the format.
  for (int pass = 0; pass < 2; ++pass) {
    os << ppt_base(p, r.function, r.block)
       << (pass == 0 ? ":::ENTER" : ":::EXIT0") << "\n";
    os << "this_invocation_nonce\n" << r.nonce << "\n";
    for (const auto& [name, value] : r.observations) {
      int vi = f.find_value(name);
      os << name << "\n"
         << wide_to_string(f.value_types[vi].math_value(value)) << "\n"
         << "1\n";
    }
    os << "\n";
  }
  return os.str();
}

void parse_dtrace(std::string_view text, const Program& p,
                  const std::function<void(const BlockStateRecord&)>& sink) {
  std::istringstream in{std::string(text)};
  std::string line;
  auto next = [&](std::string& out) -> bool {
    return static_cast<bool>(std::getline(in, out));
  };
  while (next(line)) {
    if (line.empty()) continue;
    // Program point header: "<fn>.<label>:::ENTER|EXIT0".
    size_t sep = line.find(":::");
    if (sep == std::string::npos)
      throw std::runtime_error("dtrace: expected a program point, got: " + line);
    std::string base = line.substr(0, sep);
    std::string kind = line.substr(sep + 3);
    size_t dot = base.find('.');
    if (dot == std::string::npos)
      throw std::runtime_error("dtrace: bad program point name: " + base);
    int fn = p.find_function(base.substr(0, dot));
    if (fn < 0) throw std::runtime_error("dtrace: unknown function in: " + base);
    const Function& f = p.functions[fn];
    int block = -1;
    std::string label = base.substr(dot + 1);
    for (const BasicBlock& b : f.blocks)
      if (b.label == label) block = b.id;
    if (block < 0) throw std::runtime_error("dtrace: unknown block in: " + base);

    BlockStateRecord rec;
    rec.function = fn;
    rec.block = block;
    if (!next(line) || line != "this_invocation_nonce")
      throw std::runtime_error("dtrace: expected this_invocation_nonce");
    if (!next(line)) throw std::runtime_error("dtrace: truncated nonce");
    rec.nonce = std::stoull(line);
    // Variables until the blank separator line.
    while (next(line) && !line.empty()) {
      std::string name = line;
      std::string value, modified;
      if (!next(value) || !next(modified))
        throw std::runtime_error("dtrace: truncated variable entry for " + name);
      int vi = f.find_value(name);
      if (vi < 0)
        throw std::runtime_error("dtrace: unknown variable '" + name + "'");
      Wide math = wide_from_string(value);
      rec.observations.emplace_back(
          name, f.value_types[vi].canonicalize(static_cast<uint64_t>(math)));
    }
    if (kind == "EXIT0") sink(rec);  // ENTER entries duplicate the exit state
  }
}

std::vector<BlockStateRecord> parse_dtrace(std::string_view text,
                                           const Program& p) {
  std::vector<BlockStateRecord> out;
  parse_dtrace(text, p, [&](const BlockStateRecord& r) { out.push_back(r); });
  return out;
}

// ---- trace recording --------------------------------------------------------

TraceStats record_traces(
    const Program& p, const AnalysisResult& analysis,
    std::span<const std::vector<uint8_t>> corpus,
    const std::function<void(const BlockStateRecord&)>& sink,
    const std::function<void(const std::string&)>& warn,
    uint64_t step_budget) {
  TraceStats stats;
  uint64_t nonce = 0;
  std::vector<BlockStateRecord> pending;
  for (size_t ci = 0; ci < corpus.size(); ++ci) {
    pending.clear();
    ExecHooks hooks;
    hooks.on_block_exit = [&](const Function& f, const BasicBlock& b,
                              Frame& frame) {
      const int fi = f.index;
      const std::vector<int>& dump = analysis.dump[fi].block(b.id);
      BlockStateRecord rec;
      rec.function = fi;
      rec.block = b.id;
      rec.observations.reserve(dump.size());
      for (int v : dump)
        rec.observations.emplace_back(f.value_names[v], frame.regs[v]);
      pending.push_back(std::move(rec));
    };
    ExecOptions opts;
    opts.step_budget = step_budget;
    ExecutionResult res = execute(p, corpus[ci], hooks, opts);
    if (!res.ok()) {
      ++stats.inputs_skipped;
      if (warn) {
        std::string why = res.faulted()
                              ? std::string("fault: ") + fault_kind_name(res.fault.kind)
                              : "step budget exhausted";
        warn("corpus input #" + std::to_string(ci) + " skipped (" + why +
             "), trace discarded");
      }
      continue;
    }
    ++stats.inputs_traced;
    for (BlockStateRecord& rec : pending) {
      rec.nonce = nonce++;
      ++stats.records;
      sink(rec);
    }
  }
  return stats;
}

// ---- learner ----------------------------------------------------------------

namespace {

struct VarState {
  Wide min = 0, max = 0;
  bool any = false;
  bool nonzero = true;
  std::set<Wide> values;  // capped at 4 distinct
  bool overflow = false;

  void observe(Wide v) {
    if (!any) {
      min = max = v;
      any = true;
    } else {
      min = v < min ? v : min;
      max = v > max ? v : max;
    }
    if (v == 0) nonzero = false;
    if (!overflow) {
      values.insert(v);
      if (values.size() > 3) {
        overflow = true;
        values.clear();
      }
    }
  }
};

struct LinearFit {
  // y = a*x + b fitted from the first two distinct x points, then verified.
  int state = 0;  // 0: no point, 1: one point, 2: fitted, 3: dead
  Wide x0 = 0, y0 = 0, a = 0, b = 0;

  void observe(Wide x, Wide y) {
    switch (state) {
      case 0:
        x0 = x;
        y0 = y;
        state = 1;
        break;
      case 1: {
        if (x == x0) {
          if (y != y0) state = 3;  // same x, different y: not a function of x
          break;
        }
        Wide dx = x - x0, dy = y - y0;
        if (dy % dx != 0) {
          state = 3;
          break;
        }
        a = dy / dx;
        b = y0 - a * x0;
        if (a == 0 || (a > 0 ? a : -a) > kMaxLinearCoeff ||
            (b > 0 ? b : -b) > kMaxLinearCoeff) {
          state = 3;
          break;
        }
        state = 2;
        break;
      }
      case 2:
        if (y != a * x + b) state = 3;
        break;
      default:
        break;
    }
  }
  bool fitted() const { return state == 2; }
};

struct PairState {
  int v1 = 0, v2 = 0;  // indices into the DumpSet order
  bool eq = true, le = true, ge = true;
  LinearFit fwd, bwd;

  void observe(Wide a, Wide b) {
    if (a != b) eq = false;
    if (a > b) le = false;
    if (a < b) ge = false;
    fwd.observe(a, b);
    bwd.observe(b, a);
  }
};

struct PointState {
  int function = 0, block = 0;
  uint64_t count = 0;
  std::vector<VarState> vars;
  std::vector<PairState> pairs;
  bool initialized = false;
};

}  // namespace

struct InvariantLearner::Impl {
  const Program& program;
  const AnalysisResult& analysis;
  uint64_t min_samples;
  std::map<std::pair<int, int>, PointState> points;
  std::vector<std::pair<int, int>> order;  // first-seen order, for stats only

  Impl(const Program& p, const AnalysisResult& a, uint64_t ms)
      : program(p), analysis(a), min_samples(ms) {}

  void observe(const BlockStateRecord& r) {
    const Function& f = program.functions[r.function];
    const std::vector<int>& dump = analysis.dump[r.function].block(r.block);
    if (r.observations.size() != dump.size())
      throw std::runtime_error("record does not match the block's dump set");
    PointState& ps = points[{r.function, r.block}];
    if (!ps.initialized) {
      ps.initialized = true;
      ps.function = r.function;
      ps.block = r.block;
      ps.vars.resize(dump.size());
      const ComparabilityMap& cm = analysis.comparability[r.function];
      for (size_t i = 0; i < dump.size(); ++i) {
        for (size_t j = i + 1; j < dump.size(); ++j) {
          // Binary templates pair variables of the same comparability class
          // or with epsilon on exactly one side.
          int ci = cm.of(dump[i]);
          int cj = cm.of(dump[j]);
          bool eligible =
              (ci != ComparabilityMap::kEpsilon && ci == cj) ||
              (ci == ComparabilityMap::kEpsilon) != (cj == ComparabilityMap::kEpsilon);
          if (eligible) {
            PairState pair;
            pair.v1 = static_cast<int>(i);
            pair.v2 = static_cast<int>(j);
            ps.pairs.push_back(pair);
          }
        }
      }
    }
    ++ps.count;
    std::vector<Wide> math(dump.size());
    for (size_t i = 0; i < dump.size(); ++i) {
      assert(r.observations[i].first == f.value_names[dump[i]]);
      math[i] = f.value_types[dump[i]].math_value(r.observations[i].second);
    }
    for (size_t i = 0; i < dump.size(); ++i) ps.vars[i].observe(math[i]);
    for (PairState& pair : ps.pairs)
      pair.observe(math[pair.v1], math[pair.v2]);
  }

  std::vector<Invariant> finish() {
    std::vector<Invariant> out;
    for (auto& [key, ps] : points) {
      if (ps.count < min_samples) continue;
      const Function& f = program.functions[ps.function];
      const std::vector<int>& dump = analysis.dump[ps.function].block(ps.block);
      auto emit = [&](InvariantKind kind, std::vector<int> local_vars,
                      std::vector<Wide> params) {
        Invariant inv;
        inv.function = ps.function;
        inv.block = ps.block;
        inv.kind = kind;
        inv.params = std::move(params);
        inv.samples = ps.count;
        inv.emission_block = ps.block;
        for (int lv : local_vars) {
          inv.var_indices.push_back(dump[lv]);
          inv.vars.push_back(f.value_names[dump[lv]]);
        }
        out.push_back(std::move(inv));
      };

      for (size_t i = 0; i < ps.vars.size(); ++i) {
        const VarState& vs = ps.vars[i];
        if (vs.min == vs.max) {
          // A pinned value subsumes the other unary templates.
          emit(InvariantKind::ConstEqual, {static_cast<int>(i)}, {vs.min});
          continue;
        }
        if (!vs.overflow && vs.values.size() >= 2 && vs.values.size() <= 3) {
          std::vector<Wide> set(vs.values.begin(), vs.values.end());
          emit(InvariantKind::OneOf, {static_cast<int>(i)}, std::move(set));
        }
        emit(InvariantKind::LowerBound, {static_cast<int>(i)}, {vs.min});
        emit(InvariantKind::UpperBound, {static_cast<int>(i)}, {vs.max});
        if (vs.nonzero) emit(InvariantKind::NonZero, {static_cast<int>(i)}, {});
      }
      for (const PairState& pair : ps.pairs) {
        if (pair.eq) {
          emit(InvariantKind::EqVars, {pair.v1, pair.v2}, {});
        } else {
          if (pair.le) emit(InvariantKind::LeVars, {pair.v1, pair.v2}, {});
          if (pair.ge) emit(InvariantKind::LeVars, {pair.v2, pair.v1}, {});
        }
        // y == a*x + b; skip fits that merely restate eq-vars or const-equal.
        auto degenerate = [](const LinearFit& fit) {
          return fit.a == 1 && fit.b == 0;
        };
        if (pair.fwd.fitted() && !degenerate(pair.fwd)) {
          emit(InvariantKind::Linear, {pair.v1, pair.v2},
               {pair.fwd.a, pair.fwd.b});
        } else if (pair.bwd.fitted() && !degenerate(pair.bwd)) {
          emit(InvariantKind::Linear, {pair.v2, pair.v1},
               {pair.bwd.a, pair.bwd.b});
        }
      }
    }
    return out;
  }
};

InvariantLearner::InvariantLearner(const Program& p, const AnalysisResult& a,
                                   uint64_t min_samples)
    : impl_(std::make_unique<Impl>(p, a, min_samples)) {}
InvariantLearner::~InvariantLearner() = default;
InvariantLearner::InvariantLearner(InvariantLearner&&) noexcept = default;

void InvariantLearner::observe(const BlockStateRecord& r) { impl_->observe(r); }
std::vector<Invariant> InvariantLearner::finish() { return impl_->finish(); }

std::vector<Invariant> learn_invariants(const Program& p,
                                        const AnalysisResult& analysis,
                                        std::span<const BlockStateRecord> records,
                                        uint64_t min_samples) {
  InvariantLearner learner(p, analysis, min_samples);
  for (const BlockStateRecord& r : records) learner.observe(r);
  return learner.finish();
}

// ---- pruning ----------------------------------------------------------------

namespace {

bool implied_by_ranges(const Invariant& inv, const AnalysisResult& analysis) {
  const RangeMap& rm = analysis.ranges[inv.function];
  const Interval& r0 = rm.of(inv.var_indices[0]);
  switch (inv.kind) {
    case InvariantKind::LowerBound:
      return r0.lo >= inv.params[0];
    case InvariantKind::UpperBound:
      return r0.hi <= inv.params[0];
    case InvariantKind::NonZero:
      return !r0.contains(0);
    case InvariantKind::ConstEqual:
      return r0.lo == r0.hi && r0.lo == inv.params[0];
    case InvariantKind::OneOf: {
      if (r0.hi - r0.lo + 1 > static_cast<Wide>(inv.params.size())) return false;
      for (Wide v = r0.lo; v <= r0.hi; ++v)
        if (std::find(inv.params.begin(), inv.params.end(), v) ==
            inv.params.end())
          return false;
      return true;
    }
    case InvariantKind::EqVars: {
      const Interval& r1 = rm.of(inv.var_indices[1]);
      return r0.lo == r0.hi && r1.lo == r1.hi && r0.lo == r1.lo;
    }
    case InvariantKind::LeVars: {
      const Interval& r1 = rm.of(inv.var_indices[1]);
      return r0.hi <= r1.lo;
    }
    case InvariantKind::Linear: {
      const Interval& r1 = rm.of(inv.var_indices[1]);
      return r0.lo == r0.hi && r1.lo == r1.hi &&
             r1.lo == inv.params[0] * r0.lo + inv.params[1];
    }
  }
  return false;
}

}  // namespace

PruneResult prune_inviolable(std::vector<Invariant> invs,
                             const AnalysisResult& analysis) {
  PruneResult out;
  for (Invariant& inv : invs) {
    if (implied_by_ranges(inv, analysis))
      out.pruned.push_back(std::move(inv));
    else
      out.kept.push_back(std::move(inv));
  }
  return out;
}

std::vector<Invariant> cap_invariants(std::vector<Invariant> invs,
                                      size_t max_per_block) {
  std::map<std::pair<int, int>, std::vector<size_t>> by_block;
  for (size_t i = 0; i < invs.size(); ++i)
    by_block[{invs[i].function, invs[i].block}].push_back(i);
  std::vector<bool> keep(invs.size(), false);
  for (auto& [key, idxs] : by_block) {
    std::stable_sort(idxs.begin(), idxs.end(), [&](size_t a, size_t b) {
      const Invariant& ia = invs[a];
      const Invariant& ib = invs[b];
      if (ia.is_binary() != ib.is_binary()) return ia.is_binary();
      return ia.samples > ib.samples;
    });
    for (size_t k = 0; k < idxs.size() && k < max_per_block; ++k)
      keep[idxs[k]] = true;
  }
  std::vector<Invariant> out;
  for (size_t i = 0; i < invs.size(); ++i)
    if (keep[i]) out.push_back(std::move(invs[i]));
  return out;
}

// ---- deduplication ----------------------------------------------------------

namespace {

std::string canonical_key(const Invariant& inv) {
  std::ostringstream os;
  os << inv.function << "|" << invariant_kind_name(inv.kind);
  for (const std::string& v : inv.vars) os << "|" << v;
  for (Wide p : inv.params) os << "|" << wide_to_string(p);
  return os.str();
}

}  // namespace

InvariantReport deduplicate(std::vector<Invariant> invs, const Program& p) {
  // Dominator trees and depths per function.
  std::vector<DominatorTree> doms;
  for (const Function& f : p.functions)
    doms.push_back(compute_dominator_tree(build_cfg(f)));
  auto depth = [&](int fn, int block) {
    int d = 0;
    for (int b = block; b != -1; b = doms[fn].idom[b]) ++d;
    return d;
  };

  std::map<std::string, std::vector<size_t>> groups;
  for (size_t i = 0; i < invs.size(); ++i)
    groups[canonical_key(invs[i])].push_back(i);

  for (auto& [key, members] : groups) {
    for (size_t mi : members) {
      Invariant& inv = invs[mi];
      // Emission site: the top-most group member that dominates this block
      // (the dominators of a block form a chain, so "top-most" is unique).
      int best = inv.block;
      int best_depth = depth(inv.function, inv.block);
      for (size_t mj : members) {
        const Invariant& other = invs[mj];
        if (other.block == inv.block) continue;
        if (!doms[inv.function].dominates(other.block, inv.block)) continue;
        int d = depth(inv.function, other.block);
        if (d < best_depth) {
          best = other.block;
          best_depth = d;
        }
      }
      inv.emission_block = best;
    }
  }

  // Dense ids over emission sites, in use order.
  InvariantReport report;
  std::map<std::string, int> site_ids;  // canonical key + emission block -> id
  int next_id = 1;
  for (Invariant& inv : invs) {
    std::string site_key =
        canonical_key(inv) + "|@" + std::to_string(inv.emission_block);
    auto it = site_ids.find(site_key);
    if (it == site_ids.end()) {
      if (next_id >= 32768)
        throw std::runtime_error("invariant id space exhausted (>= 2^15)");
      it = site_ids.emplace(site_key, next_id++).first;
    }
    inv.id = it->second;
    if (inv.emission_block == inv.block)
      ++report.emission_sites;
    else
      ++report.reuse_sites;
    report.uses.push_back(std::move(inv));
  }
  return report;
}

// ---- JSON -------------------------------------------------------------------

std::string invariants_to_json(const InvariantReport& report,
                               const Program& p) {
  nlohmann::json j;
  j["emission_sites"] = report.emission_sites;
  j["reuse_sites"] = report.reuse_sites;
  nlohmann::json arr = nlohmann::json::array();
  for (const Invariant& inv : report.uses) {
    nlohmann::json o;
    o["id"] = inv.id;
    o["ppt"] = ppt_base(p, inv.function, inv.block);
    o["kind"] = invariant_kind_name(inv.kind);
    o["vars"] = inv.vars;
    nlohmann::json params = nlohmann::json::array();
    for (Wide w : inv.params) params.push_back(wide_to_string(w));
    o["params"] = params;
    o["samples"] = inv.samples;
    o["emission_site"] =
        ppt_base(p, inv.function, inv.emission_block);
    arr.push_back(std::move(o));
  }
  j["invariants"] = std::move(arr);
  return j.dump(2) + "\n";
}

namespace {

InvariantKind kind_from_name(const std::string& s) {
  for (InvariantKind k :
       {InvariantKind::ConstEqual, InvariantKind::OneOf,
        InvariantKind::LowerBound, InvariantKind::UpperBound,
        InvariantKind::NonZero, InvariantKind::EqVars, InvariantKind::LeVars,
        InvariantKind::Linear}) {
    if (s == invariant_kind_name(k)) return k;
  }
  throw std::runtime_error("unknown invariant kind: " + s);
}

std::pair<int, int> resolve_ppt(const Program& p, const std::string& ppt) {
  size_t dot = ppt.find('.');
  if (dot == std::string::npos)
    throw std::runtime_error("bad program point: " + ppt);
  int fn = p.find_function(ppt.substr(0, dot));
  if (fn < 0) throw std::runtime_error("unknown function in ppt: " + ppt);
  std::string label = ppt.substr(dot + 1);
  for (const BasicBlock& b : p.functions[fn].blocks)
    if (b.label == label) return {fn, b.id};
  throw std::runtime_error("unknown block in ppt: " + ppt);
}

}  // namespace

InvariantReport invariants_from_json(std::string_view text, const Program& p) {
  nlohmann::json j = nlohmann::json::parse(text);
  InvariantReport report;
  report.emission_sites = j.value("emission_sites", 0);
  report.reuse_sites = j.value("reuse_sites", 0);
  for (const nlohmann::json& o : j.at("invariants")) {
    Invariant inv;
    inv.id = o.at("id").get<int>();
    auto [fn, block] = resolve_ppt(p, o.at("ppt").get<std::string>());
    inv.function = fn;
    inv.block = block;
    inv.kind = kind_from_name(o.at("kind").get<std::string>());
    for (const nlohmann::json& v : o.at("vars")) {
      std::string name = v.get<std::string>();
      int vi = p.functions[fn].find_value(name);
      if (vi < 0)
        throw std::runtime_error("unknown variable in invariants JSON: " + name);
      inv.vars.push_back(name);
      inv.var_indices.push_back(vi);
    }
    for (const nlohmann::json& v : o.at("params"))
      inv.params.push_back(wide_from_string(v.get<std::string>()));
    inv.samples = o.value("samples", 0);
    auto [efn, eblock] = resolve_ppt(p, o.at("emission_site").get<std::string>());
    if (efn != fn)
      throw std::runtime_error("emission site crosses functions in JSON");
    inv.emission_block = eblock;
    report.uses.push_back(std::move(inv));
  }
  return report;
}

}  // namespace invscov
