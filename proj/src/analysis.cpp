#include "invscov/analysis.hpp"

#include <algorithm>
#include <map>

namespace invscov {

void merge_comparability(std::vector<int>& class_of, int& next_id, int v1,
                         int v2) {
  if (v1 == v2) return;
  const int c1 = class_of[v1];
  const int c2 = class_of[v2];
  if (c1 != ComparabilityMap::kEpsilon && c2 == ComparabilityMap::kEpsilon) {
    class_of[v2] = c1;
  } else if (c1 == ComparabilityMap::kEpsilon &&
             c2 != ComparabilityMap::kEpsilon) {
    class_of[v1] = c2;
  } else if (c1 == ComparabilityMap::kEpsilon &&
             c2 == ComparabilityMap::kEpsilon) {
    class_of[v1] = next_id;
    class_of[v2] = next_id;
    ++next_id;
  } else {
    // Both classed: relabel v2's whole class so the relation stays an
    // equivalence relation.
    for (int& c : class_of)
      if (c == c2) c = c1;
  }
}

namespace {

bool is_binary(Opcode op) {
  switch (op) {
    case Opcode::Add:
    case Opcode::Sub:
    case Opcode::Mul:
    case Opcode::Div:
    case Opcode::Rem:
    case Opcode::And:
    case Opcode::Or:
    case Opcode::Xor:
    case Opcode::Shl:
    case Opcode::Shr:
    case Opcode::Icmp:
      return true;
    default:
      return false;
  }
}

bool is_unary(Opcode op) { return op == Opcode::Neg || op == Opcode::Not; }

}  // namespace

ComparabilityMap compute_comparability(const Function& f) {
  ComparabilityMap cm;
  cm.class_of.assign(f.num_values(), ComparabilityMap::kEpsilon);
  auto merge = [&](int a, int b) {
    merge_comparability(cm.class_of, cm.next_id, a, b);
  };
  for (const BasicBlock& b : f.blocks) {
    for (const Instruction& in : b.instrs) {
      if (is_unary(in.op) || in.op == Opcode::Cast) {
        if (in.operands[0].is_value()) merge(in.result, in.operands[0].value);
      } else if (is_binary(in.op)) {
        for (const Operand& o : in.operands)
          if (o.is_value()) merge(in.result, o.value);
      } else if (in.op == Opcode::Gep) {
        if (in.operands[0].is_value()) merge(in.result, in.operands[0].value);
        int first_index = -1;
        for (size_t i = 1; i < in.operands.size(); ++i) {
          if (!in.operands[i].is_value()) continue;
          if (first_index < 0)
            first_index = in.operands[i].value;
          else
            merge(first_index, in.operands[i].value);
        }
      } else if (in.op == Opcode::Load) {
        cm.class_of[in.result] = cm.next_id;
        ++cm.next_id;
      }
      // phi, store, call, input_read/len, const and terminators keep epsilon.
    }
  }
  return cm;
}

bool is_source_named(std::string_view value_name) {
  return !value_name.empty() && value_name[0] != '_';
}

DumpSet select_dump_variables(const Function& f) {
  // Function-wide roles.
  std::vector<bool> gep_index(f.num_values(), false);
  std::vector<bool> memop(f.num_values(), false);
  std::vector<bool> retval(f.num_values(), false);
  for (const BasicBlock& b : f.blocks) {
    for (const Instruction& in : b.instrs) {
      switch (in.op) {
        case Opcode::Gep:
          for (size_t i = 1; i < in.operands.size(); ++i)
            if (in.operands[i].is_value()) gep_index[in.operands[i].value] = true;
          break;
        case Opcode::Load:
          if (in.operands[0].is_value()) memop[in.operands[0].value] = true;
          memop[in.result] = true;
          break;
        case Opcode::Store:
          for (const Operand& o : in.operands)
            if (o.is_value()) memop[o.value] = true;
          break;
        case Opcode::Ret:
          if (in.operands[0].is_value()) retval[in.operands[0].value] = true;
          break;
        default:
          break;
      }
    }
  }
  DumpSet ds;
  ds.per_block.resize(f.blocks.size());
  for (const BasicBlock& b : f.blocks) {
    for (int v : block_state_values(f, b)) {
      if (is_source_named(f.value_names[v]) || gep_index[v] || memop[v] ||
          retval[v])
        ds.per_block[b.id].push_back(v);
    }
  }
  return ds;
}

// ---- range analysis --------------------------------------------------------

namespace {

// Clamp to the type range; anything that escapes it (possible wraparound)
// falls back to the full type range, which keeps the result sound under
// modular arithmetic.
Interval clamp_or_top(Interval r, ScalarType t) {
  Interval top = Interval::type_range(t);
  if (r.is_bottom()) return r;
  if (r.lo < top.lo || r.hi > top.hi) return top;
  return r;
}

Interval add_iv(Interval a, Interval b, ScalarType t) {
  if (a.is_bottom() || b.is_bottom()) return Interval::bottom();
  return clamp_or_top({a.lo + b.lo, a.hi + b.hi}, t);
}

Interval sub_iv(Interval a, Interval b, ScalarType t) {
  if (a.is_bottom() || b.is_bottom()) return Interval::bottom();
  return clamp_or_top({a.lo - b.hi, a.hi - b.lo}, t);
}

Interval mul_iv(Interval a, Interval b, ScalarType t) {
  if (a.is_bottom() || b.is_bottom()) return Interval::bottom();
  // Guard against __int128 overflow: bail out to top when the factors are
  // already huge (they can only come from 64-bit types).
  auto big = [](Wide v) {
    const Wide lim = static_cast<Wide>(1) << 66;
    return v > lim || v < -lim;
  };
  if (big(a.lo) || big(a.hi) || big(b.lo) || big(b.hi))
    return Interval::type_range(t);
  Wide c[4] = {a.lo * b.lo, a.lo * b.hi, a.hi * b.lo, a.hi * b.hi};
  Wide lo = c[0], hi = c[0];
  for (Wide v : c) {
    lo = v < lo ? v : lo;
    hi = v > hi ? v : hi;
  }
  return clamp_or_top({lo, hi}, t);
}

struct Refinement {
  int value = -1;
  Interval iv;
};

// Environment: per-edge interval refinements for already-defined values.
using Env = std::map<int, Interval>;

Env join_envs(const std::vector<Env>& envs) {
  if (envs.empty()) return {};
  Env out = envs[0];
  for (size_t i = 1; i < envs.size(); ++i) {
    for (auto it = out.begin(); it != out.end();) {
      auto jt = envs[i].find(it->first);
      if (jt == envs[i].end()) {
        it = out.erase(it);  // not refined on every incoming edge
      } else {
        it->second = it->second.hull(jt->second);
        ++it;
      }
    }
  }
  return out;
}

}  // namespace

RangeMap compute_ranges(const Function& f) {
  const int nvals = f.num_values();
  RangeMap rm;
  rm.range.assign(nvals, Interval::bottom());
  for (size_t i = 0; i < f.params.size(); ++i)
    rm.range[i] = Interval::type_range(f.params[i].type);

  Cfg cfg = build_cfg(f);
  const int nblocks = cfg.num_blocks();

  std::vector<int> widen_count(nvals, 0);
  // env_edge[b] = refinements valid on entry to b's successors, per target.
  std::vector<std::map<int, Env>> env_out(nblocks);  // succ block -> env
  std::vector<Env> env_in(nblocks);

  auto operand_iv = [&](const Operand& o, ScalarType fallback,
                        const Env& env) -> Interval {
    if (!o.is_value()) {
      uint64_t canon = fallback.canonicalize(o.literal);
      return Interval::point(fallback.math_value(canon));
    }
    Interval base = rm.range[o.value];
    if (base.is_bottom())
      base = Interval::type_range(f.value_types[o.value]);  // back edge input
    auto it = env.find(o.value);
    if (it != env.end()) base = base.intersect(it->second);
    return base;
  };

  auto transfer = [&](const Instruction& in, const Env& env) -> Interval {
    const ScalarType t = in.type;
    switch (in.op) {
      case Opcode::Const:
        return Interval::point(t.math_value(t.canonicalize(in.operands[0].literal)));
      case Opcode::Add:
        return add_iv(operand_iv(in.operands[0], t, env),
                      operand_iv(in.operands[1], t, env), t);
      case Opcode::Sub:
        return sub_iv(operand_iv(in.operands[0], t, env),
                      operand_iv(in.operands[1], t, env), t);
      case Opcode::Mul:
        return mul_iv(operand_iv(in.operands[0], t, env),
                      operand_iv(in.operands[1], t, env), t);
      case Opcode::Neg:
        return sub_iv(Interval::point(0), operand_iv(in.operands[0], t, env), t);
      case Opcode::Cast: {
        if (!in.operands[0].is_value()) return Interval::type_range(t);
        Interval src = rm.range[in.operands[0].value];
        auto it = env.find(in.operands[0].value);
        if (it != env.end()) src = src.intersect(it->second);
        if (src.is_bottom()) return Interval::type_range(t);
        Interval top = Interval::type_range(t);
        // Value-preserving when the source interval fits the target range;
        // otherwise the truncation may wrap.
        if (src.lo >= top.lo && src.hi <= top.hi) return src;
        return top;
      }
      case Opcode::Icmp:
        return Interval::of(0, 1);
      case Opcode::Phi: {
        Interval hull = Interval::bottom();
        for (const Operand& o : in.operands) {
          Interval iv = o.is_value() && rm.range[o.value].is_bottom()
                            ? Interval::bottom()  // not yet computed
                            : operand_iv(o, t, env);
          hull = hull.hull(iv);
        }
        return clamp_or_top(hull, t);
      }
      case Opcode::InputRead:
        return clamp_or_top(Interval::of(0, 255), t);
      default:
        return Interval::type_range(t);
    }
  };

  // Extract the branch refinement for `br c, T, F` when c is an icmp of a
  // value against a literal defined in the same block.
  auto branch_refinements = [&](const BasicBlock& b, Refinement& on_true,
                                Refinement& on_false) {
    const Instruction& term = b.terminator();
    if (term.op != Opcode::Br || !term.operands[0].is_value()) return;
    int cond = term.operands[0].value;
    const Instruction* def = nullptr;
    for (const Instruction& in : b.instrs)
      if (in.result == cond) def = &in;
    if (!def || def->op != Opcode::Icmp) return;
    const Operand& a = def->operands[0];
    const Operand& bb = def->operands[1];
    int var;
    uint64_t lit;
    bool var_on_left;
    if (a.is_value() && !bb.is_value()) {
      var = a.value;
      lit = bb.literal;
      var_on_left = true;
    } else if (!a.is_value() && bb.is_value()) {
      var = bb.value;
      lit = a.literal;
      var_on_left = false;
    } else {
      return;
    }
    const ScalarType vt = f.value_types[var];
    const Wide c = vt.math_value(vt.canonicalize(lit));
    const Interval top = Interval::type_range(vt);
    Interval t_iv = top, f_iv = top;
    IcmpPred pred = def->pred;
    // Normalize to "var <pred> c".
    if (!var_on_left) {
      // c <pred> var
      switch (pred) {
        case IcmpPred::Le: t_iv = {c, top.hi}; f_iv = {top.lo, c - 1}; break;
        case IcmpPred::Lt: t_iv = {c + 1, top.hi}; f_iv = {top.lo, c}; break;
        case IcmpPred::Eq: t_iv = Interval::point(c); break;
        case IcmpPred::Ne: f_iv = Interval::point(c); break;
      }
    } else {
      switch (pred) {
        case IcmpPred::Le: t_iv = {top.lo, c}; f_iv = {c + 1, top.hi}; break;
        case IcmpPred::Lt: t_iv = {top.lo, c - 1}; f_iv = {c, top.hi}; break;
        case IcmpPred::Eq: t_iv = Interval::point(c); break;
        case IcmpPred::Ne: f_iv = Interval::point(c); break;
      }
    }
    if (!t_iv.is_bottom()) on_true = {var, t_iv.intersect(top)};
    if (!f_iv.is_bottom()) on_false = {var, f_iv.intersect(top)};
  };

  // Fixpoint. The system is monotone (ranges only widen, refinements are
  // intersections with constants), so iteration terminates; widening caps
  // the number of ascents per value.
  bool changed = true;
  int passes = 0;
  while (changed && passes < 1000) {
    changed = false;
    ++passes;
    for (const BasicBlock& b : f.blocks) {
      // Join incoming edge environments.
      std::vector<Env> incoming;
      for (int p : cfg.pred[b.id]) {
        auto it = env_out[p].find(b.id);
        incoming.push_back(it == env_out[p].end() ? Env{} : it->second);
      }
      Env env = b.id == 0 ? Env{} : join_envs(incoming);
      env_in[b.id] = env;

      for (const Instruction& in : b.instrs) {
        if (in.result < 0) continue;
        Interval next = transfer(in, env);
        next = clamp_or_top(next, in.type);
        Interval cur = rm.range[in.result];
        if (next == cur || next.is_bottom()) continue;
        Interval merged = cur.hull(next);
        if (merged == cur) continue;
        if (++widen_count[in.result] > 3)
          merged = Interval::type_range(in.type);
        if (merged != cur) {
          rm.range[in.result] = merged;
          changed = true;
        }
      }

      // Outgoing refinements: keep the incoming env (SSA values are never
      // redefined) and add the branch condition's contribution.
      Refinement on_true, on_false;
      branch_refinements(b, on_true, on_false);
      const Instruction& term = b.terminator();
      std::map<int, Env> out;
      if (term.op == Opcode::Br) {
        Env t_env = env, f_env = env;
        auto refine = [&](Env& e, const Refinement& r) {
          if (r.value < 0) return;
          Interval base = e.count(r.value)
                              ? e[r.value]
                              : Interval::type_range(f.value_types[r.value]);
          Interval narrowed = base.intersect(r.iv);
          if (!narrowed.is_bottom()) e[r.value] = narrowed;
        };
        refine(t_env, on_true);
        refine(f_env, on_false);
        out[term.targets[0]] = t_env;
        if (term.targets[1] != term.targets[0]) out[term.targets[1]] = f_env;
      } else if (term.op == Opcode::Jmp) {
        out[term.targets[0]] = env;
      }
      if (out != env_out[b.id]) {
        env_out[b.id] = std::move(out);
        changed = true;
      }
    }
  }

  if (changed) {
    // Fixpoint cap hit: give up on precision rather than soundness.
    for (int v = 0; v < nvals; ++v)
      rm.range[v] = Interval::type_range(f.value_types[v]);
    return rm;
  }
  // Any value still at bottom (dead phi input chains) gets its type range.
  for (int v = 0; v < nvals; ++v)
    if (rm.range[v].is_bottom())
      rm.range[v] = Interval::type_range(f.value_types[v]);
  return rm;
}

AnalysisResult analyze_program(const Program& p) {
  AnalysisResult r;
  for (const Function& f : p.functions) {
    r.comparability.push_back(compute_comparability(f));
    r.dump.push_back(select_dump_variables(f));
    r.ranges.push_back(compute_ranges(f));
  }
  return r;
}

}  // namespace invscov
