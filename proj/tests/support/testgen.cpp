#include "support/testgen.hpp"

#include <algorithm>
#include <cassert>
#include <map>
#include <sstream>

namespace invscov::testgen {

Cfg random_cfg(Rng& rng, int max_blocks) {
  const int n = static_cast<int>(rng.range(2, max_blocks));
  std::vector<std::vector<int>> succ(n);
  auto has = [&](int a, int b) {
    return std::find(succ[a].begin(), succ[a].end(), b) != succ[a].end();
  };
  // Spanning structure: each block past the root hangs off an earlier block
  // with a free successor slot, so everything is reachable.
  for (int b = 1; b < n; ++b) {
    int a;
    do {
      a = static_cast<int>(rng.below(b));
    } while (succ[a].size() >= 2);
    succ[a].push_back(b);
  }
  // Extra edges, including back edges; the root keeps no predecessors.
  const int extra = static_cast<int>(rng.below(n));
  for (int i = 0; i < extra; ++i) {
    int a = static_cast<int>(rng.below(n));
    int b = static_cast<int>(rng.range(1, n - 1));
    if (a == b || succ[a].size() >= 2 || has(a, b)) continue;
    succ[a].push_back(b);
  }
  std::vector<std::pair<int, int>> edges;
  for (int a = 0; a < n; ++a)
    for (int b : succ[a]) edges.push_back({a, b});
  return Cfg::from_edges(n, edges);
}

namespace {

void enumerate_paths(const Cfg& cfg, int at, int goal, std::vector<bool>& on_path,
                     std::set<int>& acc, bool& any) {
  if (at == goal) {
    if (!any) {
      any = true;
      acc.clear();
      for (size_t i = 0; i < on_path.size(); ++i)
        if (on_path[i]) acc.insert(static_cast<int>(i));
    } else {
      for (auto it = acc.begin(); it != acc.end();)
        it = on_path[*it] ? std::next(it) : acc.erase(it);
    }
    return;
  }
  for (int s : cfg.succ[at]) {
    if (on_path[s]) continue;
    on_path[s] = true;
    enumerate_paths(cfg, s, goal, on_path, acc, any);
    on_path[s] = false;
  }
}

}  // namespace

std::vector<std::set<int>> brute_force_dominators(const Cfg& cfg) {
  const int n = cfg.num_blocks();
  std::vector<std::set<int>> doms(n);
  for (int b = 0; b < n; ++b) {
    std::vector<bool> on_path(n, false);
    on_path[0] = true;
    bool any = false;
    enumerate_paths(cfg, 0, b, on_path, doms[b], any);
    assert(any && "block unreachable in generated CFG");
  }
  return doms;
}

int brute_force_idom(const std::vector<std::set<int>>& doms, int block) {
  if (block == 0) return -1;
  for (int cand : doms[block]) {
    if (cand == block) continue;
    bool dominated_by_all = true;
    for (int other : doms[block]) {
      if (other == block || other == cand) continue;
      if (!doms[cand].count(other)) {
        dominated_by_all = false;
        break;
      }
    }
    if (dominated_by_all) return cand;
  }
  return -1;
}

// ---- random program generation ------------------------------------------------

namespace {

struct Value {
  std::string name;
  ScalarType type;
};

struct Block {
  std::string label;
  std::vector<std::string> lines;
  bool terminated = false;
};

struct ProgramBuilder {
  Rng& rng;
  const GenOptions& opts;
  std::vector<Block> blocks;
  size_t cur = 0;
  int next_value = 0;
  int next_label = 0;
  int instrs = 0;
  std::vector<Value> avail;  // values defined in dominators of `cur`

  ProgramBuilder(Rng& r, const GenOptions& o) : rng(r), opts(o) {
    blocks.push_back({"entry", {}, false});
  }

  Block& block() { return blocks[cur]; }
  const std::string& cur_label() { return blocks[cur].label; }

  size_t start_block(const std::string& label) {
    blocks.push_back({label, {}, false});
    cur = blocks.size() - 1;
    return cur;
  }

  ScalarType random_type() {
    static const ScalarType types[] = {
        {true, 8},  {true, 16},  {true, 32},  {true, 64},
        {false, 8}, {false, 16}, {false, 32}, {false, 64},
    };
    return types[rng.below(8)];
  }

  std::string fresh() {
    bool source_named = rng.chance(1, 2);
    return (source_named ? "v" : "_t") + std::to_string(next_value++);
  }

  std::string label() { return "b" + std::to_string(next_label++); }

  const Value& pick() { return avail[rng.below(avail.size())]; }

  std::string def(const std::string& rhs, ScalarType t) {
    std::string name = fresh();
    block().lines.push_back(name + ": " + t.name() + " = " + rhs);
    avail.push_back({name, t});
    ++instrs;
    return name;
  }

  void emit(const std::string& line) {
    block().lines.push_back(line);
    ++instrs;
  }

  void terminate(const std::string& line) {
    block().lines.push_back(line);
    block().terminated = true;
    ++instrs;
  }

  void random_op() {
    ScalarType t = random_type();
    switch (rng.below(10)) {
      case 0:
        def("const " + std::to_string(rng.next() % 512), t);
        break;
      case 1:
      case 2: {
        static const char* ops[] = {"add", "sub", "mul", "and", "or",
                                    "xor", "shl", "shr"};
        const char* op = ops[rng.below(8)];
        std::string a = pick().name;
        std::string b =
            rng.chance(1, 3) ? std::to_string(rng.below(64)) : pick().name;
        def(std::string(op) + " " + a + ", " + b, t);
        break;
      }
      case 3:
        def(std::string(rng.chance(1, 2) ? "neg " : "not ") + pick().name, t);
        break;
      case 4:
        def("cast " + pick().name, t);
        break;
      case 5: {
        static const char* preds[] = {"le", "lt", "eq", "ne"};
        std::string a = pick().name;
        std::string b =
            rng.chance(1, 2) ? std::to_string(rng.below(100)) : pick().name;
        def("icmp." + std::string(preds[rng.below(4)]) + " " + a + ", " + b,
            {false, 8});
        break;
      }
      case 6: {
        std::string idx = def("and " + pick().name + ", 7", {false, 64});
        def("input_read " + idx, {false, 8});
        break;
      }
      case 7:
        def("div " + pick().name + ", " + std::to_string(rng.range(1, 9)), t);
        break;
      case 8: {
        if (!opts.with_memory) {
          def("const 7", t);
          break;
        }
        // In-bounds address: small base plus masked offsets.
        std::string off = def("and " + pick().name + ", 255", {false, 64});
        std::string base = std::to_string(rng.below(60000));
        std::string addr;
        if (rng.chance(1, 2)) {
          std::string off2 = def("and " + pick().name + ", 255", {false, 64});
          addr = def("gep " + base + ", " + off + ", " + off2, {false, 64});
        } else {
          addr = def("gep " + base + ", " + off, {false, 64});
        }
        if (rng.chance(1, 2))
          def("load " + addr, random_type());
        else
          emit("store " + addr + ", " + pick().name);
        break;
      }
      case 9:
        def("rem " + pick().name + ", " + std::to_string(rng.range(2, 9)), t);
        break;
    }
  }

  void straight_ops(int n) {
    for (int i = 0; i < n && instrs < opts.max_instrs; ++i) random_op();
  }

  void diamond() {
    std::string then_l = label(), else_l = label(), merge_l = label();
    std::string cond = def(
        "icmp.lt " + pick().name + ", " + std::to_string(rng.below(128)),
        {false, 8});
    terminate("br " + cond + ", " + then_l + ", " + else_l);

    const size_t scope = avail.size();
    ScalarType pt = random_type();
    start_block(then_l);
    straight_ops(static_cast<int>(rng.range(0, 2)));
    std::string tv = def("add " + pick().name + ", 1", pt);
    terminate("jmp " + merge_l);
    avail.resize(scope);

    start_block(else_l);
    straight_ops(static_cast<int>(rng.range(0, 2)));
    std::string ev = def("add " + pick().name + ", 2", pt);
    terminate("jmp " + merge_l);
    avail.resize(scope);

    start_block(merge_l);
    std::string m = fresh();
    emit(m + ": " + pt.name() + " = phi [" + then_l + ": " + tv + "] [" +
         else_l + ": " + ev + "]");
    avail.push_back({m, pt});
  }

  void loop() {
    std::string pre_l = cur_label();
    std::string header_l = label(), body_l = label(), exit_l = label();
    ScalarType it{false, 32};
    std::string init = def("const 0", it);
    uint64_t trip = rng.range(2, 9);
    terminate("jmp " + header_l);

    const size_t scope = avail.size();
    std::string iv = fresh();
    std::string inext = fresh();

    start_block(header_l);
    emit(iv + ": u32 = phi [" + pre_l + ": " + init + "] [" + body_l + ": " +
         inext + "]");
    avail.push_back({iv, it});
    std::string cond =
        def("icmp.lt " + iv + ", " + std::to_string(trip), {false, 8});
    terminate("br " + cond + ", " + body_l + ", " + exit_l);

    const size_t header_scope = avail.size();
    start_block(body_l);
    straight_ops(static_cast<int>(rng.range(1, 3)));
    block().lines.push_back(inext + ": u32 = add " + iv + ", 1");
    ++instrs;
    terminate("jmp " + header_l);
    avail.resize(header_scope);  // body defs are not visible past the loop

    start_block(exit_l);
  }

  std::string render() {
    // Close the last block.
    if (!block().terminated) terminate("ret " + pick().name);
    std::ostringstream os;
    os << "program seed=" << rng.next() << "\n";
    os << "entry fn main() -> u64 {\n";
    for (const Block& b : blocks) {
      os << b.label << ":\n";
      for (const std::string& line : b.lines) os << "  " << line << "\n";
    }
    os << "}\n";
    return os.str();
  }
};

}  // namespace

std::string random_program_text(Rng& rng, const GenOptions& opts) {
  ProgramBuilder b(rng, opts);
  b.def("input_len", {false, 64});
  b.def("const " + std::to_string(rng.below(100)), b.random_type());
  b.def("const " + std::to_string(rng.below(1000)), b.random_type());
  b.straight_ops(static_cast<int>(rng.range(2, 6)));

  const int regions = static_cast<int>(rng.range(1, 4));
  for (int i = 0; i < regions && b.instrs < opts.max_instrs; ++i) {
    const uint64_t kind = rng.below(3);
    if (kind == 1 && opts.with_diamonds)
      b.diamond();
    else if (kind == 2 && opts.with_loops)
      b.loop();
    else
      b.straight_ops(static_cast<int>(rng.range(2, 5)));
  }
  return b.render();
}

// ---- comparability closure oracle ----------------------------------------------

std::vector<int> closure_comparability(const Function& f) {
  const int n = f.num_values();
  std::vector<std::vector<int>> adj(n);
  std::vector<bool> touched(n, false);
  auto edge = [&](int a, int b) {
    adj[a].push_back(b);
    adj[b].push_back(a);
    touched[a] = touched[b] = true;
  };
  for (const BasicBlock& bb : f.blocks) {
    for (const Instruction& in : bb.instrs) {
      switch (in.op) {
        case Opcode::Neg:
        case Opcode::Not:
        case Opcode::Cast:
          if (in.operands[0].is_value()) edge(in.result, in.operands[0].value);
          break;
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
          for (const Operand& o : in.operands)
            if (o.is_value()) edge(in.result, o.value);
          break;
        case Opcode::Gep: {
          if (in.operands[0].is_value()) edge(in.result, in.operands[0].value);
          int first = -1;
          for (size_t i = 1; i < in.operands.size(); ++i) {
            if (!in.operands[i].is_value()) continue;
            if (first < 0)
              first = in.operands[i].value;
            else
              edge(first, in.operands[i].value);
          }
          break;
        }
        case Opcode::Load:
          touched[in.result] = true;  // fresh singleton unless merged later
          break;
        default:
          break;
      }
    }
  }
  std::vector<int> rep(n, -1);
  int next = 1;
  for (int v = 0; v < n; ++v) {
    if (!touched[v] || rep[v] != -1) continue;
    const int id = next++;
    std::vector<int> stack{v};
    rep[v] = id;
    while (!stack.empty()) {
      int u = stack.back();
      stack.pop_back();
      for (int w : adj[u])
        if (rep[w] == -1) {
          rep[w] = id;
          stack.push_back(w);
        }
    }
  }
  return rep;
}

bool same_partition(const std::vector<int>& a, const std::vector<int>& b,
                    int eps_a, int eps_b) {
  if (a.size() != b.size()) return false;
  const int n = static_cast<int>(a.size());
  for (int i = 0; i < n; ++i)
    if ((a[i] == eps_a) != (b[i] == eps_b)) return false;
  for (int i = 0; i < n; ++i) {
    if (a[i] == eps_a) continue;
    for (int j = i + 1; j < n; ++j) {
      if (b[j] == eps_b) continue;
      if ((a[i] == a[j]) != (b[i] == b[j])) return false;
    }
  }
  return true;
}

}  // namespace invscov::testgen
