#pragma once

// Textual SSA mini-IR: types, parser/validator, CFG construction and
// dominator trees. The grammar is documented in docs/ir-format.md; the
// one-line summary is that a program is a header line carrying the
// block-label seed followed by functions made of labeled basic blocks,
// one instruction per line.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace invscov {

using Wide = __int128;

// Integer scalar type: signed/unsigned, width 8/16/32/64.
struct ScalarType {
  bool is_signed = false;
  uint8_t bits = 64;

  bool operator==(const ScalarType&) const = default;

  uint64_t mask() const {
    return bits == 64 ? ~0ull : ((1ull << bits) - 1);
  }

  // Truncate a raw 64-bit value to this width (canonical storage form:
  // low `bits` significant, upper bits zero).
  uint64_t canonicalize(uint64_t raw) const { return raw & mask(); }

  // Mathematical value of a canonical word under this type.
  Wide math_value(uint64_t canonical) const {
    if (!is_signed) return static_cast<Wide>(canonical);
    if (bits < 64 && (canonical >> (bits - 1)) & 1)
      return static_cast<Wide>(canonical) - (static_cast<Wide>(1) << bits);
    if (bits == 64) return static_cast<Wide>(static_cast<int64_t>(canonical));
    return static_cast<Wide>(canonical);
  }

  // Sign- or zero-extended 64-bit two's-complement view.
  uint64_t extend64(uint64_t canonical) const {
    return static_cast<uint64_t>(math_value(canonical));
  }

  Wide min_value() const {
    if (!is_signed) return 0;
    return -(static_cast<Wide>(1) << (bits - 1));
  }
  Wide max_value() const {
    if (is_signed) return (static_cast<Wide>(1) << (bits - 1)) - 1;
    return (static_cast<Wide>(1) << bits) - 1;
  }

  std::string name() const;
  static std::optional<ScalarType> parse(std::string_view text);
};

enum class Opcode {
  Const, Add, Sub, Mul, Div, Rem, And, Or, Xor, Shl, Shr,
  Neg, Not, Cast, Icmp, Phi, Load, Store, Gep, Call,
  Ret, Br, Jmp, InputRead, InputLen, Bug,
};

enum class IcmpPred { Le, Lt, Eq, Ne };

const char* opcode_name(Opcode op);
bool is_terminator(Opcode op);

struct Operand {
  enum class Kind { Value, Literal };
  Kind kind = Kind::Literal;
  int value = -1;        // index into Function value table
  uint64_t literal = 0;  // 64-bit two's-complement word
  std::string name;      // spelling, for values

  static Operand make_value(int index, std::string name) {
    Operand o;
    o.kind = Kind::Value;
    o.value = index;
    o.name = std::move(name);
    return o;
  }
  static Operand make_literal(uint64_t word) {
    Operand o;
    o.kind = Kind::Literal;
    o.literal = word;
    return o;
  }
  bool is_value() const { return kind == Kind::Value; }
};

struct Instruction {
  Opcode op = Opcode::Bug;
  IcmpPred pred = IcmpPred::Eq;
  int result = -1;             // value index, -1 for void instructions
  std::string result_name;
  ScalarType type;             // result type (meaningless when result < 0)
  std::vector<Operand> operands;
  std::vector<int> phi_blocks;     // incoming block ids, parallel to operands
  std::vector<std::string> phi_labels;
  int callee = -1;                 // function index for Call
  std::string callee_name;
  std::vector<int> targets;        // block ids for Br (2) / Jmp (1)
  std::vector<std::string> target_labels;
  int line = 0;
};

struct BasicBlock {
  int id = 0;
  std::string label;
  uint16_t loc = 0;  // random-but-fixed 16-bit location label
  std::vector<Instruction> instrs;
  int line = 0;

  const Instruction& terminator() const { return instrs.back(); }
};

struct Param {
  std::string name;
  ScalarType type;
};

struct Function {
  std::string name;
  int index = -1;  // position within Program::functions
  bool is_entry = false;
  std::vector<Param> params;
  ScalarType ret_type;
  std::vector<BasicBlock> blocks;
  int line = 0;

  // Value table: params first (index 0..#params-1), then instruction
  // results in textual order.
  std::vector<std::string> value_names;
  std::vector<ScalarType> value_types;
  std::unordered_map<std::string, int> value_index;
  // Defining block per value (-1 for params, which bind at entry).
  std::vector<int> def_block;

  int num_values() const { return static_cast<int>(value_names.size()); }
  int find_value(std::string_view n) const {
    auto it = value_index.find(std::string(n));
    return it == value_index.end() ? -1 : it->second;
  }
};

struct Program {
  uint64_t loc_seed = 0;
  std::vector<Function> functions;
  std::unordered_map<std::string, int> function_index;
  int entry_index = -1;

  const Function& entry() const { return functions[entry_index]; }
  int find_function(std::string_view n) const {
    auto it = function_index.find(std::string(n));
    return it == function_index.end() ? -1 : it->second;
  }
};

struct Diagnostic {
  int line = 0;
  std::string message;
};

// Parse + validate. On failure `program` is empty and `errors` lists every
// violation found (parse errors stop at the first unparsable line;
// validation collects all of them).
struct ParseResult {
  std::optional<Program> program;
  std::vector<Diagnostic> errors;

  bool ok() const { return program.has_value(); }
  std::string error_text() const;
};

ParseResult parse_program(std::string_view text);

// Successor/predecessor maps. Block ids index both vectors.
struct Cfg {
  std::vector<std::vector<int>> succ;
  std::vector<std::vector<int>> pred;

  int num_blocks() const { return static_cast<int>(succ.size()); }
  static Cfg from_edges(int num_blocks,
                        const std::vector<std::pair<int, int>>& edges);
};

Cfg build_cfg(const Function& f);

struct DominatorTree {
  std::vector<int> idom;  // root maps to -1

  // True iff `a` lies on the idom chain from `b` to the root (reflexive).
  bool dominates(int a, int b) const {
    while (b != -1) {
      if (b == a) return true;
      b = idom[b];
    }
    return false;
  }
};

// Requires every block reachable from block 0; throws std::invalid_argument
// ("unreachable block <id>") otherwise.
DominatorTree compute_dominator_tree(const Cfg& cfg);

// The static basic block state: every SSA value used or defined in the
// block, in a stable order (per instruction: value operands, then the
// result). Phi operands are attributed to the incoming edge, not to this
// block, so every listed value is bound whenever the block completes.
std::vector<int> block_state_values(const Function& f, const BasicBlock& b);

}  // namespace invscov
