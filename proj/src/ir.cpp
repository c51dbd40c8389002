#include "invscov/ir.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <sstream>
#include <stdexcept>

#include "invscov/rng.hpp"

namespace invscov {

std::string ScalarType::name() const {
  return (is_signed ? "i" : "u") + std::to_string(static_cast<int>(bits));
}

std::optional<ScalarType> ScalarType::parse(std::string_view text) {
  if (text.size() < 2) return std::nullopt;
  bool is_signed;
  if (text[0] == 'i')
    is_signed = true;
  else if (text[0] == 'u')
    is_signed = false;
  else
    return std::nullopt;
  std::string_view width = text.substr(1);
  if (width == "8") return ScalarType{is_signed, 8};
  if (width == "16") return ScalarType{is_signed, 16};
  if (width == "32") return ScalarType{is_signed, 32};
  if (width == "64") return ScalarType{is_signed, 64};
  return std::nullopt;
}

const char* opcode_name(Opcode op) {
  switch (op) {
    case Opcode::Const: return "const";
    case Opcode::Add: return "add";
    case Opcode::Sub: return "sub";
    case Opcode::Mul: return "mul";
    case Opcode::Div: return "div";
    case Opcode::Rem: return "rem";
    case Opcode::And: return "and";
    case Opcode::Or: return "or";
    case Opcode::Xor: return "xor";
    case Opcode::Shl: return "shl";
    case Opcode::Shr: return "shr";
    case Opcode::Neg: return "neg";
    case Opcode::Not: return "not";
    case Opcode::Cast: return "cast";
    case Opcode::Icmp: return "icmp";
    case Opcode::Phi: return "phi";
    case Opcode::Load: return "load";
    case Opcode::Store: return "store";
    case Opcode::Gep: return "gep";
    case Opcode::Call: return "call";
    case Opcode::Ret: return "ret";
    case Opcode::Br: return "br";
    case Opcode::Jmp: return "jmp";
    case Opcode::InputRead: return "input_read";
    case Opcode::InputLen: return "input_len";
    case Opcode::Bug: return "bug";
  }
  return "?";
}

bool is_terminator(Opcode op) {
  return op == Opcode::Ret || op == Opcode::Br || op == Opcode::Jmp;
}

std::string ParseResult::error_text() const {
  std::ostringstream os;
  for (const auto& d : errors) {
    if (d.line > 0) os << "line " << d.line << ": ";
    os << d.message << "\n";
  }
  return os.str();
}

namespace {

struct Cursor {
  std::string_view text;
  size_t pos = 0;
  int line = 0;

  // Next non-empty line with comments stripped, trimmed.
  std::optional<std::string_view> next_line() {
    while (pos < text.size()) {
      size_t end = text.find('\n', pos);
      if (end == std::string_view::npos) end = text.size();
      std::string_view raw = text.substr(pos, end - pos);
      pos = end + 1;
      ++line;
      size_t hash = raw.find('#');
      if (hash != std::string_view::npos) raw = raw.substr(0, hash);
      size_t b = raw.find_first_not_of(" \t\r");
      if (b == std::string_view::npos) continue;
      size_t e = raw.find_last_not_of(" \t\r");
      return raw.substr(b, e - b + 1);
    }
    return std::nullopt;
  }
};

std::vector<std::string> split_tokens(std::string_view s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (std::isspace(static_cast<unsigned char>(c)) || c == ',') {
      if (!cur.empty()) out.push_back(std::move(cur)), cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

bool is_ident(std::string_view s) {
  if (s.empty()) return false;
  if (!std::isalpha(static_cast<unsigned char>(s[0])) && s[0] != '_')
    return false;
  for (char c : s)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_')
      return false;
  return true;
}

std::optional<uint64_t> parse_literal(std::string_view s) {
  if (s.empty()) return std::nullopt;
  bool neg = false;
  if (s[0] == '-') {
    neg = true;
    s.remove_prefix(1);
    if (s.empty()) return std::nullopt;
  }
  uint64_t v = 0;
  std::from_chars_result r{};
  if (s.size() > 2 && s[0] == '0' && (s[1] == 'x' || s[1] == 'X')) {
    r = std::from_chars(s.data() + 2, s.data() + s.size(), v, 16);
  } else {
    r = std::from_chars(s.data(), s.data() + s.size(), v, 10);
  }
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) return std::nullopt;
  return neg ? (~v + 1) : v;
}

struct OpSpec {
  Opcode op;
  int min_operands;
  int max_operands;  // -1 = unbounded
  bool has_result;
};

const std::unordered_map<std::string, OpSpec>& op_table() {
  static const std::unordered_map<std::string, OpSpec> table = {
      {"const", {Opcode::Const, 1, 1, true}},
      {"add", {Opcode::Add, 2, 2, true}},
      {"sub", {Opcode::Sub, 2, 2, true}},
      {"mul", {Opcode::Mul, 2, 2, true}},
      {"div", {Opcode::Div, 2, 2, true}},
      {"rem", {Opcode::Rem, 2, 2, true}},
      {"and", {Opcode::And, 2, 2, true}},
      {"or", {Opcode::Or, 2, 2, true}},
      {"xor", {Opcode::Xor, 2, 2, true}},
      {"shl", {Opcode::Shl, 2, 2, true}},
      {"shr", {Opcode::Shr, 2, 2, true}},
      {"neg", {Opcode::Neg, 1, 1, true}},
      {"not", {Opcode::Not, 1, 1, true}},
      {"cast", {Opcode::Cast, 1, 1, true}},
      {"load", {Opcode::Load, 1, 1, true}},
      {"store", {Opcode::Store, 2, 2, false}},
      {"gep", {Opcode::Gep, 2, -1, true}},
      {"input_read", {Opcode::InputRead, 1, 1, true}},
      {"input_len", {Opcode::InputLen, 0, 0, true}},
      {"ret", {Opcode::Ret, 1, 1, false}},
      {"jmp", {Opcode::Jmp, 0, 0, false}},
      {"br", {Opcode::Br, 1, 1, false}},
      {"bug", {Opcode::Bug, 0, 0, false}},
  };
  return table;
}

class Parser {
 public:
  explicit Parser(std::string_view text) : cursor_{text} {}

  ParseResult run() {
    parse_header();
    if (!errors_.empty()) return finish();
    while (true) {
      auto line = cursor_.next_line();
      if (!line) break;
      if (!parse_function(*line)) break;
    }
    if (!errors_.empty()) return finish();
    validate();
    if (!errors_.empty()) return finish();
    assign_locs();
    ParseResult r;
    r.program = std::move(program_);
    return r;
  }

 private:
  ParseResult finish() {
    ParseResult r;
    r.errors = std::move(errors_);
    return r;
  }

  void error(int line, std::string msg) {
    errors_.push_back({line, std::move(msg)});
  }

  void parse_header() {
    auto line = cursor_.next_line();
    if (!line) {
      error(cursor_.line, "empty program: expected 'program seed=<n>' header");
      return;
    }
    auto toks = split_tokens(*line);
    if (toks.size() != 2 || toks[0] != "program" ||
        toks[1].rfind("seed=", 0) != 0) {
      error(cursor_.line, "expected 'program seed=<n>' header");
      return;
    }
    auto seed = parse_literal(std::string_view(toks[1]).substr(5));
    if (!seed) {
      error(cursor_.line, "bad seed literal in program header");
      return;
    }
    program_.loc_seed = *seed;
  }

  // Returns false on a parse error that makes further progress pointless.
  bool parse_function(std::string_view first_line) {
    int fn_line = cursor_.line;
    std::string sig(first_line);
    Function fn;
    fn.line = fn_line;
    std::string_view rest = sig;
    if (rest.rfind("entry ", 0) == 0) {
      fn.is_entry = true;
      rest.remove_prefix(6);
    }
    if (rest.rfind("fn ", 0) != 0) {
      error(fn_line, "expected function definition, got: " + sig);
      return false;
    }
    rest.remove_prefix(3);
    size_t lparen = rest.find('(');
    size_t rparen = rest.find(')');
    size_t arrow = rest.find("->");
    size_t brace = rest.find('{');
    if (lparen == std::string_view::npos || rparen == std::string_view::npos ||
        arrow == std::string_view::npos || brace == std::string_view::npos ||
        !(lparen < rparen && rparen < arrow && arrow < brace)) {
      error(fn_line, "malformed function signature (want 'fn name(a: t, ...) -> t {')");
      return false;
    }
    std::string name(rest.substr(0, lparen));
    while (!name.empty() && name.back() == ' ') name.pop_back();
    if (!is_ident(name)) {
      error(fn_line, "bad function name '" + name + "'");
      return false;
    }
    fn.name = name;
    // Params: "name: type" pairs; the colon may stick to either token.
    std::string plist(rest.substr(lparen + 1, rparen - lparen - 1));
    for (char& c : plist)
      if (c == ':') c = ' ';
    auto ptoks = split_tokens(plist);
    if (ptoks.size() % 2 != 0) {
      error(fn_line, "malformed parameter list '" + plist + "'");
      return false;
    }
    for (size_t i = 0; i < ptoks.size(); i += 2) {
      auto ty = ScalarType::parse(ptoks[i + 1]);
      if (!is_ident(ptoks[i]) || !ty) {
        error(fn_line, "malformed parameter '" + ptoks[i] + ": " + ptoks[i + 1] + "'");
        return false;
      }
      fn.params.push_back({ptoks[i], *ty});
    }
    // Return type.
    std::string rt(rest.substr(arrow + 2, brace - arrow - 2));
    rt.erase(std::remove_if(rt.begin(), rt.end(), ::isspace), rt.end());
    auto rty = ScalarType::parse(rt);
    if (!rty) {
      error(fn_line, "bad return type '" + rt + "'");
      return false;
    }
    fn.ret_type = *rty;

    // Body: blocks until '}'.
    BasicBlock* block = nullptr;
    while (true) {
      auto line = cursor_.next_line();
      if (!line) {
        error(cursor_.line, "unexpected end of file inside fn " + fn.name);
        return false;
      }
      if (*line == "}") break;
      if (line->back() == ':' && line->find(' ') == std::string_view::npos &&
          line->find('=') == std::string_view::npos) {
        std::string label(line->substr(0, line->size() - 1));
        if (!is_ident(label)) {
          error(cursor_.line, "bad block label '" + label + "'");
          return false;
        }
        fn.blocks.push_back({});
        block = &fn.blocks.back();
        block->id = static_cast<int>(fn.blocks.size()) - 1;
        block->label = label;
        block->line = cursor_.line;
        continue;
      }
      if (!block) {
        error(cursor_.line, "instruction before first block label in fn " + fn.name);
        return false;
      }
      if (!parse_instruction(*line, *block)) return false;
    }
    program_.functions.push_back(std::move(fn));
    return true;
  }

  bool parse_instruction(std::string_view line, BasicBlock& block) {
    int ln = cursor_.line;
    Instruction in;
    in.line = ln;
    std::string s(line);
    size_t eq = s.find(" = ");
    std::string rhs;
    if (eq != std::string::npos) {
      // "<name>: <type> = <op> ..."
      std::string lhs = s.substr(0, eq);
      rhs = s.substr(eq + 3);
      size_t colon = lhs.find(':');
      if (colon == std::string::npos) {
        error(ln, "result is missing a type annotation: " + s);
        return false;
      }
      std::string rname = lhs.substr(0, colon);
      std::string rtype = lhs.substr(colon + 1);
      rname.erase(std::remove_if(rname.begin(), rname.end(), ::isspace), rname.end());
      rtype.erase(std::remove_if(rtype.begin(), rtype.end(), ::isspace), rtype.end());
      auto ty = ScalarType::parse(rtype);
      if (!is_ident(rname) || !ty) {
        error(ln, "malformed result '" + lhs + "'");
        return false;
      }
      in.result_name = rname;
      in.type = *ty;
      in.result = 0;  // resolved during validation
    } else {
      rhs = s;
    }

    auto toks = split_tokens(rhs);
    if (toks.empty()) {
      error(ln, "empty instruction");
      return false;
    }
    std::string opname = toks[0];

    if (opname.rfind("icmp.", 0) == 0) {
      std::string p = opname.substr(5);
      if (p == "le") in.pred = IcmpPred::Le;
      else if (p == "lt") in.pred = IcmpPred::Lt;
      else if (p == "eq") in.pred = IcmpPred::Eq;
      else if (p == "ne") in.pred = IcmpPred::Ne;
      else {
        error(ln, "unknown icmp predicate '" + p + "'");
        return false;
      }
      if (in.result_name.empty() || toks.size() != 3) {
        error(ln, "icmp wants a result and two operands");
        return false;
      }
      in.op = Opcode::Icmp;
      for (size_t i = 1; i < toks.size(); ++i)
        if (!add_operand(in, toks[i], ln)) return false;
      block.instrs.push_back(std::move(in));
      return true;
    }

    if (opname == "phi") {
      // phi [label: value] [label: value] ...
      in.op = Opcode::Phi;
      if (in.result_name.empty()) {
        error(ln, "phi wants a result");
        return false;
      }
      std::string body = rhs.substr(3);
      size_t pos = 0;
      while (true) {
        size_t lb = body.find('[', pos);
        if (lb == std::string::npos) break;
        size_t rb = body.find(']', lb);
        size_t colon = body.find(':', lb);
        if (rb == std::string::npos || colon == std::string::npos || colon > rb) {
          error(ln, "malformed phi incoming list");
          return false;
        }
        std::string lbl = body.substr(lb + 1, colon - lb - 1);
        std::string val = body.substr(colon + 1, rb - colon - 1);
        auto strip = [](std::string& x) {
          x.erase(std::remove_if(x.begin(), x.end(), ::isspace), x.end());
        };
        strip(lbl);
        strip(val);
        if (!is_ident(lbl)) {
          error(ln, "bad phi incoming label '" + lbl + "'");
          return false;
        }
        in.phi_labels.push_back(lbl);
        if (!add_operand(in, val, ln)) return false;
        pos = rb + 1;
      }
      if (in.operands.empty()) {
        error(ln, "phi needs at least one incoming value");
        return false;
      }
      block.instrs.push_back(std::move(in));
      return true;
    }

    if (opname == "call") {
      in.op = Opcode::Call;
      if (toks.size() < 2 || !is_ident(toks[1])) {
        error(ln, "call wants a callee name");
        return false;
      }
      if (in.result_name.empty()) {
        error(ln, "call wants a result (functions return a value)");
        return false;
      }
      in.callee_name = toks[1];
      for (size_t i = 2; i < toks.size(); ++i)
        if (!add_operand(in, toks[i], ln)) return false;
      block.instrs.push_back(std::move(in));
      return true;
    }

    if (opname == "br") {
      if (toks.size() != 4) {
        error(ln, "br wants 'br cond, label, label'");
        return false;
      }
      in.op = Opcode::Br;
      if (!add_operand(in, toks[1], ln)) return false;
      in.target_labels = {toks[2], toks[3]};
      block.instrs.push_back(std::move(in));
      return true;
    }
    if (opname == "jmp") {
      if (toks.size() != 2) {
        error(ln, "jmp wants one target label");
        return false;
      }
      in.op = Opcode::Jmp;
      in.target_labels = {toks[1]};
      block.instrs.push_back(std::move(in));
      return true;
    }

    auto it = op_table().find(opname);
    if (it == op_table().end()) {
      error(ln, "unknown opcode '" + opname + "'");
      return false;
    }
    const OpSpec& spec = it->second;
    in.op = spec.op;
    int nops = static_cast<int>(toks.size()) - 1;
    if (nops < spec.min_operands ||
        (spec.max_operands >= 0 && nops > spec.max_operands)) {
      error(ln, std::string(opname) + ": wrong operand count");
      return false;
    }
    if (spec.has_result != !in.result_name.empty()) {
      error(ln, std::string(opname) +
                    (spec.has_result ? " wants a result" : " takes no result"));
      return false;
    }
    for (size_t i = 1; i < toks.size(); ++i)
      if (!add_operand(in, toks[i], ln)) return false;
    if (in.op == Opcode::Const && in.operands[0].is_value()) {
      error(ln, "const wants a literal operand");
      return false;
    }
    block.instrs.push_back(std::move(in));
    return true;
  }

  bool add_operand(Instruction& in, const std::string& tok, int ln) {
    if (auto lit = parse_literal(tok)) {
      in.operands.push_back(Operand::make_literal(*lit));
      return true;
    }
    if (is_ident(tok)) {
      in.operands.push_back(Operand::make_value(-1, tok));
      return true;
    }
    error(ln, "bad operand '" + tok + "'");
    return false;
  }

  // ---- validation --------------------------------------------------------

  void validate() {
    int entries = 0;
    for (size_t i = 0; i < program_.functions.size(); ++i) {
      Function& f = program_.functions[i];
      f.index = static_cast<int>(i);
      if (program_.function_index.count(f.name))
        error(f.line, "duplicate function '" + f.name + "'");
      program_.function_index[f.name] = static_cast<int>(i);
      if (f.is_entry) {
        ++entries;
        program_.entry_index = static_cast<int>(i);
      }
    }
    if (entries != 1)
      error(0, "program must mark exactly one entry function, found " +
                   std::to_string(entries));
    if (!errors_.empty()) return;

    for (Function& f : program_.functions) validate_function(f);
  }

  void validate_function(Function& f) {
    if (f.blocks.empty()) {
      error(f.line, "fn " + f.name + ": empty function body, missing terminator");
      return;
    }
    // Value table: params, then results in textual order; SSA single
    // assignment is checked as the table is built.
    for (const Param& p : f.params) {
      if (f.value_index.count(p.name)) {
        error(f.line, "fn " + f.name + ": duplicate parameter '" + p.name +
                          "' (each value must be assigned only once)");
        continue;
      }
      f.value_index[p.name] = f.num_values();
      f.value_names.push_back(p.name);
      f.value_types.push_back(p.type);
      f.def_block.push_back(-1);
    }
    bool structure_ok = true;
    std::unordered_map<std::string, int> labels;
    for (BasicBlock& b : f.blocks) {
      if (labels.count(b.label)) {
        error(b.line, "duplicate block label '" + b.label + "'");
        structure_ok = false;
      }
      labels[b.label] = b.id;
      if (b.instrs.empty()) {
        error(b.line, "block '" + b.label + "': empty block, missing terminator");
        structure_ok = false;
        continue;
      }
      for (size_t k = 0; k < b.instrs.size(); ++k) {
        Instruction& in = b.instrs[k];
        bool last = (k + 1 == b.instrs.size());
        if (is_terminator(in.op) && !last) {
          error(in.line, "control-flow instruction before end of block '" +
                             b.label + "'");
          structure_ok = false;
        }
        if (last && !is_terminator(in.op)) {
          error(in.line, "block '" + b.label + "' is missing terminator");
          structure_ok = false;
        }
        if (in.op == Opcode::Phi && k != 0) {
          // phis must form a prefix of the block
          if (b.instrs[k - 1].op != Opcode::Phi) {
            error(in.line, "phi must appear at block head");
            structure_ok = false;
          }
        }
        if (in.op == Opcode::Store && !in.operands[1].is_value()) {
          error(in.line, "store value must be an SSA value, not a literal");
          structure_ok = false;
        }
        if (in.op == Opcode::Br && !in.operands[0].is_value()) {
          error(in.line, "br condition must be an SSA value");
          structure_ok = false;
        }
        if (in.op == Opcode::Gep && in.operands.size() < 2) {
          error(in.line, "gep wants an address plus at least one index");
          structure_ok = false;
        }
        if (!in.result_name.empty()) {
          if (f.value_index.count(in.result_name)) {
            error(in.line, "value '" + in.result_name +
                               "' assigned more than once (SSA requires each "
                               "value assigned only once)");
            structure_ok = false;
          } else {
            in.result = f.num_values();
            f.value_index[in.result_name] = in.result;
            f.value_names.push_back(in.result_name);
            f.value_types.push_back(in.type);
            f.def_block.push_back(b.id);
          }
        }
      }
    }
    if (!structure_ok) return;

    // Resolve labels, callees and operands.
    for (BasicBlock& b : f.blocks) {
      for (Instruction& in : b.instrs) {
        for (const std::string& lbl : in.target_labels) {
          auto it = labels.find(lbl);
          if (it == labels.end()) {
            error(in.line, "unknown branch target '" + lbl + "'");
            structure_ok = false;
          } else {
            in.targets.push_back(it->second);
          }
        }
        for (const std::string& lbl : in.phi_labels) {
          auto it = labels.find(lbl);
          if (it == labels.end()) {
            error(in.line, "unknown phi incoming label '" + lbl + "'");
            structure_ok = false;
          } else {
            in.phi_blocks.push_back(it->second);
          }
        }
        if (in.op == Opcode::Call) {
          int idx = -1;
          auto it = program_.function_index.find(in.callee_name);
          if (it == program_.function_index.end()) {
            error(in.line, "call to undefined function '" + in.callee_name + "'");
            structure_ok = false;
          } else {
            idx = it->second;
            const Function& callee = program_.functions[idx];
            if (callee.params.size() != in.operands.size()) {
              error(in.line, "call to '" + in.callee_name + "' wants " +
                                 std::to_string(callee.params.size()) +
                                 " arguments, got " +
                                 std::to_string(in.operands.size()));
              structure_ok = false;
            }
          }
          in.callee = idx;
        }
        for (Operand& o : in.operands) {
          if (!o.is_value()) continue;
          int idx = f.find_value(o.name);
          if (idx < 0) {
            error(in.line, "use of undefined value '" + o.name + "'");
            structure_ok = false;
          }
          o.value = idx;
        }
        if (in.result >= 0 && in.op != Opcode::Phi) {
          for (const Operand& o : in.operands)
            if (o.is_value() && o.value == in.result)
              error(in.line, "value '" + in.result_name +
                                 "' used before it is defined");
        }
      }
    }
    if (!structure_ok) return;

    // Reachability: the validator flags dead blocks as errors.
    Cfg cfg = build_cfg(f);
    if (!cfg.pred[0].empty()) {
      error(f.blocks[0].line,
            "root block '" + f.blocks[0].label + "' must have no predecessors");
      return;
    }
    std::vector<bool> seen(f.blocks.size(), false);
    std::vector<int> stack{0};
    seen[0] = true;
    while (!stack.empty()) {
      int b = stack.back();
      stack.pop_back();
      for (int s : cfg.succ[b])
        if (!seen[s]) seen[s] = true, stack.push_back(s);
    }
    bool all_reachable = true;
    for (const BasicBlock& b : f.blocks)
      if (!seen[b.id]) {
        error(b.line, "block '" + b.label + "' is unreachable from the root (dead)");
        all_reachable = false;
      }
    if (!all_reachable) return;

    // Phi incoming lists must match predecessors exactly.
    for (BasicBlock& b : f.blocks) {
      for (Instruction& in : b.instrs) {
        if (in.op != Opcode::Phi) continue;
        std::vector<int> preds = cfg.pred[b.id];
        std::sort(preds.begin(), preds.end());
        preds.erase(std::unique(preds.begin(), preds.end()), preds.end());
        std::vector<int> incoming = in.phi_blocks;
        std::sort(incoming.begin(), incoming.end());
        if (incoming != preds) {
          error(in.line, "phi in block '" + b.label +
                             "' must name each predecessor exactly once");
        }
      }
    }

    // SSA dominance: every use is dominated by its definition.
    DominatorTree dom = compute_dominator_tree(cfg);
    std::vector<int> def_pos(f.num_values(), -1);  // position within block
    for (const BasicBlock& b : f.blocks)
      for (size_t k = 0; k < b.instrs.size(); ++k)
        if (b.instrs[k].result >= 0)
          def_pos[b.instrs[k].result] = static_cast<int>(k);

    for (const BasicBlock& b : f.blocks) {
      for (size_t k = 0; k < b.instrs.size(); ++k) {
        const Instruction& in = b.instrs[k];
        for (size_t oi = 0; oi < in.operands.size(); ++oi) {
          const Operand& o = in.operands[oi];
          if (!o.is_value()) continue;
          int db = f.def_block[o.value];
          bool ok;
          if (in.op == Opcode::Phi) {
            // Incoming values must dominate their predecessor block.
            int pred = in.phi_blocks[oi];
            ok = db == -1 || dom.dominates(db, pred);
          } else if (db == -1) {
            ok = true;  // parameter
          } else if (db == b.id) {
            ok = def_pos[o.value] < static_cast<int>(k);
          } else {
            ok = dom.dominates(db, b.id);
          }
          if (!ok)
            error(in.line, "value '" + o.name +
                               "' is not defined before this use (definition "
                               "does not dominate it)");
        }
      }
    }
  }

  void assign_locs() {
    size_t total = 0;
    for (const Function& f : program_.functions) total += f.blocks.size();
    if (total > 65536) {
      error(0, "program has more than 65536 basic blocks");
      return;
    }
    // Random-but-fixed 16-bit labels, drawn without replacement from the
    // header seed so they are stable across runs over the same file.
    Rng rng(program_.loc_seed ^ 0x1c0ffee1c0ffeeull);
    std::vector<bool> used(65536, false);
    for (Function& f : program_.functions) {
      for (BasicBlock& b : f.blocks) {
        uint16_t loc;
        do {
          loc = static_cast<uint16_t>(rng.next() & 0xffff);
        } while (used[loc]);
        used[loc] = true;
        b.loc = loc;
      }
    }
  }

  Cursor cursor_;
  Program program_;
  std::vector<Diagnostic> errors_;
};

}  // namespace

ParseResult parse_program(std::string_view text) {
  return Parser(text).run();
}

std::vector<int> block_state_values(const Function& f, const BasicBlock& b) {
  std::vector<int> out;
  std::vector<bool> seen(f.num_values(), false);
  auto add = [&](int v) {
    if (v >= 0 && !seen[v]) {
      seen[v] = true;
      out.push_back(v);
    }
  };
  for (const Instruction& in : b.instrs) {
    if (in.op != Opcode::Phi)
      for (const Operand& o : in.operands)
        if (o.is_value()) add(o.value);
    add(in.result);
  }
  return out;
}

Cfg Cfg::from_edges(int num_blocks,
                    const std::vector<std::pair<int, int>>& edges) {
  Cfg cfg;
  cfg.succ.resize(num_blocks);
  cfg.pred.resize(num_blocks);
  for (auto [a, b] : edges) {
    cfg.succ[a].push_back(b);
    cfg.pred[b].push_back(a);
  }
  return cfg;
}

Cfg build_cfg(const Function& f) {
  Cfg cfg;
  cfg.succ.resize(f.blocks.size());
  cfg.pred.resize(f.blocks.size());
  for (const BasicBlock& b : f.blocks) {
    for (int t : b.terminator().targets) {
      cfg.succ[b.id].push_back(t);
      cfg.pred[t].push_back(b.id);
    }
  }
  return cfg;
}

// Iterative dominator computation over reverse postorder (the Cooper,
// Harvey and Kennedy "engineered" scheme).
DominatorTree compute_dominator_tree(const Cfg& cfg) {
  const int n = cfg.num_blocks();
  std::vector<int> postorder;
  std::vector<int> po_num(n, -1);
  {
    std::vector<int> state(n, 0);
    std::vector<std::pair<int, size_t>> stack{{0, 0}};
    state[0] = 1;
    while (!stack.empty()) {
      auto& [b, i] = stack.back();
      if (i < cfg.succ[b].size()) {
        int s = cfg.succ[b][i++];
        if (!state[s]) {
          state[s] = 1;
          stack.push_back({s, 0});
        }
      } else {
        po_num[b] = static_cast<int>(postorder.size());
        postorder.push_back(b);
        stack.pop_back();
      }
    }
  }
  for (int b = 0; b < n; ++b)
    if (po_num[b] < 0)
      throw std::invalid_argument("unreachable block " + std::to_string(b));

  std::vector<int> idom(n, -1);
  idom[0] = 0;
  auto intersect = [&](int a, int b) {
    while (a != b) {
      while (po_num[a] < po_num[b]) a = idom[a];
      while (po_num[b] < po_num[a]) b = idom[b];
    }
    return a;
  };
  bool changed = true;
  while (changed) {
    changed = false;
    for (int i = n - 1; i >= 0; --i) {
      int b = postorder[i];
      if (b == 0) continue;
      int new_idom = -1;
      for (int p : cfg.pred[b]) {
        if (idom[p] == -1) continue;
        new_idom = new_idom == -1 ? p : intersect(p, new_idom);
      }
      if (new_idom != idom[b]) {
        idom[b] = new_idom;
        changed = true;
      }
    }
  }
  DominatorTree tree;
  tree.idom = std::move(idom);
  tree.idom[0] = -1;
  return tree;
}

}  // namespace invscov
