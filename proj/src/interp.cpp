#include "invscov/interp.hpp"

#include <cassert>

namespace invscov {

const char* fault_kind_name(FaultKind k) {
  switch (k) {
    case FaultKind::BugInstruction: return "bug-instruction";
    case FaultKind::DivByZero: return "div-by-zero";
    case FaultKind::OobMemory: return "oob-memory";
    case FaultKind::OobInput: return "oob-input";
  }
  return "?";
}

bool is_runtime_helper(std::string_view function_name) {
  return function_name.rfind("rt_", 0) == 0;
}

uint64_t callstack_hash(const std::vector<StackFrameRef>& frames) {
  // FNV-1a over the stripped, ordered function names.
  uint64_t h = 0xcbf29ce484222325ull;
  auto mix = [&](char c) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ull;
  };
  for (const StackFrameRef& fr : frames) {
    if (is_runtime_helper(fr.function)) continue;
    for (char c : fr.function) mix(c);
    mix('\x1f');
  }
  return h;
}

namespace {

class Machine {
 public:
  Machine(const Program& p, std::span<const uint8_t> input,
          const ExecHooks& hooks, const ExecOptions& opts)
      : program_(p), input_(input), hooks_(hooks), opts_(opts) {
    memory_.assign(opts.memory_size, 0);
  }

  ExecutionResult run() {
    push_frame(program_.entry_index, opts_.entry_args, -1, -1);
    enter_block();
    while (!done_) step();
    result_.steps = steps_;
    result_.blocks_executed = blocks_executed_;
    return result_;
  }

 private:
  // Operand value as a 64-bit two's-complement word. Named values are
  // sign/zero-extended from their declared type; literals are used as
  // written (the parser already wrapped them to 64 bits).
  uint64_t word_of(const Frame& fr, const Operand& o) const {
    if (!o.is_value()) return o.literal;
    assert(fr.bound[o.value] && "use of unbound SSA value");
    return fr.fn->value_types[o.value].extend64(fr.regs[o.value]);
  }

  // Canonical (width-truncated) value of a named operand.
  uint64_t raw_of(const Frame& fr, const Operand& o) const {
    if (!o.is_value()) return o.literal;
    assert(fr.bound[o.value]);
    return fr.regs[o.value];
  }

  Wide math_of(const Frame& fr, const Operand& o, ScalarType fallback) const {
    if (!o.is_value()) return fallback.math_value(fallback.canonicalize(o.literal));
    const ScalarType t = fr.fn->value_types[o.value];
    return t.math_value(fr.regs[o.value]);
  }

  void bind(Frame& fr, const Instruction& in, uint64_t word) {
    const uint64_t canonical = in.type.canonicalize(word);
    fr.regs[in.result] = canonical;
    fr.bound[in.result] = 1;
    if (hooks_.on_instruction) {
      pending_event_.has_binding = true;
      pending_event_.binding_name = in.result_name;
      pending_event_.binding_value = canonical;
    }
  }

  void fault(FaultKind kind) {
    Frame& fr = frames_.back();
    result_.outcome = ExecutionResult::Outcome::Fault;
    result_.fault.kind = kind;
    result_.fault.function = fr.fn->name;
    result_.fault.block = fr.block;
    result_.fault.instr = instr_;
    for (const Frame& f : frames_)
      result_.fault.call_stack.push_back({f.fn->name, f.block});
    done_ = true;
  }

  void exhaust() {
    result_.outcome = ExecutionResult::Outcome::BudgetExhausted;
    done_ = true;
  }

  void push_frame(int fn_index, std::span<const uint64_t> args, int ret_block,
                  int ret_instr) {
    const Function& fn = program_.functions[fn_index];
    Frame fr;
    fr.fn = &fn;
    fr.regs.assign(fn.num_values(), 0);
    fr.bound.assign(fn.num_values(), 0);
    fr.ret_block = ret_block;
    fr.ret_instr = ret_instr;
    assert(args.size() == fn.params.size());
    for (size_t i = 0; i < args.size(); ++i) {
      fr.regs[i] = fn.params[i].type.canonicalize(args[i]);
      fr.bound[i] = 1;
    }
    frames_.push_back(std::move(fr));
  }

  void enter_block() {
    Frame& fr = frames_.back();
    ++blocks_executed_;
    instr_ = 0;
    if (hooks_.on_block_enter)
      hooks_.on_block_enter(*fr.fn, fr.fn->blocks[fr.block]);
  }

  void exit_block() {
    Frame& fr = frames_.back();
    if (hooks_.on_block_exit)
      hooks_.on_block_exit(*fr.fn, fr.fn->blocks[fr.block], fr);
  }

  void jump_to(int target) {
    Frame& fr = frames_.back();
    fr.prev_block = fr.block;
    fr.block = target;
    enter_block();
  }

  void step() {
    if (steps_ >= opts_.step_budget) {
      exhaust();
      return;
    }
    ++steps_;
    Frame& fr = frames_.back();
    const BasicBlock& block = fr.fn->blocks[fr.block];
    const Instruction& in = block.instrs[instr_];
    if (hooks_.on_instruction)
      pending_event_ = InstrEvent{fr.fn, fr.block, instr_};

    switch (in.op) {
      case Opcode::Const:
        bind(fr, in, in.operands[0].literal);
        break;
      case Opcode::Add:
        bind(fr, in, word_of(fr, in.operands[0]) + word_of(fr, in.operands[1]));
        break;
      case Opcode::Sub:
        bind(fr, in, word_of(fr, in.operands[0]) - word_of(fr, in.operands[1]));
        break;
      case Opcode::Mul:
        bind(fr, in, word_of(fr, in.operands[0]) * word_of(fr, in.operands[1]));
        break;
      case Opcode::Div:
      case Opcode::Rem: {
        // Interpret per operand type (literals adopt the result type), do the
        // math wide, wrap into the result type. C-style truncating division.
        Wide a = math_of(fr, in.operands[0], in.type);
        Wide b = math_of(fr, in.operands[1], in.type);
        if (b == 0) {
          fault(FaultKind::DivByZero);
          return;
        }
        Wide r = in.op == Opcode::Div ? a / b : a % b;
        bind(fr, in, static_cast<uint64_t>(r));
        break;
      }
      case Opcode::And:
        bind(fr, in, word_of(fr, in.operands[0]) & word_of(fr, in.operands[1]));
        break;
      case Opcode::Or:
        bind(fr, in, word_of(fr, in.operands[0]) | word_of(fr, in.operands[1]));
        break;
      case Opcode::Xor:
        bind(fr, in, word_of(fr, in.operands[0]) ^ word_of(fr, in.operands[1]));
        break;
      case Opcode::Shl: {
        uint64_t amount = word_of(fr, in.operands[1]) & 63;
        bind(fr, in, word_of(fr, in.operands[0]) << amount);
        break;
      }
      case Opcode::Shr: {
        uint64_t amount = word_of(fr, in.operands[1]) & 63;
        uint64_t a = word_of(fr, in.operands[0]);
        bool arithmetic = in.operands[0].is_value()
                              ? fr.fn->value_types[in.operands[0].value].is_signed
                              : in.type.is_signed;
        uint64_t r = arithmetic
                         ? static_cast<uint64_t>(static_cast<int64_t>(a) >> amount)
                         : a >> amount;
        bind(fr, in, r);
        break;
      }
      case Opcode::Neg:
        bind(fr, in, 0 - word_of(fr, in.operands[0]));
        break;
      case Opcode::Not:
        bind(fr, in, ~word_of(fr, in.operands[0]));
        break;
      case Opcode::Cast:
        bind(fr, in, word_of(fr, in.operands[0]));
        break;
      case Opcode::Icmp: {
        // Literals adopt the other operand's type so signedness is explicit.
        ScalarType lt = in.operands[0].is_value()
                            ? fr.fn->value_types[in.operands[0].value]
                            : (in.operands[1].is_value()
                                   ? fr.fn->value_types[in.operands[1].value]
                                   : ScalarType{true, 64});
        ScalarType rt = in.operands[1].is_value()
                            ? fr.fn->value_types[in.operands[1].value]
                            : lt;
        Wide a = math_of(fr, in.operands[0], lt);
        Wide b = math_of(fr, in.operands[1], rt);
        bool r = false;
        switch (in.pred) {
          case IcmpPred::Le: r = a <= b; break;
          case IcmpPred::Lt: r = a < b; break;
          case IcmpPred::Eq: r = a == b; break;
          case IcmpPred::Ne: r = a != b; break;
        }
        bind(fr, in, r ? 1 : 0);
        break;
      }
      case Opcode::Phi: {
        // All phis at the block head read their incoming values against the
        // pre-block bindings; gather first, then commit, so phi-to-phi
        // references see the old values.
        const BasicBlock& bb = block;
        size_t nphis = 0;
        while (nphis < bb.instrs.size() && bb.instrs[nphis].op == Opcode::Phi)
          ++nphis;
        std::vector<uint64_t> incoming(nphis);
        for (size_t k = 0; k < nphis; ++k) {
          const Instruction& phi = bb.instrs[k];
          bool found = false;
          for (size_t i = 0; i < phi.phi_blocks.size(); ++i) {
            if (phi.phi_blocks[i] == fr.prev_block) {
              incoming[k] = word_of(fr, phi.operands[i]);
              found = true;
              break;
            }
          }
          assert(found && "phi has no incoming for taken predecessor");
          (void)found;
        }
        for (size_t k = 0; k < nphis; ++k) {
          const Instruction& phi = bb.instrs[k];
          if (hooks_.on_instruction && k > 0) {
            pending_event_ = InstrEvent{fr.fn, fr.block, static_cast<int>(k)};
          }
          bind(fr, phi, incoming[k]);
          if (hooks_.on_instruction && k + 1 < nphis) {
            hooks_.on_instruction(pending_event_);
          }
        }
        steps_ += nphis - 1;
        instr_ += static_cast<int>(nphis) - 1;
        break;
      }
      case Opcode::Load: {
        uint64_t addr = raw_of(fr, in.operands[0]);
        size_t width = in.type.bits / 8;
        if (addr > memory_.size() || memory_.size() - addr < width) {
          fault(FaultKind::OobMemory);
          return;
        }
        uint64_t v = 0;
        for (size_t i = 0; i < width; ++i)
          v |= static_cast<uint64_t>(memory_[addr + i]) << (8 * i);
        bind(fr, in, v);
        break;
      }
      case Opcode::Store: {
        uint64_t addr = raw_of(fr, in.operands[0]);
        const Operand& vo = in.operands[1];
        ScalarType vt = fr.fn->value_types[vo.value];
        size_t width = vt.bits / 8;
        if (addr > memory_.size() || memory_.size() - addr < width) {
          fault(FaultKind::OobMemory);
          return;
        }
        uint64_t v = fr.regs[vo.value];
        for (size_t i = 0; i < width; ++i)
          memory_[addr + i] = static_cast<uint8_t>(v >> (8 * i));
        if (hooks_.on_instruction) {
          pending_event_.has_store = true;
          pending_event_.store_addr = addr;
          pending_event_.store_value = v;
          pending_event_.store_width = static_cast<uint8_t>(width);
        }
        break;
      }
      case Opcode::Gep: {
        uint64_t addr = raw_of(fr, in.operands[0]);
        for (size_t i = 1; i < in.operands.size(); ++i)
          addr += word_of(fr, in.operands[i]);
        bind(fr, in, addr);
        break;
      }
      case Opcode::InputRead: {
        uint64_t idx = raw_of(fr, in.operands[0]);
        if (idx >= input_.size()) {
          fault(FaultKind::OobInput);
          return;
        }
        bind(fr, in, input_[idx]);
        break;
      }
      case Opcode::InputLen:
        bind(fr, in, input_.size());
        break;
      case Opcode::Bug:
        fault(FaultKind::BugInstruction);
        return;
      case Opcode::Call: {
        if (frames_.size() >= opts_.max_call_depth) {
          exhaust();
          return;
        }
        std::vector<uint64_t> args;
        args.reserve(in.operands.size());
        const Function& callee = program_.functions[in.callee];
        for (size_t i = 0; i < in.operands.size(); ++i) {
          const Operand& o = in.operands[i];
          uint64_t w = o.is_value() ? word_of(fr, o) : o.literal;
          args.push_back(callee.params[i].type.canonicalize(w));
        }
        if (hooks_.on_instruction) hooks_.on_instruction(pending_event_);
        push_frame(in.callee, args, fr.block, instr_);
        enter_block();
        return;  // resumes at the callee's root block
      }
      case Opcode::Ret: {
        uint64_t v = in.operands[0].is_value() ? word_of(fr, in.operands[0])
                                               : in.operands[0].literal;
        v = fr.fn->ret_type.canonicalize(v);
        if (hooks_.on_instruction) hooks_.on_instruction(pending_event_);
        exit_block();
        int ret_block = fr.ret_block;
        int ret_instr = fr.ret_instr;
        frames_.pop_back();
        if (frames_.empty()) {
          result_.exit_value = v;
          done_ = true;
          return;
        }
        Frame& caller = frames_.back();
        // Rebind the awaiting call result and resume after it.
        assert(caller.block == ret_block);
        (void)ret_block;
        const Instruction& call =
            caller.fn->blocks[caller.block].instrs[ret_instr];
        caller.regs[call.result] = call.type.canonicalize(v);
        caller.bound[call.result] = 1;
        instr_ = ret_instr + 1;
        return;
      }
      case Opcode::Br: {
        uint64_t c = raw_of(fr, in.operands[0]);
        if (hooks_.on_instruction) hooks_.on_instruction(pending_event_);
        exit_block();
        jump_to(c != 0 ? in.targets[0] : in.targets[1]);
        return;
      }
      case Opcode::Jmp: {
        if (hooks_.on_instruction) hooks_.on_instruction(pending_event_);
        exit_block();
        jump_to(in.targets[0]);
        return;
      }
    }
    if (hooks_.on_instruction) hooks_.on_instruction(pending_event_);
    ++instr_;
  }

  const Program& program_;
  std::span<const uint8_t> input_;
  const ExecHooks& hooks_;
  const ExecOptions& opts_;
  std::vector<uint8_t> memory_;
  std::vector<Frame> frames_;
  ExecutionResult result_;
  InstrEvent pending_event_{};
  uint64_t steps_ = 0;
  uint64_t blocks_executed_ = 0;
  int instr_ = 0;
  bool done_ = false;
};

}  // namespace

ExecutionResult execute(const Program& p, std::span<const uint8_t> input,
                        const ExecHooks& hooks, const ExecOptions& opts) {
  assert(opts.step_budget > 0);
  Machine m(p, input, hooks, opts);
  return m.run();
}

ExecutionResult execute(const Program& p, std::span<const uint8_t> input,
                        uint64_t step_budget) {
  ExecHooks hooks;
  ExecOptions opts;
  opts.step_budget = step_budget;
  return execute(p, input, hooks, opts);
}

std::vector<std::pair<std::string, uint64_t>> collect_block_state(
    const Function& f, const BasicBlock& b, const Frame& frame) {
  std::vector<std::pair<std::string, uint64_t>> out;
  for (int v : block_state_values(f, b)) {
    assert(frame.bound[v]);
    out.emplace_back(f.value_names[v], frame.regs[v]);
  }
  return out;
}

}  // namespace invscov
