#pragma once

// Deterministic interpreter over the mini-IR. Programs consume the fuzzer
// input through input_read/input_len; all other state is private to one
// execution, so identical (program, input, hooks) always produce the same
// result and the same hook-event sequence.

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "invscov/ir.hpp"

namespace invscov {

enum class FaultKind { BugInstruction, DivByZero, OobMemory, OobInput };

const char* fault_kind_name(FaultKind k);

struct StackFrameRef {
  std::string function;
  int block = 0;
};

struct FaultInfo {
  FaultKind kind = FaultKind::BugInstruction;
  std::string function;
  int block = 0;
  int instr = 0;
  std::vector<StackFrameRef> call_stack;  // outermost first, never empty
};

struct ExecutionResult {
  enum class Outcome { Ok, Fault, BudgetExhausted };
  Outcome outcome = Outcome::Ok;
  FaultInfo fault;            // valid when outcome == Fault
  uint64_t exit_value = 0;    // valid when outcome == Ok
  uint64_t blocks_executed = 0;
  uint64_t steps = 0;

  bool ok() const { return outcome == Outcome::Ok; }
  bool faulted() const { return outcome == Outcome::Fault; }
};

// One function activation. `regs` is indexed by the function's value table;
// `bound` tracks which values have been assigned (SSA guarantees a value is
// rebound only when its unique defining instruction re-executes).
struct Frame {
  const Function* fn = nullptr;
  int block = 0;
  int prev_block = -1;  // for phi resolution
  std::vector<uint64_t> regs;
  std::vector<uint8_t> bound;
  std::vector<uint16_t> check_cache;  // per-activation invariant outcomes
  int ret_instr = -1;   // caller instruction index awaiting this activation
  int ret_block = -1;
};

// Per-instruction observation, used by the reference tracer.
struct InstrEvent {
  const Function* fn;
  int block;
  int instr;
  bool has_binding = false;
  std::string binding_name;
  uint64_t binding_value = 0;
  bool has_store = false;
  uint64_t store_addr = 0;
  uint64_t store_value = 0;
  uint8_t store_width = 0;
};

struct ExecHooks {
  // Fires on entry to every executed block with its location label.
  std::function<void(const Function&, const BasicBlock&)> on_block_enter;
  // Fires exactly once per completed block, after its terminator evaluated;
  // the frame exposes the block's values.
  std::function<void(const Function&, const BasicBlock&, Frame&)> on_block_exit;
  // Reference tracer hook; fires after every retired instruction.
  std::function<void(const InstrEvent&)> on_instruction;
};

struct ExecOptions {
  uint64_t step_budget = 1'000'000;
  size_t memory_size = 65536;
  size_t max_call_depth = 1024;  // exceeding is reported as budget exhaustion
  std::span<const uint64_t> entry_args;
};

ExecutionResult execute(const Program& p, std::span<const uint8_t> input,
                        const ExecHooks& hooks, const ExecOptions& opts = {});

ExecutionResult execute(const Program& p, std::span<const uint8_t> input,
                        uint64_t step_budget = 1'000'000);

// (name, value) pairs of the block state as observed in `frame`.
std::vector<std::pair<std::string, uint64_t>> collect_block_state(
    const Function& f, const BasicBlock& b, const Frame& frame);

// 64-bit hash over the ordered function names of a call stack. Frames of
// designated runtime helpers (names starting with "rt_") are stripped first,
// and block ids are ignored, so two faults in the same call context collide
// regardless of the helper that detected them.
uint64_t callstack_hash(const std::vector<StackFrameRef>& frames);

bool is_runtime_helper(std::string_view function_name);

}  // namespace invscov
