#include "invscov/fuzzer.hpp"

#include <algorithm>
#include <cassert>
#include <chrono>
#include <set>
#include <stdexcept>

namespace invscov {

CheckPlan build_check_plan(const InvariantReport& report, const Program& p,
                           bool reuse_dominator_outcomes) {
  CheckPlan plan;
  plan.sites.resize(p.functions.size());
  plan.slots_per_function.assign(p.functions.size(), 0);
  for (size_t fi = 0; fi < p.functions.size(); ++fi)
    plan.sites[fi].resize(p.functions[fi].blocks.size());

  // One outcome slot per invariant id per function.
  std::vector<std::map<int, int>> slot_of(p.functions.size());
  for (const Invariant& inv : report.uses) {
    auto& slots = slot_of[inv.function];
    if (!slots.count(inv.id)) {
      slots[inv.id] = plan.slots_per_function[inv.function]++;
    }
  }
  for (const Invariant& inv : report.uses) {
    CheckPlan::Site site;
    site.id = static_cast<uint16_t>(inv.id);
    site.kind = inv.kind;
    site.params = inv.params;
    site.vars = inv.var_indices;
    for (int v : inv.var_indices)
      site.var_types.push_back(p.functions[inv.function].value_types[v]);
    site.slot = slot_of[inv.function][inv.id];
    site.emit =
        !reuse_dominator_outcomes || inv.emission_block == inv.block;
    plan.sites[inv.function][inv.block].push_back(std::move(site));
  }
  return plan;
}

EvalOutcome evaluate_input(const Program& p, std::span<const uint8_t> input,
                           const CheckPlan* plan, FeedbackState& fs,
                           CoverageMap& map, uint64_t step_budget) {
  map.clear();
  fs.reset_execution();

  ExecHooks hooks;
  hooks.on_block_enter = [&](const Function&, const BasicBlock& b) {
    log_edge(fs, map, b.loc);
  };
  if (plan && !plan->empty()) {
    hooks.on_block_exit = [&, plan](const Function& f, const BasicBlock& b,
                                    Frame& frame) {
      const int fi = f.index;
      const auto& sites = plan->sites[fi][b.id];
      if (sites.empty()) return;
      if (frame.check_cache.size() <
          static_cast<size_t>(plan->slots_per_function[fi]))
        frame.check_cache.resize(plan->slots_per_function[fi], 0);
      Wide vals[2];
      for (const CheckPlan::Site& site : sites) {
        uint16_t outcome;
        if (site.emit) {
          for (size_t i = 0; i < site.vars.size(); ++i)
            vals[i] = site.var_types[i].math_value(frame.regs[site.vars[i]]);
          outcome = invariant_holds(site.kind, site.params,
                                    {vals, site.vars.size()})
                        ? 0
                        : static_cast<uint16_t>(site.id << 1);
          frame.check_cache[site.slot] = outcome;
        } else {
          // The emitting block dominates this one, so its outcome for this
          // activation is already cached.
          outcome = frame.check_cache[site.slot];
        }
        fs.prev_loc ^= outcome;
      }
    };
  }

  ExecOptions opts;
  opts.step_budget = step_budget;
  EvalOutcome out;
  out.exec = execute(p, input, hooks, opts);
  return out;
}

size_t pick_testcase(Corpus& c, Rng& rng) {
  assert(!c.entries.empty());
  if (!c.favored.empty() && rng.chance(9, 10)) {
    size_t idx = c.favored[c.favored_cursor % c.favored.size()];
    ++c.favored_cursor;
    return idx;
  }
  size_t idx = c.cursor % c.entries.size();
  ++c.cursor;
  return idx;
}

uint64_t calibrate(const CorpusEntry& entry, uint64_t avg_steps) {
  const double steps = static_cast<double>(entry.exec_steps ? entry.exec_steps : 1);
  const double avg = static_cast<double>(avg_steps ? avg_steps : 1);
  double speed = avg / steps;
  speed = std::clamp(speed, 0.25, 4.0);
  double novelty =
      1.0 + std::min(3.0, (static_cast<double>(entry.novel_at_add) - 1.0) / 8.0);
  novelty = std::clamp(novelty, 1.0, 4.0);
  double n = 64.0 * speed * novelty;
  return static_cast<uint64_t>(std::clamp(n, 16.0, 1024.0));
}

namespace {

const uint8_t kInterestingBytes[] = {0x00, 0x01, 0x10, 0x20, 0x40,
                                     0x64, 0x7f, 0x80, 0xc0, 0xff};

// One havoc operation; returns false when inapplicable to the current data.
bool apply_op(std::vector<uint8_t>& data, uint64_t op, Rng& rng,
              const Corpus& corpus) {
  switch (op) {
    case 0: {  // bit flip
      if (data.empty()) return false;
      size_t pos = rng.below(data.size());
      data[pos] ^= static_cast<uint8_t>(1u << rng.below(8));
      return true;
    }
    case 1: {  // byte set to random
      if (data.empty()) return false;
      data[rng.below(data.size())] = static_cast<uint8_t>(rng.next());
      return true;
    }
    case 2: {  // byte set to interesting value
      if (data.empty()) return false;
      data[rng.below(data.size())] =
          kInterestingBytes[rng.below(sizeof(kInterestingBytes))];
      return true;
    }
    case 3: {  // bounded add/sub
      if (data.empty()) return false;
      size_t pos = rng.below(data.size());
      uint8_t delta = static_cast<uint8_t>(rng.range(1, 35));
      data[pos] = rng.chance(1, 2) ? data[pos] + delta : data[pos] - delta;
      return true;
    }
    case 4: {  // chunk delete
      if (data.size() < 2) return false;
      size_t len = rng.range(1, std::max<size_t>(1, data.size() / 2));
      size_t pos = rng.below(data.size() - len + 1);
      data.erase(data.begin() + pos, data.begin() + pos + len);
      return true;
    }
    case 5: {  // chunk duplicate
      if (data.empty() || data.size() >= kMaxInputLen) return false;
      size_t len = rng.range(1, std::min<size_t>(data.size(),
                                                 kMaxInputLen - data.size()));
      size_t src = rng.below(data.size() - len + 1);
      size_t at = rng.below(data.size() + 1);
      std::vector<uint8_t> chunk(data.begin() + src, data.begin() + src + len);
      data.insert(data.begin() + at, chunk.begin(), chunk.end());
      return true;
    }
    case 6: {  // splice with a random corpus entry
      if (corpus.entries.empty()) return false;
      const std::vector<uint8_t>& other =
          corpus.entries[rng.below(corpus.entries.size())].bytes;
      if (other.empty() && data.empty()) return false;
      size_t keep = data.empty() ? 0 : rng.below(data.size() + 1);
      size_t from = other.empty() ? 0 : rng.below(other.size() + 1);
      std::vector<uint8_t> joined(data.begin(), data.begin() + keep);
      joined.insert(joined.end(), other.begin() + from, other.end());
      if (joined.empty() || joined.size() > kMaxInputLen) return false;
      data = std::move(joined);
      return true;
    }
  }
  return false;
}

}  // namespace

std::vector<uint8_t> mutate(const std::vector<uint8_t>& input, Rng& rng,
                            const Corpus& corpus) {
  std::vector<uint8_t> data = input;
  const uint64_t ops = rng.range(1, 64);
  for (uint64_t i = 0; i < ops; ++i) {
    // Redraw when the chosen operation does not apply (e.g. chunk delete on
    // an empty input).
    for (int attempt = 0; attempt < 8; ++attempt)
      if (apply_op(data, rng.below(7), rng, corpus)) break;
  }
  if (data == input) {
    // Force a modification.
    if (data.empty())
      data.push_back(static_cast<uint8_t>(rng.next()));
    else
      data[rng.below(data.size())] ^= static_cast<uint8_t>(1u << rng.below(8));
    if (data == input) data.push_back(static_cast<uint8_t>(rng.next()));
  }
  return data;
}

std::vector<size_t> greedy_cover(const std::vector<CorpusEntry>& entries) {
  std::set<std::pair<uint16_t, uint8_t>> universe;
  for (const CorpusEntry& e : entries)
    universe.insert(e.signature.begin(), e.signature.end());
  std::vector<size_t> cover;
  std::set<std::pair<uint16_t, uint8_t>> uncovered = universe;
  std::vector<bool> used(entries.size(), false);
  while (!uncovered.empty()) {
    size_t best = entries.size();
    size_t best_gain = 0;
    for (size_t i = 0; i < entries.size(); ++i) {
      if (used[i]) continue;
      size_t gain = 0;
      for (const auto& item : entries[i].signature)
        if (uncovered.count(item)) ++gain;
      if (gain > best_gain) {
        best_gain = gain;
        best = i;
      }
    }
    if (best == entries.size()) break;  // nothing adds coverage
    used[best] = true;
    cover.push_back(best);
    for (const auto& item : entries[best].signature) uncovered.erase(item);
  }
  std::sort(cover.begin(), cover.end());
  return cover;
}

CampaignResult fuzz_loop(const Program& p,
                         std::span<const std::vector<uint8_t>> seeds,
                         const InvariantReport* invariants,
                         const FuzzConfig& config) {
  if (config.budget_execs == 0)
    throw std::invalid_argument("fuzz_loop: budget must be positive");
  if (seeds.empty())
    throw std::invalid_argument("fuzz_loop: seed corpus must be non-empty");

  const auto t0 = std::chrono::steady_clock::now();
  CheckPlan plan;
  if (invariants) plan = build_check_plan(*invariants, p);
  const CheckPlan* plan_ptr = invariants ? &plan : nullptr;

  CampaignResult r;
  FeedbackState fs;
  CoverageMap map;
  Rng rng(config.rng_seed);
  uint64_t total_steps_saved = 0;  // over corpus entries, for calibrate

  auto density = [&]() {
    size_t known = 0;
    for (uint16_t v : fs.virgin)
      if (v) ++known;
    return static_cast<double>(known) / kMapSize;
  };

  auto push_window = [&]() {
    r.stats.series.push_back({r.stats.executions, r.corpus.size(),
                              r.stats.crashes, r.stats.unique_bugs,
                              density()});
  };

  auto add_entry = [&](std::span<const uint8_t> input, uint64_t steps,
                       const NoveltySummary& novelty) {
    CorpusEntry e;
    e.bytes.assign(input.begin(), input.end());
    e.exec_steps = steps;
    e.novel_at_add = novelty.new_items.size();
    e.signature = coverage_signature(map);
    total_steps_saved += steps;
    r.corpus.entries.push_back(std::move(e));
    ++r.corpus.adds_since_favored;
    // Recompute the favored subset periodically; the greedy cover amortizes
    // across additions.
    if (r.corpus.favored.empty() || r.corpus.adds_since_favored >= 128) {
      r.corpus.favored = greedy_cover(r.corpus.entries);
      r.corpus.adds_since_favored = 0;
    }
  };

  auto evaluate = [&](std::span<const uint8_t> input) -> bool {
    EvalOutcome out =
        evaluate_input(p, input, plan_ptr, fs, map, config.step_budget);
    ++r.stats.executions;
    if (out.exec.faulted()) {
      ++r.stats.crashes;
      uint64_t hash = callstack_hash(out.exec.fault.call_stack);
      if (!r.crashes.count(hash)) {
        CrashInfo ci;
        ci.input.assign(input.begin(), input.end());
        ci.kind = out.exec.fault.kind;
        for (const StackFrameRef& fr : out.exec.fault.call_stack)
          if (!is_runtime_helper(fr.function)) ci.stack.push_back(fr.function);
        r.crashes.emplace(hash, std::move(ci));
        r.stats.unique_bugs = r.crashes.size();
      }
    } else if (out.exec.outcome == ExecutionResult::Outcome::BudgetExhausted) {
      ++r.stats.timeouts;  // neither a crash nor a corpus candidate
    } else {
      NoveltySummary novelty = is_interesting(fs, map);
      if (novelty.interesting) {
        add_entry(input, out.exec.steps, novelty);
        out.saved = true;
      }
    }
    if (r.stats.executions % config.stats_window == 0) push_window();
    return r.stats.executions < config.budget_execs;
  };

  // Seed the corpus. If no seed registers as interesting (or all fault),
  // force the first seed in so the loop has something to mutate.
  for (const std::vector<uint8_t>& s : seeds) {
    if (r.stats.executions >= config.budget_execs) break;
    evaluate(s);
  }
  if (r.corpus.entries.empty()) {
    NoveltySummary none;
    map.clear();
    add_entry(seeds[0], 1, none);
  }

  bool go = r.stats.executions < config.budget_execs;
  while (go) {
    size_t idx = pick_testcase(r.corpus, rng);
    uint64_t avg = total_steps_saved / std::max<uint64_t>(1, r.corpus.size());
    uint64_t n = calibrate(r.corpus.entries[idx], avg);
    for (uint64_t i = 0; i < n && go; ++i) {
      std::vector<uint8_t> input =
          mutate(r.corpus.entries[idx].bytes, rng, r.corpus);
      go = evaluate(input);
    }
  }

  r.stats.corpus_size = r.corpus.size();
  r.stats.map_density = density();
  if (r.stats.series.empty() ||
      r.stats.series.back().executions != r.stats.executions)
    push_window();
  const auto t1 = std::chrono::steady_clock::now();
  r.stats.wall_seconds =
      std::chrono::duration_cast<std::chrono::duration<double>>(t1 - t0).count();
  r.stats.execs_per_sec =
      r.stats.wall_seconds > 0
          ? static_cast<double>(r.stats.executions) / r.stats.wall_seconds
          : 0.0;
  return r;
}

}  // namespace invscov
