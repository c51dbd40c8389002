#include "invscov/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <sstream>

#include "json.hpp"

namespace invscov {

namespace fs = std::filesystem;

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw PipelineError("cannot open " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file(const fs::path& path, std::string_view data) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw PipelineError("cannot write " + path.string());
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
}

std::vector<std::vector<uint8_t>> read_corpus_dir(const fs::path& dir) {
  if (!fs::is_directory(dir))
    throw PipelineError("corpus directory not found: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file()) files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  std::vector<std::vector<uint8_t>> corpus;
  for (const fs::path& f : files) {
    std::string data = read_file(f);
    corpus.emplace_back(data.begin(), data.end());
  }
  return corpus;
}

Program load_program_file(const fs::path& path) {
  ParseResult r = parse_program(read_file(path));
  if (!r.ok())
    throw PipelineError("invalid program " + path.string() + ":\n" +
                        r.error_text());
  return std::move(*r.program);
}

std::string program_points_json(const Program& p, const AnalysisResult& a) {
  nlohmann::json j;
  j["loc_seed"] = p.loc_seed;
  nlohmann::json fns = nlohmann::json::array();
  for (const Function& f : p.functions) {
    nlohmann::json fj;
    fj["name"] = f.name;
    nlohmann::json blocks = nlohmann::json::array();
    for (const BasicBlock& b : f.blocks) {
      nlohmann::json bj;
      bj["label"] = b.label;
      bj["loc"] = b.loc;
      nlohmann::json vars = nlohmann::json::array();
      for (int v : a.dump[f.index].block(b.id)) {
        nlohmann::json vj;
        vj["name"] = f.value_names[v];
        vj["type"] = f.value_types[v].name();
        int comp = a.comparability[f.index].of(v);
        vj["comparability"] = comp == ComparabilityMap::kEpsilon ? -1 : comp;
        vj["lo"] = wide_to_string(a.ranges[f.index].of(v).lo);
        vj["hi"] = wide_to_string(a.ranges[f.index].of(v).hi);
        vars.push_back(std::move(vj));
      }
      bj["variables"] = std::move(vars);
      blocks.push_back(std::move(bj));
    }
    fj["blocks"] = std::move(blocks);
    fns.push_back(std::move(fj));
  }
  j["functions"] = std::move(fns);
  return j.dump(2) + "\n";
}

std::string stats_jsonl(const CampaignStats& stats) {
  std::ostringstream os;
  for (const StatsWindow& w : stats.series) {
    nlohmann::json j;
    j["executions"] = w.executions;
    j["corpus"] = w.corpus_size;
    j["crashes"] = w.crashes;
    j["unique_bugs"] = w.unique_bugs;
    j["map_density"] = w.map_density;
    os << j.dump() << "\n";
  }
  return os.str();
}

namespace {

uint64_t short_hash(std::span<const uint8_t> data) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (uint8_t b : data) {
    h ^= b;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string hex64(uint64_t v) {
  char buf[17];
  snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

void write_campaign_outputs(const fs::path& out_dir, const CampaignResult& r) {
  fs::create_directories(out_dir / "corpus");
  fs::create_directories(out_dir / "crashes");
  for (size_t i = 0; i < r.corpus.entries.size(); ++i) {
    const auto& bytes = r.corpus.entries[i].bytes;
    char name[64];
    snprintf(name, sizeof name, "%06zu_%08x", i,
             static_cast<uint32_t>(short_hash(bytes)));
    write_file(out_dir / "corpus" / name,
               std::string_view(reinterpret_cast<const char*>(bytes.data()),
                                bytes.size()));
  }
  for (const auto& [hash, crash] : r.crashes) {
    write_file(out_dir / "crashes" / hex64(hash),
               std::string_view(reinterpret_cast<const char*>(crash.input.data()),
                                crash.input.size()));
  }
  write_file(out_dir / "stats.jsonl", stats_jsonl(r.stats));
  nlohmann::json perf;
  perf["wall_seconds"] = r.stats.wall_seconds;
  perf["execs_per_sec"] = r.stats.execs_per_sec;
  write_file(out_dir / "perf.json", perf.dump(2) + "\n");
}

}  // namespace

void cmd_dump(const PipelineConfig& config) {
  Program p = load_program_file(config.program_path);
  std::vector<std::vector<uint8_t>> corpus = read_corpus_dir(config.corpus_dir);
  if (corpus.empty()) throw PipelineError("corpus empty: " + config.corpus_dir);
  AnalysisResult analysis = analyze_program(p);

  const fs::path out(config.out_dir);
  write_file(out / "ppts.json", program_points_json(p, analysis));
  write_file(out / "program.decls", write_decls(p, analysis));

  fs::create_directories(out);
  std::ofstream dtrace(out / "traces.dtrace", std::ios::binary | std::ios::trunc);
  if (!dtrace) throw PipelineError("cannot write traces.dtrace");
  TraceStats stats = record_traces(
      p, analysis, corpus,
      [&](const BlockStateRecord& r) { dtrace << render_dtrace_record(p, r); },
      [](const std::string& w) { std::cerr << "warning: " << w << "\n"; },
      config.step_budget);
  std::cout << "dump: " << stats.records << " records from "
            << stats.inputs_traced << " inputs (" << stats.inputs_skipped
            << " skipped)\n";
}

void cmd_learn(const PipelineConfig& config) {
  Program p = load_program_file(config.program_path);
  const fs::path out(config.out_dir);
  if (!fs::exists(out / "program.decls") || !fs::exists(out / "traces.dtrace"))
    throw PipelineError("missing decls/dtrace under " + out.string() +
                        " (run dump first)");
  AnalysisResult analysis = analyze_program(p);

  InvariantLearner learner(p, analysis);
  parse_dtrace(read_file(out / "traces.dtrace"), p,
               [&](const BlockStateRecord& r) { learner.observe(r); });
  std::vector<Invariant> learned = learner.finish();
  const size_t n_learned = learned.size();

  PruneResult pruned = prune_inviolable(std::move(learned), analysis);
  std::vector<Invariant> capped = cap_invariants(pruned.kept);
  const size_t n_capped_away = pruned.kept.size() - capped.size();
  InvariantReport report = deduplicate(std::move(capped), p);

  write_file(out / "invariants.json", invariants_to_json(report, p));

  std::ostringstream rep;
  rep << "invariant mining report\n";
  rep << "  candidates learned:  " << n_learned << "\n";
  rep << "  pruned: inviolable:  " << pruned.pruned.size() << "\n";
  rep << "  capped per block:    " << n_capped_away << "\n";
  rep << "  emitted checks:      " << report.emission_sites << "\n";
  rep << "  dominator reuses:    " << report.reuse_sites << "\n";
  rep << "\npruned: inviolable\n";
  for (const Invariant& inv : pruned.pruned)
    rep << "  " << inv.describe(p) << "\n";
  rep << "\nsurviving invariants\n";
  for (const Invariant& inv : report.uses) {
    rep << "  [" << inv.id << "] " << inv.describe(p);
    if (inv.emission_block != inv.block)
      rep << "  (reuses check at "
          << p.functions[inv.function].blocks[inv.emission_block].label << ")";
    rep << "\n";
  }
  write_file(out / "learn_report.txt", rep.str());
  std::cout << "learn: " << report.emission_sites << " checks ("
            << report.reuse_sites << " dominator reuses), "
            << pruned.pruned.size() << " pruned as inviolable\n";
}

CampaignResult cmd_fuzz(const PipelineConfig& config) {
  Program p = load_program_file(config.program_path);
  if (!p.entry().params.empty())
    throw PipelineError("entry function must take no parameters");
  std::vector<std::vector<uint8_t>> seeds = read_corpus_dir(config.corpus_dir);
  if (seeds.empty()) throw PipelineError("corpus empty: " + config.corpus_dir);

  const fs::path out(config.out_dir);
  InvariantReport report;
  bool with_invariants = false;
  if (config.mode == "invscov") {
    const fs::path inv_path = out / "invariants.json";
    if (!fs::exists(inv_path))
      throw PipelineError("mode=invscov needs " + inv_path.string() +
                          " (run learn first)");
    report = invariants_from_json(read_file(inv_path), p);
    with_invariants = true;
  } else if (config.mode != "edge-only") {
    throw PipelineError("unknown mode: " + config.mode);
  }

  FuzzConfig fc;
  fc.budget_execs = config.campaign_execs;
  fc.rng_seed = config.rng_seed;
  fc.step_budget = config.step_budget;
  CampaignResult r =
      fuzz_loop(p, seeds, with_invariants ? &report : nullptr, fc);
  write_campaign_outputs(out, r);
  std::cout << "fuzz[" << config.mode << "]: " << r.stats.executions
            << " execs, corpus " << r.corpus.size() << ", crashes "
            << r.stats.crashes << ", unique bugs " << r.stats.unique_bugs
            << ", " << static_cast<uint64_t>(r.stats.execs_per_sec)
            << " execs/sec\n";
  return r;
}

void cmd_triage(const PipelineConfig& config) {
  Program p = load_program_file(config.program_path);
  if (!fs::is_directory(config.corpus_dir))
    throw PipelineError("input directory not found: " + config.corpus_dir);
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(config.corpus_dir))
    if (entry.is_regular_file()) files.push_back(entry.path());
  std::sort(files.begin(), files.end());

  std::set<uint64_t> unique;
  for (const fs::path& f : files) {
    std::string data = read_file(f);
    std::vector<uint8_t> input(data.begin(), data.end());
    ExecutionResult res = execute(p, input, config.step_budget);
    std::cout << f.filename().string() << ": ";
    if (res.faulted()) {
      uint64_t hash = callstack_hash(res.fault.call_stack);
      unique.insert(hash);
      std::cout << fault_kind_name(res.fault.kind) << " hash=" << hex64(hash)
                << " stack=[";
      bool first = true;
      for (const StackFrameRef& fr : res.fault.call_stack) {
        if (is_runtime_helper(fr.function)) continue;
        std::cout << (first ? "" : " > ") << fr.function;
        first = false;
      }
      std::cout << "]\n";
    } else if (res.outcome == ExecutionResult::Outcome::BudgetExhausted) {
      std::cout << "timeout\n";
    } else {
      std::cout << "ok exit=" << res.exit_value << "\n";
    }
  }
  std::cout << "triage: " << files.size() << " inputs, " << unique.size()
            << " unique call-stack hashes\n";
}

double median(std::vector<double> xs) {
  if (xs.empty()) return 0.0;
  std::sort(xs.begin(), xs.end());
  size_t n = xs.size();
  return n % 2 ? xs[n / 2] : (xs[n / 2 - 1] + xs[n / 2]) / 2.0;
}

uint64_t median_u64(std::vector<uint64_t> xs) {
  if (xs.empty()) return 0;
  std::sort(xs.begin(), xs.end());
  size_t n = xs.size();
  return n % 2 ? xs[n / 2] : (xs[n / 2 - 1] + xs[n / 2]) / 2;
}

namespace {

bool found_planted(const CrashSet& crashes) {
  for (const auto& [hash, crash] : crashes)
    if (crash.kind == FaultKind::BugInstruction) return true;
  return false;
}

uint64_t mix_seed(uint64_t base, std::string_view tag, uint64_t n) {
  uint64_t h = base ^ 0x9e3779b97f4a7c15ull;
  for (char c : tag) h = (h ^ static_cast<uint8_t>(c)) * 0x100000001b3ull;
  h ^= n + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
  return h;
}

}  // namespace

TargetBenchResult run_target_bench(const Program& p,
                                   std::span<const std::vector<uint8_t>> seeds,
                                   const std::string& name,
                                   uint64_t seed_execs, uint64_t campaign_execs,
                                   int trials, uint64_t base_seed,
                                   uint64_t step_budget) {
  TargetBenchResult out;
  out.name = name;

  // Stage 1: corpus production, a plain edge-coverage run.
  FuzzConfig seed_cfg;
  seed_cfg.budget_execs = seed_execs;
  seed_cfg.rng_seed = mix_seed(base_seed, name, 0x5eed);
  seed_cfg.step_budget = step_budget;
  CampaignResult seed_run = fuzz_loop(p, seeds, nullptr, seed_cfg);
  std::vector<std::vector<uint8_t>> corpus;
  for (const CorpusEntry& e : seed_run.corpus.entries) corpus.push_back(e.bytes);
  out.seed_corpus_size = corpus.size();

  // Stage 2: mine invariants over that corpus.
  AnalysisResult analysis = analyze_program(p);
  InvariantLearner learner(p, analysis);
  record_traces(p, analysis, corpus,
                [&](const BlockStateRecord& r) { learner.observe(r); }, {},
                step_budget);
  PruneResult pruned = prune_inviolable(learner.finish(), analysis);
  InvariantReport report = deduplicate(cap_invariants(std::move(pruned.kept)), p);
  out.invariant_uses = report.uses.size();

  // Stage 3: campaigns. Both modes restart from the mined corpus.
  std::vector<double> edge_eps, inv_eps;
  for (int t = 0; t < trials; ++t) {
    FuzzConfig fc;
    fc.budget_execs = campaign_execs;
    fc.step_budget = step_budget;

    fc.rng_seed = mix_seed(base_seed, name + "/edge", t + 1);
    CampaignResult edge = fuzz_loop(p, corpus, nullptr, fc);
    out.edge_bugs.push_back(edge.stats.unique_bugs);
    out.edge_found_planted.push_back(found_planted(edge.crashes));
    for (const auto& [hash, crash] : edge.crashes) out.edge_hashes.insert(hash);
    edge_eps.push_back(edge.stats.execs_per_sec);

    fc.rng_seed = mix_seed(base_seed, name + "/invscov", t + 1);
    CampaignResult inv = fuzz_loop(p, corpus, &report, fc);
    out.inv_bugs.push_back(inv.stats.unique_bugs);
    out.inv_found_planted.push_back(found_planted(inv.crashes));
    for (const auto& [hash, crash] : inv.crashes) out.inv_hashes.insert(hash);
    inv_eps.push_back(inv.stats.execs_per_sec);
  }
  out.edge_eps = median(edge_eps);
  out.inv_eps = median(inv_eps);
  out.overhead = out.inv_eps > 0 ? out.edge_eps / out.inv_eps : 0.0;
  return out;
}

BenchReport cmd_bench(const PipelineConfig& config) {
  const fs::path suite(config.program_path);
  if (!fs::is_directory(suite))
    throw PipelineError("benchmark suite directory not found: " + suite.string());
  std::vector<fs::path> targets;
  for (const auto& entry : fs::directory_iterator(suite))
    if (entry.is_directory() && fs::exists(entry.path() / "target.ir"))
      targets.push_back(entry.path());
  std::sort(targets.begin(), targets.end());
  if (targets.empty())
    throw PipelineError("no targets (subdir with target.ir) under " +
                        suite.string());

  BenchReport report;
  for (const fs::path& dir : targets) {
    Program p = load_program_file(dir / "target.ir");
    std::vector<std::vector<uint8_t>> seeds = read_corpus_dir(dir / "seeds");
    if (seeds.empty())
      throw PipelineError("no seeds for target " + dir.string());
    TargetBenchResult r = run_target_bench(
        p, seeds, dir.filename().string(), config.seed_execs,
        config.campaign_execs, config.trials, config.rng_seed,
        config.step_budget);
    report.targets.push_back(std::move(r));
  }

  std::vector<double> overheads;
  for (const TargetBenchResult& t : report.targets)
    overheads.push_back(t.overhead);
  report.median_overhead = median(overheads);

  std::ostringstream os;
  char line[256];
  snprintf(line, sizeof line, "%-12s %10s %12s %12s %10s\n", "target",
           "edge bugs", "invscov bugs", "intersection", "overhead");
  os << line;
  for (const TargetBenchResult& t : report.targets) {
    std::vector<uint64_t> inter;
    std::set_intersection(t.edge_hashes.begin(), t.edge_hashes.end(),
                          t.inv_hashes.begin(), t.inv_hashes.end(),
                          std::back_inserter(inter));
    snprintf(line, sizeof line, "%-12s %10llu %12llu %12zu %9.2fx\n",
             t.name.c_str(),
             static_cast<unsigned long long>(median_u64(t.edge_bugs)),
             static_cast<unsigned long long>(median_u64(t.inv_bugs)),
             inter.size(), t.overhead);
    os << line;
  }
  snprintf(line, sizeof line, "suite median overhead: %.2fx\n",
           report.median_overhead);
  os << line;
  report.text = os.str();

  nlohmann::json j;
  nlohmann::json arr = nlohmann::json::array();
  for (const TargetBenchResult& t : report.targets) {
    nlohmann::json tj;
    tj["target"] = t.name;
    tj["edge_bugs_median"] = median_u64(t.edge_bugs);
    tj["invscov_bugs_median"] = median_u64(t.inv_bugs);
    std::vector<uint64_t> inter;
    std::set_intersection(t.edge_hashes.begin(), t.edge_hashes.end(),
                          t.inv_hashes.begin(), t.inv_hashes.end(),
                          std::back_inserter(inter));
    tj["intersection"] = inter.size();
    tj["edge_execs_per_sec"] = t.edge_eps;
    tj["invscov_execs_per_sec"] = t.inv_eps;
    tj["overhead"] = t.overhead;
    tj["invariant_uses"] = t.invariant_uses;
    arr.push_back(std::move(tj));
  }
  j["targets"] = std::move(arr);
  j["median_overhead"] = report.median_overhead;

  const fs::path out(config.out_dir);
  write_file(out / "bench_report.txt", report.text);
  write_file(out / "bench_report.json", j.dump(2) + "\n");
  std::cout << report.text;
  return report;
}

}  // namespace invscov
