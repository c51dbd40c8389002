// invscov: learn likely invariants per basic block from corpus traces and
// fuzz with an edge-coverage feedback augmented by invariant violations.
//
//   invscov dump   -p prog.ir -c corpus/ -o out/
//   invscov learn  -p prog.ir -o out/
//   invscov fuzz   -p prog.ir -c corpus/ -o out/ --mode invscov -n 200000
//   invscov bench  -p benchmarks/ -o out/ --trials 3
//   invscov triage -p prog.ir -c out/crashes -o out/

#include <iostream>

#include "CLI11.hpp"
#include "invscov/pipeline.hpp"

int main(int argc, char** argv) {
  CLI::App app{"invariant-coverage fuzzing pipeline"};
  app.require_subcommand(1);

  invscov::PipelineConfig config;

  auto add_common = [&](CLI::App* cmd, bool corpus, bool budgets) {
    cmd->add_option("-p,--program", config.program_path,
                    "program file (or suite directory for bench)")
        ->required();
    if (corpus)
      cmd->add_option("-c,--corpus", config.corpus_dir,
                      "corpus/input directory");
    cmd->add_option("-o,--out", config.out_dir, "run output directory");
    cmd->add_option("--step-budget", config.step_budget,
                    "interpreter step budget per execution");
    if (budgets) {
      cmd->add_option("-n,--execs", config.campaign_execs,
                      "campaign execution budget");
      cmd->add_option("--seed-execs", config.seed_execs,
                      "corpus-producing run execution budget");
      cmd->add_option("-s,--seed", config.rng_seed, "rng seed");
      cmd->add_option("--mode", config.mode, "edge-only | invscov");
      cmd->add_option("--trials", config.trials, "campaigns per mode")
          ->check(CLI::PositiveNumber);
    }
  };

  CLI::App* dump = app.add_subcommand("dump", "write decls + dtrace over a corpus");
  add_common(dump, true, false);
  CLI::App* learn = app.add_subcommand("learn", "learn, prune and deduplicate invariants");
  add_common(learn, false, false);
  CLI::App* fuzz = app.add_subcommand("fuzz", "run one fuzzing campaign");
  add_common(fuzz, true, true);
  CLI::App* bench = app.add_subcommand("bench", "run the benchmark comparison");
  add_common(bench, false, true);
  CLI::App* triage = app.add_subcommand("triage", "re-execute and triage inputs");
  add_common(triage, true, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;  // usage errors exit 1
  }

  try {
    if (dump->parsed()) {
      if (config.corpus_dir.empty())
        throw invscov::PipelineError("dump needs --corpus");
      invscov::cmd_dump(config);
    } else if (learn->parsed()) {
      invscov::cmd_learn(config);
    } else if (fuzz->parsed()) {
      if (config.corpus_dir.empty())
        throw invscov::PipelineError("fuzz needs --corpus");
      if (config.campaign_execs == 0)
        throw invscov::PipelineError("execution budget must be positive");
      invscov::cmd_fuzz(config);
    } else if (bench->parsed()) {
      invscov::cmd_bench(config);
    } else if (triage->parsed()) {
      if (config.corpus_dir.empty())
        throw invscov::PipelineError("triage needs --corpus");
      invscov::cmd_triage(config);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;  // pipeline failure
  }
  return 0;
}
