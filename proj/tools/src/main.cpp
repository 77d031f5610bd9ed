// SPDX-License-Identifier: Apache-2.0
#include <iostream>

#include <CLI11.hpp>

#include "thanora_cli/commands.hpp"

int main(int argc, char** argv) {
  using namespace thanora::cli;

  CLI::App app{"thanora: heterogeneity-aware multi-task low-rank adaptation"};
  app.require_subcommand(1);

  RunOptions run;
  std::string mode;
  std::uint64_t seed = 0;
  std::size_t steps = 0;
  std::string out;

  auto add_run_flags = [&](CLI::App* sub, bool training) {
    sub->add_option("--config", run.config, "Experiment config (JSON)")->required();
    sub->add_option("--out", out, "Output directory");
    sub->add_option("--seed", seed, "Override trainer.seed");
    if (training) {
      sub->add_option("--mode", mode, "Arm to run")
          ->check(CLI::IsMember({"lora_baseline", "hasi_only", "hasi_spr", "all"}));
      sub->add_option("--steps", steps, "Override trainer.steps");
    }
  };

  CLI::App* priors = app.add_subcommand("priors", "Per-layer task priors and entropy table");
  add_run_flags(priors, false);
  CLI::App* allocate = app.add_subcommand("allocate", "Entropy-driven rank allocation");
  add_run_flags(allocate, false);
  CLI::App* train = app.add_subcommand("train", "Train one arm (or all) and write reports");
  add_run_flags(train, true);

  CLI::App* merge = app.add_subcommand("merge", "Fold a checkpoint into dense weights");
  std::string checkpoint;
  std::string merged_out;
  merge->add_option("checkpoint", checkpoint, "Checkpoint directory")->required();
  merge->add_option("--out", merged_out, "Merged weights file")->required();

  CLI::App* verify = app.add_subcommand("verify", "Run the property suite");
  thanora::VerifyOptions vopt;
  verify->add_option("--trials", vopt.trials, "Instances per orthogonality branch")->check(CLI::PositiveNumber);
  verify->add_option("--seed", vopt.seed, "Suite seed");
  verify->add_flag("--break-orthogonality", vopt.break_orthogonality)->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(kConfigError);
  }

  auto finish_run_options = [&](CLI::App* sub) {
    if (sub->count("--out")) run.out = out;
    if (sub->count("--seed")) run.seed = seed;
    if (sub->get_option_no_throw("--mode") && sub->count("--mode")) run.mode = mode;
    if (sub->get_option_no_throw("--steps") && sub->count("--steps")) run.steps = steps;
  };

  if (*priors) {
    finish_run_options(priors);
    return cmd_priors(run, std::cout, std::cerr);
  }
  if (*allocate) {
    finish_run_options(allocate);
    return cmd_allocate(run, std::cout, std::cerr);
  }
  if (*train) {
    finish_run_options(train);
    return cmd_train(run, std::cout, std::cerr);
  }
  if (*merge) return cmd_merge(checkpoint, merged_out, std::cout, std::cerr);
  return cmd_verify(vopt, std::cout, std::cerr);
}
