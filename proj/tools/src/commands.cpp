// SPDX-License-Identifier: Apache-2.0
#include "thanora_cli/commands.hpp"

#include <cstdlib>
#include <vector>

#include <fmt/format.h>

#include "thanora/error.hpp"
#include "thanora/pipeline.hpp"
#include "thanora/report.hpp"
#include "thanora/serialization.hpp"

namespace thanora::cli {

namespace fs = std::filesystem;

namespace {

constexpr double kMergeTolerance = 1e-9;
constexpr std::size_t kMergeProbeInputs = 100;
constexpr std::uint64_t kMergeProbeSeed = 0x6d657267;

ConfigFile load_with_overrides(const RunOptions& o) {
  if (o.config.empty()) throw ConfigError("--config is required");
  ConfigFile cf = load_config(o.config);
  auto& cfg = cf.experiment;
  if (o.seed) cfg.trainer.seed = *o.seed;
  if (o.steps) cfg.trainer.steps = *o.steps;
  if (o.mode && *o.mode != "all") cfg.mode = arm_mode_from_string(*o.mode);
  cfg.validate();
  return cf;
}

std::vector<ArmMode> requested_modes(const RunOptions& o, const ExperimentConfig& cfg) {
  if (o.mode && *o.mode == "all") {
    return {ArmMode::lora_baseline, ArmMode::hasi_only, ArmMode::hasi_spr};
  }
  return {cfg.mode};
}

// Writes a file and reads it back, so a zero exit code means the bytes on
// disk are the bytes we meant.
void write_checked(const fs::path& path, const std::string& content) {
  write_text_file(path, content);
  if (read_text_file(path) != content) throw IoError(fmt::format("{}: read-back mismatch", path.string()));
}

struct PriorBundle {
  std::vector<std::string> task_ids;
  std::vector<std::vector<TaskPrior>> priors;
  std::vector<RankAllocation> allocations;
};

PriorBundle compute_bundle(const ExperimentConfig& cfg) {
  PriorBundle b;
  const ModelSnapshot base = build_base_model(cfg.model);
  const std::vector<TaskDataset> datasets = build_datasets(cfg, base);
  for (const auto& ds : datasets) b.task_ids.push_back(ds.task_id);
  b.priors = compute_priors(base, datasets, std::max<std::size_t>(1, cfg.preview_samples_per_task),
                            cfg.alloc.r_total, cfg.damping);
  b.allocations =
      allocate_layers(cfg.entropy_override ? *cfg.entropy_override : entropy_table(b.priors), cfg.alloc);
  return b;
}

bool same_factors(const ModelSnapshot& a, const ModelSnapshot& b) {
  if (a.layers.size() != b.layers.size() || a.nonlinearity != b.nonlinearity) return false;
  for (std::size_t l = 0; l < a.layers.size(); ++l) {
    const auto& x = a.layers[l];
    const auto& y = b.layers[l];
    if (!(x.base_w == y.base_w) || x.compensation_mode != y.compensation_mode) return false;
    if (!(x.adapter.concatenated_b() == y.adapter.concatenated_b())) return false;
    if (!(x.adapter.concatenated_a() == y.adapter.concatenated_a())) return false;
    if (x.adapter.column_layout != y.adapter.column_layout) return false;
  }
  return true;
}

}  // namespace

fs::path resolve_out_dir(const std::optional<fs::path>& flag, const ConfigFile& config) {
  if (flag) return *flag;
  if (config.out_dir) return *config.out_dir;
  if (const char* env = std::getenv(kOutDirEnv); env && *env) return fs::path(env);
  return fs::path("thanora_out");
}

int guarded(std::ostream& err, const std::function<int()>& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const BudgetError& e) {
    err << "budget error: " << e.what() << '\n';
    return kConfigError;
  } catch (const IoError& e) {
    err << "io error: " << e.what() << '\n';
    return kIoError;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << '\n';
    return kNumericError;
  } catch (const DimensionError& e) {
    err << "dimension error: " << e.what() << '\n';
    return kNumericError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kInternalError;
  }
}

int cmd_priors(const RunOptions& o, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const ConfigFile cf = load_with_overrides(o);
    const fs::path dir = resolve_out_dir(o.out, cf);
    const PriorBundle b = compute_bundle(cf.experiment);
    write_checked(dir / "priors.json", priors_to_json(b.priors));
    write_checked(dir / "entropy.csv", entropy_csv(b.priors));
    for (const auto& layer : b.priors) {
      for (const auto& p : layer) {
        out << fmt::format("layer {:>2}  task {:<12} entropy {:.6f}\n", p.layer_id, p.task_id, p.entropy);
      }
    }
    out << "wrote " << (dir / "priors.json").string() << " and " << (dir / "entropy.csv").string() << '\n';
    return int(kOk);
  });
}

int cmd_allocate(const RunOptions& o, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const ConfigFile cf = load_with_overrides(o);
    const fs::path dir = resolve_out_dir(o.out, cf);
    const PriorBundle b = compute_bundle(cf.experiment);
    write_checked(dir / "allocation.csv",
                  allocation_csv(b.allocations, b.task_ids, cf.experiment.alloc.r_total));
    for (const auto& a : b.allocations) {
      std::string ranks;
      for (std::size_t t = 0; t < a.task_ranks.size(); ++t) {
        ranks += fmt::format("{}{}={}", t ? " " : "", b.task_ids[t], a.task_ranks[t]);
      }
      out << fmt::format("layer {:>2}  {}  coop={}  total={}\n", a.layer_id, ranks, a.coop_rank, a.total());
    }
    out << "wrote " << (dir / "allocation.csv").string() << '\n';
    return int(kOk);
  });
}

int cmd_train(const RunOptions& o, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const ConfigFile cf = load_with_overrides(o);
    const fs::path dir = resolve_out_dir(o.out, cf);
    std::vector<ExperimentResult> results;
    for (ArmMode mode : requested_modes(o, cf.experiment)) {
      ExperimentConfig cfg = cf.experiment;
      cfg.mode = mode;
      ExperimentResult r = run(cfg);
      const fs::path arm_dir = dir / std::string(to_string(mode));
      if (cf.reports.training_log) write_checked(arm_dir / "training_log.csv", training_log_csv(r));
      if (cf.reports.overlap_log) write_checked(arm_dir / "overlap.csv", overlap_csv(r));
      if (cf.reports.priors && !r.priors.empty()) {
        write_checked(arm_dir / "priors.json", priors_to_json(r.priors));
        write_checked(arm_dir / "entropy.csv", entropy_csv(r.priors));
      }
      if (cf.reports.allocation && !r.allocations.empty()) {
        write_checked(arm_dir / "allocation.csv", allocation_csv(r.allocations, r.task_ids, cfg.alloc.r_total));
      }
      if (cf.reports.checkpoints) {
        write_checkpoint(arm_dir / "checkpoint", r.model);
        if (!same_factors(read_checkpoint(arm_dir / "checkpoint"), r.model)) {
          throw IoError(fmt::format("{}: checkpoint does not reload bit-identically", (arm_dir / "checkpoint").string()));
        }
      }
      write_checked(arm_dir / "result.json", result_to_json(r));
      if (r.max_merge_deviation > kMergeTolerance) {
        throw NumericError(fmt::format("{}: merged forward deviates by {:.3e}", to_string(mode), r.max_merge_deviation));
      }
      out << fmt::format("{:<14} avg_eval_mse {:.6f}  mean_overlap {:.6f}  {:.2f}s\n", to_string(mode),
                         r.average_eval_loss, r.mean_overlap, r.seconds);
      results.push_back(std::move(r));
    }
    write_checked(dir / "summary.csv", summary_csv(results));
    write_checked(dir / "timing.csv", timing_csv(results));

    const ExperimentResult* without = nullptr;
    const ExperimentResult* with = nullptr;
    for (const auto& r : results) {
      if (r.config.mode == ArmMode::hasi_only) without = &r;
      if (r.config.mode == ArmMode::hasi_spr) with = &r;
    }
    if (without && with) {
      const CollapseComparison c = collapse_probe(*without, *with);
      CsvWriter csv({"overlap_hasi_only", "overlap_hasi_spr", "ratio"});
      csv.add_row({format_double(c.overlap_without_spr), format_double(c.overlap_with_spr), format_double(c.ratio)});
      write_checked(dir / "collapse.csv", csv.str());
      out << fmt::format("collapse probe: overlap ratio (spr / no spr) = {:.4f}\n", c.ratio);
    }
    out << "wrote " << (dir / "summary.csv").string() << '\n';
    return int(kOk);
  });
}

int cmd_merge(const fs::path& checkpoint, const fs::path& out_path, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (!fs::is_directory(checkpoint)) {
      throw IoError(fmt::format("checkpoint directory not found: {}", checkpoint.string()));
    }
    const ModelSnapshot model = read_checkpoint(checkpoint);
    write_checked(out_path, merged_weights_to_json({model.merged_weights(), model.nonlinearity}));

    // Reload the artifact and compare both forward paths on seeded inputs.
    const MergedWeights merged = merged_weights_from_json(read_text_file(out_path));
    const DenseMatrix probe =
        seeded_random(model.dims().front(), kMergeProbeInputs, kMergeProbeSeed, Distribution::gaussian);
    const double dev = max_abs_diff(forward(model, probe).output,
                                    forward_dense(merged.weights, merged.nonlinearity, probe));
    out << fmt::format("merged {} layers into {}; max |adapter - merged| over {} inputs = {:.3e}\n",
                       merged.weights.size(), out_path.string(), kMergeProbeInputs, dev);
    if (dev > kMergeTolerance) {
      throw NumericError(fmt::format("merged forward deviates by {:.3e} (tolerance {:.0e})", dev, kMergeTolerance));
    }
    return int(kOk);
  });
}

int cmd_verify(const VerifyOptions& options, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const VerifyReport report = run_verification(options);
    for (const auto& c : report.checks) {
      out << fmt::format("{}  {:<28} measured {:.3e}  tol {:.0e}  n={:<5} {:.2f}s  {}\n",
                         c.passed ? "PASS" : "FAIL", c.name, c.measured, c.tolerance, c.instances,
                         c.seconds, c.detail);
    }
    out << fmt::format(
        "note: (W1)^T W2 PEGO orientation on A-branch instances = {:.3e} (not forced to vanish)\n",
        pego_printed_orientation_on_a_branch(std::min<std::size_t>(options.trials, 100), options.seed));
    const bool ok = report.all_passed();
    out << (ok ? "all checks passed\n" : "verification FAILED\n");
    return ok ? int(kOk) : int(kVerificationFailed);
  });
}

}  // namespace thanora::cli
