// SPDX-License-Identifier: Apache-2.0
#include "thanora/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>

#include <fmt/format.h>

#include "thanora/error.hpp"

namespace thanora {

std::string_view to_string(ArmMode mode) {
  switch (mode) {
    case ArmMode::lora_baseline:
      return "lora_baseline";
    case ArmMode::hasi_only:
      return "hasi_only";
    case ArmMode::hasi_spr:
      return "hasi_spr";
  }
  return "unknown";
}

ArmMode arm_mode_from_string(std::string_view name) {
  if (name == "lora_baseline") return ArmMode::lora_baseline;
  if (name == "hasi_only") return ArmMode::hasi_only;
  if (name == "hasi_spr") return ArmMode::hasi_spr;
  throw ConfigError(fmt::format("unknown mode '{}'", name));
}

void ExperimentConfig::validate() const {
  if (model.dims.size() < 2) throw ConfigError("model.dims: need at least two entries");
  for (std::size_t d : model.dims) {
    if (d == 0) throw ConfigError("model.dims: every width must be positive");
  }
  if (tasks.empty()) throw ConfigError("tasks: at least one task is required");
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    if (tasks[i].task_id.empty()) throw ConfigError(fmt::format("tasks[{}].task_id is empty", i));
    if (tasks[i].task_id == kCoopBlockId) {
      throw ConfigError(fmt::format("tasks[{}].task_id '{}' is reserved", i, kCoopBlockId));
    }
    for (std::size_t j = 0; j < i; ++j) {
      if (tasks[j].task_id == tasks[i].task_id) {
        throw ConfigError(fmt::format("tasks[{}].task_id '{}' is duplicated", i, tasks[i].task_id));
      }
    }
  }
  if (alloc.num_tasks != tasks.size()) {
    throw ConfigError(fmt::format("alloc.num_tasks {} does not match {} tasks", alloc.num_tasks,
                                  tasks.size()));
  }
  alloc.validate();
  for (std::size_t l = 0; l + 1 < model.dims.size(); ++l) {
    if (alloc.r_total > std::min(model.dims[l], model.dims[l + 1])) {
      throw BudgetError(fmt::format("alloc.r_total {} exceeds min(d_out, d_in) at layer {}",
                                    alloc.r_total, l));
    }
  }
  if (!(gamma > 0.0)) throw ConfigError("gamma must be positive");
  if (!(lambda >= 0.0)) throw ConfigError("lambda must be non-negative");
  if (!(trainer.lr >= 0.0)) throw ConfigError("trainer.lr must be non-negative");
  if (trainer.batch == 0) throw ConfigError("trainer.batch must be positive");
  if (mode != ArmMode::lora_baseline && preview_samples_per_task == 0) {
    throw ConfigError("preview_samples_per_task must be at least 1 for HASI arms");
  }
  if (entropy_override) {
    if (entropy_override->size() != model.dims.size() - 1) {
      throw ConfigError("entropy_override: one row per layer is required");
    }
    for (const auto& row : *entropy_override) {
      if (row.size() != tasks.size()) {
        throw ConfigError("entropy_override: one entry per task is required");
      }
    }
  }
}

ModelSnapshot build_base_model(const ModelConfig& cfg) {
  return model_from_weights(random_base_weights(cfg.dims, cfg.base_init, cfg.seed),
                            cfg.nonlinearity);
}

std::vector<TaskDataset> build_datasets(const ExperimentConfig& cfg, const ModelSnapshot& base) {
  return generate_mixture(cfg.tasks, base, cfg.data_seed);
}

std::vector<std::vector<TaskPrior>> compute_priors(const ModelSnapshot& base,
                                                   std::span<const TaskDataset> datasets,
                                                   std::size_t preview_samples, std::size_t r_total,
                                                   double damping) {
  const std::size_t n_layers = base.layers.size();
  const auto dims = base.dims();
  std::vector<std::vector<TaskPrior>> priors(n_layers);
  const std::vector<DenseMatrix> weights = base.merged_weights();
  for (const auto& ds : datasets) {
    const std::size_t n = std::min(preview_samples, ds.train_inputs.cols());
    const ForwardTrace trace = forward(base, slice_cols(ds.train_inputs, 0, n));
    for (std::size_t l = 0; l < n_layers; ++l) {
      CovarianceAccumulator acc(dims[l]);
      acc.accumulate(trace.inputs[l]);
      priors[l].push_back(compute_prior(ds.task_id, l, weights[l], acc, r_total, damping));
    }
  }
  return priors;
}

std::vector<std::vector<double>> entropy_table(const std::vector<std::vector<TaskPrior>>& priors) {
  std::vector<std::vector<double>> table;
  for (const auto& layer : priors) {
    std::vector<double> row;
    for (const auto& p : layer) row.push_back(p.entropy);
    table.push_back(std::move(row));
  }
  return table;
}

std::vector<RankAllocation> allocate_layers(const std::vector<std::vector<double>>& entropies,
                                            const AllocationConfig& cfg) {
  std::vector<RankAllocation> out;
  for (std::size_t l = 0; l < entropies.size(); ++l) {
    try {
      out.push_back(allocate(entropies[l], cfg, l));
    } catch (const BudgetError& e) {
      throw BudgetError(fmt::format("layer {}: {}", l, e.what()));
    }
  }
  return out;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 finalizer
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

ModelSnapshot initialize_model(const ExperimentConfig& cfg, const ModelSnapshot& base,
                               const std::vector<std::vector<TaskPrior>>& priors,
                               const std::vector<RankAllocation>& allocations) {
  ModelSnapshot model;
  model.nonlinearity = base.nonlinearity;
  const std::vector<DenseMatrix> weights = base.merged_weights();
  for (std::size_t l = 0; l < weights.size(); ++l) {
    const std::uint64_t seed = derive_seed(cfg.trainer.seed, 1000 + l);
    const auto& w = weights[l];
    BlockAdapter adapter;
    if (cfg.mode == ArmMode::lora_baseline) {
      adapter = lora_adapter(w.rows(), w.cols(), cfg.alloc.r_total, seed, l);
    } else {
      const auto& alloc = allocations.at(l);
      std::vector<TaskBlock> blocks;
      for (std::size_t t = 0; t < cfg.tasks.size(); ++t) {
        blocks.push_back(build_task_block(priors.at(l).at(t), alloc.task_ranks[t], cfg.gamma));
      }
      adapter = assemble(std::move(blocks), alloc.coop_rank, cfg.gamma, seed, l, cfg.alloc.r_total);
    }
    model.layers.push_back(compensate(w, std::move(adapter), cfg.compensation_mode));
  }
  model.validate();
  return model;
}

BatchSampler::BatchSampler(std::span<const TaskDataset> datasets, std::uint64_t seed)
    : datasets_(datasets), rng_(seed), order_(datasets.size()), cursor_(datasets.size(), 0) {
  for (std::size_t t = 0; t < datasets_.size(); ++t) {
    order_[t].resize(datasets_[t].train_inputs.cols());
    std::iota(order_[t].begin(), order_[t].end(), std::size_t{0});
    reshuffle(t);
  }
}

void BatchSampler::reshuffle(std::size_t task) {
  auto& ord = order_[task];
  // Fisher-Yates with explicit draws so the order does not depend on the
  // standard library's shuffle implementation.
  for (std::size_t i = ord.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng_() % i);
    std::swap(ord[i - 1], ord[j]);
  }
  cursor_[task] = 0;
}

void BatchSampler::next(std::size_t batch, DenseMatrix& inputs, DenseMatrix& targets) {
  const std::size_t d_in = datasets_.front().train_inputs.rows();
  const std::size_t d_out = datasets_.front().train_targets.rows();
  inputs = DenseMatrix(d_in, batch);
  targets = DenseMatrix(d_out, batch);
  for (std::size_t j = 0; j < batch; ++j) {
    const std::size_t t = next_task_;
    next_task_ = (next_task_ + 1) % datasets_.size();
    if (cursor_[t] == order_[t].size()) reshuffle(t);
    const std::size_t idx = order_[t][cursor_[t]++];
    const auto& ds = datasets_[t];
    for (std::size_t i = 0; i < d_in; ++i) inputs(i, j) = ds.train_inputs(i, idx);
    for (std::size_t i = 0; i < d_out; ++i) targets(i, j) = ds.train_targets(i, idx);
  }
}

namespace {

TrainingLogRow log_row(const ModelSnapshot& model, std::span<const TaskDataset> datasets,
                       std::size_t step, double lambda) {
  TrainingLogRow row;
  row.step = step;
  double mean = 0.0;
  for (const auto& ds : datasets) {
    row.task_losses.push_back(eval_loss(model, ds));
    mean += row.task_losses.back();
  }
  mean /= static_cast<double>(datasets.size());
  std::vector<double> spr;
  for (const auto& l : model.layers) spr.push_back(spr_loss(l.adapter));
  row.spr_total = std::accumulate(spr.begin(), spr.end(), 0.0);
  row.total_loss = total_loss(mean, spr, lambda);
  return row;
}

void record_overlap(const ModelSnapshot& model, std::size_t step, ExperimentResult& result) {
  for (const auto& l : model.layers) {
    if (l.adapter.task_blocks.size() < 2) continue;
    result.overlap_log.push_back({step, overlap_report(l.adapter, true)});
  }
}

double merge_deviation(const ModelSnapshot& model, std::span<const TaskDataset> datasets) {
  double worst = 0.0;
  const auto merged = model.merged_weights();
  for (const auto& ds : datasets) {
    const DenseMatrix probe = slice_cols(ds.eval_inputs, 0, std::min<std::size_t>(100, ds.eval_inputs.cols()));
    worst = std::max(worst, max_abs_diff(forward(model, probe).output,
                                         forward_dense(merged, model.nonlinearity, probe)));
  }
  return worst;
}

}  // namespace

void train(ModelSnapshot& model, std::span<const TaskDataset> datasets, const TrainerConfig& cfg,
           double lambda, ExperimentResult& result) {
  BatchSampler sampler(datasets, derive_seed(cfg.seed, 0));
  const std::size_t log_every = std::max<std::size_t>(1, cfg.log_every);
  const std::size_t overlap_every = std::max<std::size_t>(1, cfg.overlap_every);

  DenseMatrix inputs, targets;
  for (std::size_t step = 0;; ++step) {
    if (step % log_every == 0 || step == cfg.steps) {
      result.log.push_back(log_row(model, datasets, step, lambda));
    }
    if (step % overlap_every == 0 || step == cfg.steps) {
      record_overlap(model, step, result);
      result.max_merge_deviation =
          std::max(result.max_merge_deviation, merge_deviation(model, datasets));
    }
    if (step == cfg.steps) break;
    sampler.next(cfg.batch, inputs, targets);
    const ForwardTrace trace = forward(model, inputs);
    const ModelGradient grads = backward(model, trace, targets, lambda);
    sgd_step(model, grads, cfg.lr);
  }
}

ExperimentResult run(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();

  ExperimentResult result;
  result.config = cfg;
  const ModelSnapshot base = build_base_model(cfg.model);
  const std::vector<TaskDataset> datasets = build_datasets(cfg, base);
  for (const auto& ds : datasets) result.task_ids.push_back(ds.task_id);
  result.original_weights = base.merged_weights();

  if (cfg.mode != ArmMode::lora_baseline) {
    result.priors = compute_priors(base, datasets, cfg.preview_samples_per_task,
                                   cfg.alloc.r_total, cfg.damping);
    const auto entropies = cfg.entropy_override ? *cfg.entropy_override : entropy_table(result.priors);
    result.allocations = allocate_layers(entropies, cfg.alloc);
  }

  result.model = initialize_model(cfg, base, result.priors, result.allocations);
  for (const auto& ds : datasets) result.initial_eval_losses.push_back(eval_loss(result.model, ds));

  const double lambda = cfg.mode == ArmMode::hasi_spr ? cfg.lambda : 0.0;
  train(result.model, datasets, cfg.trainer, lambda, result);

  result.merged_weights = result.model.merged_weights();
  for (const auto& ds : datasets) {
    result.final_eval_losses.push_back(eval_loss(result.model, ds));
    result.merged_eval_losses.push_back(
        mse(forward_dense(result.merged_weights, result.model.nonlinearity, ds.eval_inputs),
            ds.eval_targets));
  }
  result.average_eval_loss =
      std::accumulate(result.final_eval_losses.begin(), result.final_eval_losses.end(), 0.0) /
      static_cast<double>(result.final_eval_losses.size());

  double overlap_sum = 0.0;
  std::size_t overlap_layers = 0;
  for (const auto& l : result.model.layers) {
    if (l.adapter.task_blocks.size() < 2) continue;
    result.final_overlap.push_back(overlap_report(l.adapter, true));
    overlap_sum += result.final_overlap.back().mean_overlap();
    ++overlap_layers;
  }
  result.mean_overlap = overlap_layers ? overlap_sum / static_cast<double>(overlap_layers) : 0.0;

  result.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

CollapseComparison collapse_probe(const ExperimentResult& without_spr,
                                  const ExperimentResult& with_spr) {
  const auto& a = without_spr.config;
  const auto& b = with_spr.config;
  if (a.mode != ArmMode::hasi_only || b.mode != ArmMode::hasi_spr) {
    throw ConfigError("collapse_probe: expects a hasi_only run and a hasi_spr run");
  }
  const bool same = a.model.dims == b.model.dims && a.model.seed == b.model.seed &&
                    a.model.base_init == b.model.base_init &&
                    a.model.nonlinearity == b.model.nonlinearity && a.data_seed == b.data_seed &&
                    without_spr.task_ids == with_spr.task_ids && a.alloc.r_total == b.alloc.r_total &&
                    a.alloc.r_min == b.alloc.r_min && a.alloc.tau == b.alloc.tau &&
                    a.gamma == b.gamma && a.compensation_mode == b.compensation_mode &&
                    a.trainer.seed == b.trainer.seed && a.trainer.steps == b.trainer.steps &&
                    a.trainer.lr == b.trainer.lr && a.trainer.batch == b.trainer.batch &&
                    a.preview_samples_per_task == b.preview_samples_per_task;
  if (!same) throw ConfigError("collapse_probe: runs differ in more than arm and lambda");

  CollapseComparison c;
  c.overlap_without_spr = without_spr.mean_overlap;
  c.overlap_with_spr = with_spr.mean_overlap;
  if (c.overlap_without_spr > 0.0) {
    c.ratio = c.overlap_with_spr / c.overlap_without_spr;
  } else {
    c.ratio = c.overlap_with_spr > 0.0 ? std::numeric_limits<double>::infinity() : 1.0;
  }
  return c;
}

}  // namespace thanora
