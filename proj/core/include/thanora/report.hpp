// SPDX-License-Identifier: Apache-2.0
//
// Tabular reports (RFC 4180 CSV) and the experiment result document.
#pragma once

#include <span>
#include <string>
#include <vector>

#include "thanora/pipeline.hpp"

namespace thanora {

/// layer, task, entropy, sigma (sigma as a ';'-separated list in one field).
std::string entropy_csv(const std::vector<std::vector<TaskPrior>>& priors);

/// layer_id, task_id, rank, coop_rank. Throws BudgetError, naming the layer,
/// if a row set does not sum to r_total.
std::string allocation_csv(std::span<const RankAllocation> allocations,
                           std::span<const std::string> task_ids, std::size_t r_total);

/// step, loss_<task>…, spr_total, total_loss
std::string training_log_csv(const ExperimentResult& result);

/// step, layer, pair, overlap, spr, pego
std::string overlap_csv(const ExperimentResult& result);

/// arm, task, eval_loss, avg, overlap. One row per task of every result.
/// Contains nothing that varies between identical runs.
std::string summary_csv(std::span<const ExperimentResult> results);

/// arm, seconds
std::string timing_csv(std::span<const ExperimentResult> results);

/// Everything in the result except the dense weights (those live in the
/// checkpoint and merged-weight files).
std::string result_to_json(const ExperimentResult& result);

}  // namespace thanora
