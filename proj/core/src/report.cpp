// SPDX-License-Identifier: Apache-2.0
#include "thanora/report.hpp"

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "thanora/config.hpp"
#include "thanora/error.hpp"
#include "thanora/serialization.hpp"

namespace thanora {

using nlohmann::json;

namespace {

std::string id_of(std::span<const std::string> ids, std::size_t index) {
  return index < ids.size() ? ids[index] : fmt::format("task{}", index);
}

json overlap_json(const OverlapReport& r, std::span<const std::string> ids) {
  json pairs = json::array();
  for (const auto& p : r.pairs) {
    pairs.push_back({{"first", id_of(ids, p.first)},
                     {"second", id_of(ids, p.second)},
                     {"overlap", p.overlap},
                     {"degenerate", p.degenerate}});
  }
  json out{{"layer", r.layer_id}, {"pairs", std::move(pairs)}, {"spr", r.spr_value},
           {"mean_overlap", r.mean_overlap()}};
  if (r.pego_value) out["pego"] = *r.pego_value;
  return out;
}

}  // namespace

std::string entropy_csv(const std::vector<std::vector<TaskPrior>>& priors) {
  CsvWriter csv({"layer", "task", "entropy", "sigma"});
  for (const auto& layer : priors) {
    for (const auto& p : layer) {
      std::string sigma;
      for (std::size_t i = 0; i < p.svd.sigma.size(); ++i) {
        if (i) sigma += ';';
        sigma += format_double(p.svd.sigma[i]);
      }
      csv.add_row({std::to_string(p.layer_id), p.task_id, format_double(p.entropy), sigma});
    }
  }
  return csv.str();
}

std::string allocation_csv(std::span<const RankAllocation> allocations,
                           std::span<const std::string> task_ids, std::size_t r_total) {
  CsvWriter csv({"layer_id", "task_id", "rank", "coop_rank"});
  for (const auto& a : allocations) {
    if (a.total() != r_total) {
      throw BudgetError(
          fmt::format("layer {}: allocation sums to {}, expected {}", a.layer_id, a.total(), r_total));
    }
    for (std::size_t t = 0; t < a.task_ranks.size(); ++t) {
      csv.add_row({std::to_string(a.layer_id), id_of(task_ids, t), std::to_string(a.task_ranks[t]),
                   std::to_string(a.coop_rank)});
    }
  }
  return csv.str();
}

std::string training_log_csv(const ExperimentResult& result) {
  std::vector<std::string> header{"step"};
  for (const auto& id : result.task_ids) header.push_back("loss_" + id);
  header.push_back("spr_total");
  header.push_back("total_loss");
  CsvWriter csv(std::move(header));
  for (const auto& row : result.log) {
    std::vector<std::string> fields{std::to_string(row.step)};
    for (double l : row.task_losses) fields.push_back(format_double(l));
    fields.push_back(format_double(row.spr_total));
    fields.push_back(format_double(row.total_loss));
    csv.add_row(std::move(fields));
  }
  return csv.str();
}

std::string overlap_csv(const ExperimentResult& result) {
  CsvWriter csv({"step", "layer", "pair", "overlap", "spr", "pego"});
  for (const auto& row : result.overlap_log) {
    const auto& r = row.report;
    for (const auto& p : r.pairs) {
      csv.add_row({std::to_string(row.step), std::to_string(r.layer_id),
                   id_of(result.task_ids, p.first) + ":" + id_of(result.task_ids, p.second),
                   format_double(p.overlap), format_double(r.spr_value),
                   r.pego_value ? format_double(*r.pego_value) : std::string()});
    }
  }
  return csv.str();
}

std::string summary_csv(std::span<const ExperimentResult> results) {
  CsvWriter csv({"arm", "task", "eval_loss", "avg", "overlap"});
  for (const auto& r : results) {
    for (std::size_t t = 0; t < r.task_ids.size(); ++t) {
      csv.add_row({std::string(to_string(r.config.mode)), r.task_ids[t],
                   format_double(r.final_eval_losses.at(t)), format_double(r.average_eval_loss),
                   format_double(r.mean_overlap)});
    }
  }
  return csv.str();
}

std::string timing_csv(std::span<const ExperimentResult> results) {
  CsvWriter csv({"arm", "seconds"});
  for (const auto& r : results) {
    csv.add_row({std::string(to_string(r.config.mode)), format_double(r.seconds)});
  }
  return csv.str();
}

std::string result_to_json(const ExperimentResult& r) {
  json allocations = json::array();
  for (const auto& a : r.allocations) {
    json tasks = json::array();
    for (std::size_t t = 0; t < a.task_ranks.size(); ++t) {
      tasks.push_back({{"task", id_of(r.task_ids, t)},
                       {"rank", a.task_ranks[t]},
                       {"soft_weight", a.soft_weights.at(t)}});
    }
    allocations.push_back({{"layer", a.layer_id}, {"tasks", std::move(tasks)}, {"coop_rank", a.coop_rank}});
  }
  json overlap = json::array();
  for (const auto& o : r.final_overlap) overlap.push_back(overlap_json(o, r.task_ids));

  json doc{{"mode", to_string(r.config.mode)},
           {"config", json::parse(config_to_json(r.config))},
           {"task_ids", r.task_ids},
           {"priors", json::parse(priors_to_json(r.priors))},
           {"allocations", std::move(allocations)},
           {"initial_eval_losses", r.initial_eval_losses},
           {"final_eval_losses", r.final_eval_losses},
           {"merged_eval_losses", r.merged_eval_losses},
           {"average_eval_loss", r.average_eval_loss},
           {"final_overlap", std::move(overlap)},
           {"mean_overlap", r.mean_overlap},
           {"max_merge_deviation", r.max_merge_deviation},
           {"log_rows", r.log.size()},
           {"seconds", r.seconds}};
  return doc.dump(2) + "\n";
}

}  // namespace thanora
