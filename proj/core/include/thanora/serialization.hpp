// SPDX-License-Identifier: Apache-2.0
//
// On-disk formats. Matrices travel in one JSON container shape,
// {"rows", "cols", "data_rowmajor"}, except inside adapter documents where
// each block carries its own b_rowmajor / a_rowmajor payloads. Doubles are
// written in their shortest round-trip decimal form, so a load after a save
// reproduces every bit.
#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "thanora/hasi.hpp"
#include "thanora/linalg.hpp"
#include "thanora/model.hpp"
#include "thanora/synthetic_tasks.hpp"
#include "thanora/task_prior.hpp"

namespace thanora {

inline constexpr int kAdapterFormatVersion = 1;
inline constexpr int kCheckpointFormatVersion = 1;

std::string matrix_to_json(const DenseMatrix& m);
/// Throws IoError when the document is not a well-formed matrix container.
DenseMatrix matrix_from_json(std::string_view text);

struct AdapterDocument {
  BlockAdapter adapter;
  CompensationMode compensation_mode = CompensationMode::output_preserving;
};

std::string adapter_to_json(const BlockAdapter& adapter, CompensationMode mode);
/// Validates shapes and the column layout; throws IoError with the offending
/// field on any inconsistency.
AdapterDocument adapter_from_json(std::string_view text);

/// Frozen bases plus adapters, one file per layer, indexed by manifest.json.
void write_checkpoint(const std::filesystem::path& dir, const ModelSnapshot& model);
ModelSnapshot read_checkpoint(const std::filesystem::path& dir);

struct MergedWeights {
  std::vector<DenseMatrix> weights;
  Nonlinearity nonlinearity = Nonlinearity::none;
};

std::string merged_weights_to_json(const MergedWeights& merged);
MergedWeights merged_weights_from_json(std::string_view text);

std::string dataset_to_json(const TaskDataset& dataset);
TaskDataset dataset_from_json(std::string_view text);

/// [layer][task] priors as a list of {task, layer, sigma[], entropy}.
std::string priors_to_json(const std::vector<std::vector<TaskPrior>>& priors);

/// Whole-file helpers. Writes go through a temporary sibling and a rename.
std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view content);

/// RFC 4180 table: CRLF line endings, fields quoted only when they contain a
/// comma, quote, CR or LF, embedded quotes doubled.
class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header);

  void add_row(std::vector<std::string> fields);
  std::size_t columns() const noexcept { return columns_; }
  std::string str() const;

 private:
  std::size_t columns_;
  std::string out_;
};

std::string csv_escape(std::string_view field);
/// Shortest decimal text that parses back to exactly `value`.
std::string format_double(double value);

}  // namespace thanora
