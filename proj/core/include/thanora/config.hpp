// SPDX-License-Identifier: Apache-2.0
//
// JSON experiment configuration. Parsing is strict: unknown keys, wrong types
// and out-of-range values are rejected with the dotted path of the field, and
// syntax errors with a line and column.
#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "thanora/pipeline.hpp"

namespace thanora {

/// Which optional artifacts cmd_train writes next to the summary.
struct ReportToggles {
  bool priors = true;
  bool allocation = true;
  bool training_log = true;
  bool overlap_log = true;
  bool checkpoints = true;
};

struct ConfigFile {
  ExperimentConfig experiment;
  /// Output directory, already resolved against the config file's directory.
  std::optional<std::filesystem::path> out_dir;
  ReportToggles reports;
  /// The file the configuration was read from (empty for in-memory text).
  std::filesystem::path source;
};

/// Parses a config document. Relative paths inside it are resolved against
/// base_dir. alloc.num_tasks is filled from the task list. Throws ConfigError.
ConfigFile parse_config(std::string_view text, const std::filesystem::path& base_dir);

/// Reads and parses `path`; the message of a missing file names the path.
ConfigFile load_config(const std::filesystem::path& path);

/// Canonical JSON form of an experiment config (parse_config reads it back).
std::string config_to_json(const ExperimentConfig& cfg);

}  // namespace thanora
