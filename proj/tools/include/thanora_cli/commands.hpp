// SPDX-License-Identifier: Apache-2.0
//
// Subcommand implementations behind the thanora executable. They take parsed
// options and two streams so tests can drive them in-process.
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <string>

#include "thanora/config.hpp"
#include "thanora/verify.hpp"

namespace thanora::cli {

enum ExitCode : int {
  kOk = 0,
  kVerificationFailed = 1,
  kConfigError = 2,
  kNumericError = 3,
  kIoError = 4,
  kInternalError = 5,
};

/// Environment variable naming the default output directory.
inline constexpr const char* kOutDirEnv = "THANORA_OUT_DIR";

struct RunOptions {
  std::filesystem::path config;
  /// lora_baseline, hasi_only, hasi_spr or all. Unset keeps the config's mode.
  std::optional<std::string> mode;
  /// Overrides trainer.seed.
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> steps;
  std::optional<std::filesystem::path> out;
};

/// --out, then output.dir from the config, then $THANORA_OUT_DIR, then
/// ./thanora_out.
std::filesystem::path resolve_out_dir(const std::optional<std::filesystem::path>& flag,
                                      const ConfigFile& config);

int cmd_priors(const RunOptions& options, std::ostream& out, std::ostream& err);
int cmd_allocate(const RunOptions& options, std::ostream& out, std::ostream& err);
int cmd_train(const RunOptions& options, std::ostream& out, std::ostream& err);
int cmd_merge(const std::filesystem::path& checkpoint, const std::filesystem::path& out_path,
              std::ostream& out, std::ostream& err);
int cmd_verify(const VerifyOptions& options, std::ostream& out, std::ostream& err);

/// Runs `body`, translating library exceptions into exit codes and a one-line
/// message on `err`.
int guarded(std::ostream& err, const std::function<int()>& body);

}  // namespace thanora::cli
