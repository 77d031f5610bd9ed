// SPDX-License-Identifier: Apache-2.0
#include "thanora/config.hpp"

#include <algorithm>
#include <set>
#include <type_traits>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "thanora/error.hpp"
#include "thanora/serialization.hpp"

namespace thanora {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string join_path(std::string_view parent, std::string_view key) {
  return parent.empty() ? std::string(key) : fmt::format("{}.{}", parent, key);
}

// Typed reads of one JSON value; `path` names it in diagnostics.
void read(const json& j, const std::string& path, double& out) {
  if (!j.is_number()) throw ConfigError(fmt::format("{}: expected a number", path));
  out = j.get<double>();
}

template <typename T>
  requires std::is_integral_v<T> && std::is_unsigned_v<T> && (!std::is_same_v<T, bool>)
void read(const json& j, const std::string& path, T& out) {
  // Non-negative integer literals parse as unsigned.
  if (!j.is_number_unsigned()) {
    throw ConfigError(fmt::format("{}: expected a non-negative integer", path));
  }
  out = j.get<T>();
}

void read(const json& j, const std::string& path, bool& out) {
  if (!j.is_boolean()) throw ConfigError(fmt::format("{}: expected true or false", path));
  out = j.get<bool>();
}

void read(const json& j, const std::string& path, std::string& out) {
  if (!j.is_string()) throw ConfigError(fmt::format("{}: expected a string", path));
  out = j.get<std::string>();
}

template <typename T>
void read(const json& j, const std::string& path, std::vector<T>& out) {
  if (!j.is_array()) throw ConfigError(fmt::format("{}: expected an array", path));
  out.clear();
  for (std::size_t i = 0; i < j.size(); ++i) {
    T v{};
    read(j[i], fmt::format("{}[{}]", path, i), v);
    out.push_back(std::move(v));
  }
}

// An object whose keys must all be consumed.
class Fields {
 public:
  Fields(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) {
      throw ConfigError(fmt::format("{}: expected an object", path_.empty() ? "<root>" : path_));
    }
  }

  template <typename T>
  void get(std::string_view key, T& out) {
    seen_.insert(std::string(key));
    const auto it = j_.find(std::string(key));
    if (it != j_.end()) read(*it, join_path(path_, key), out);
  }

  /// Nested object, or nullptr when the key is absent.
  const json* child(std::string_view key) {
    seen_.insert(std::string(key));
    const auto it = j_.find(std::string(key));
    return it == j_.end() ? nullptr : &*it;
  }

  std::string path(std::string_view key) const { return join_path(path_, key); }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) {
        throw ConfigError(fmt::format("{}: unknown key", join_path(path_, key)));
      }
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

template <typename Enum, typename Parse>
void read_enum(Fields& f, std::string_view key, Enum& out, Parse parse) {
  const json* value = f.child(key);
  if (!value) return;
  std::string name;
  read(*value, f.path(key), name);
  try {
    out = parse(name);
  } catch (const ConfigError& e) {
    throw ConfigError(fmt::format("{}: {}", f.path(key), e.what()));
  }
}

TaskSpec read_task(const json& j, const std::string& path) {
  TaskSpec t;
  Fields f(j, path);
  f.get("task_id", t.task_id);
  f.get("true_ranks", t.true_ranks);
  f.get("spectrum_decay", t.spectrum_decay);
  f.get("noise_std", t.noise_std);
  f.get("num_train", t.num_train);
  f.get("num_eval", t.num_eval);
  f.get("seed", t.seed);
  f.get("update_scale", t.update_scale);
  f.get("input_floor", t.input_floor);
  f.finish();
  if (t.task_id.empty()) throw ConfigError(fmt::format("{}.task_id: required", path));
  if (t.true_ranks.empty()) throw ConfigError(fmt::format("{}.true_ranks: required", path));
  if (t.noise_std < 0.0) throw ConfigError(fmt::format("{}.noise_std: must be non-negative", path));
  if (t.input_floor < 0.0) throw ConfigError(fmt::format("{}.input_floor: must be non-negative", path));
  if (t.num_train == 0) throw ConfigError(fmt::format("{}.num_train: must be positive", path));
  return t;
}

std::pair<std::size_t, std::size_t> line_and_column(std::string_view text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i + 1 < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

}  // namespace

ConfigFile parse_config(std::string_view text, const fs::path& base_dir) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    const auto [line, col] = line_and_column(text, e.byte);
    throw ConfigError(fmt::format("syntax error at line {}, column {}", line, col));
  }

  ConfigFile out;
  ExperimentConfig& cfg = out.experiment;
  Fields root(doc, "");

  if (const json* m = root.child("model")) {
    Fields f(*m, "model");
    f.get("dims", cfg.model.dims);
    read_enum(f, "nonlinearity", cfg.model.nonlinearity, nonlinearity_from_string);
    read_enum(f, "base_init", cfg.model.base_init, base_init_from_string);
    f.get("seed", cfg.model.seed);
    f.finish();
  }

  if (const json* tasks = root.child("tasks")) {
    if (!tasks->is_array()) throw ConfigError("tasks: expected an array");
    for (std::size_t i = 0; i < tasks->size(); ++i) {
      cfg.tasks.push_back(read_task((*tasks)[i], fmt::format("tasks[{}]", i)));
    }
  }
  root.get("data_seed", cfg.data_seed);

  if (const json* a = root.child("alloc")) {
    Fields f(*a, "alloc");
    f.get("r_total", cfg.alloc.r_total);
    f.get("r_min", cfg.alloc.r_min);
    f.get("tau", cfg.alloc.tau);
    f.finish();
  }
  cfg.alloc.num_tasks = cfg.tasks.size();

  root.get("gamma", cfg.gamma);
  root.get("lambda", cfg.lambda);
  read_enum(root, "mode", cfg.mode, arm_mode_from_string);
  read_enum(root, "compensation_mode", cfg.compensation_mode, compensation_mode_from_string);

  if (const json* t = root.child("trainer")) {
    Fields f(*t, "trainer");
    f.get("lr", cfg.trainer.lr);
    f.get("steps", cfg.trainer.steps);
    f.get("batch", cfg.trainer.batch);
    f.get("seed", cfg.trainer.seed);
    f.get("log_every", cfg.trainer.log_every);
    f.get("overlap_every", cfg.trainer.overlap_every);
    f.finish();
  }

  root.get("preview_samples_per_task", cfg.preview_samples_per_task);
  if (const json* d = root.child("damping"); d && !d->is_null()) {
    read(*d, "damping", cfg.damping);
    if (cfg.damping < 0.0) throw ConfigError("damping: must be non-negative (omit it for the default)");
  }
  if (const json* e = root.child("entropy_override"); e && !e->is_null()) {
    std::vector<std::vector<double>> table;
    read(*e, "entropy_override", table);
    cfg.entropy_override = std::move(table);
  }

  if (const json* o = root.child("output")) {
    Fields f(*o, "output");
    std::string dir;
    f.get("dir", dir);
    if (!dir.empty()) out.out_dir = (base_dir / dir).lexically_normal();
    if (const json* r = f.child("reports")) {
      Fields rf(*r, "output.reports");
      rf.get("priors", out.reports.priors);
      rf.get("allocation", out.reports.allocation);
      rf.get("training_log", out.reports.training_log);
      rf.get("overlap_log", out.reports.overlap_log);
      rf.get("checkpoints", out.reports.checkpoints);
      rf.finish();
    }
    f.finish();
  }
  root.finish();

  cfg.validate();
  return out;
}

ConfigFile load_config(const fs::path& path) {
  if (!fs::exists(path)) throw ConfigError(fmt::format("config file not found: {}", path.string()));
  std::string text;
  try {
    text = read_text_file(path);
  } catch (const IoError& e) {
    throw ConfigError(e.what());
  }
  try {
    ConfigFile cf = parse_config(text, path.parent_path());
    cf.source = path;
    return cf;
  } catch (const ConfigError& e) {
    throw ConfigError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

std::string config_to_json(const ExperimentConfig& cfg) {
  json tasks = json::array();
  for (const auto& t : cfg.tasks) {
    tasks.push_back({{"task_id", t.task_id},
                     {"true_ranks", t.true_ranks},
                     {"spectrum_decay", t.spectrum_decay},
                     {"noise_std", t.noise_std},
                     {"num_train", t.num_train},
                     {"num_eval", t.num_eval},
                     {"seed", t.seed},
                     {"update_scale", t.update_scale},
                     {"input_floor", t.input_floor}});
  }
  json doc{{"model",
            {{"dims", cfg.model.dims},
             {"nonlinearity", to_string(cfg.model.nonlinearity)},
             {"base_init", to_string(cfg.model.base_init)},
             {"seed", cfg.model.seed}}},
           {"tasks", std::move(tasks)},
           {"data_seed", cfg.data_seed},
           {"alloc", {{"r_total", cfg.alloc.r_total}, {"r_min", cfg.alloc.r_min}, {"tau", cfg.alloc.tau}}},
           {"gamma", cfg.gamma},
           {"lambda", cfg.lambda},
           {"mode", to_string(cfg.mode)},
           {"compensation_mode", to_string(cfg.compensation_mode)},
           {"trainer",
            {{"lr", cfg.trainer.lr},
             {"steps", cfg.trainer.steps},
             {"batch", cfg.trainer.batch},
             {"seed", cfg.trainer.seed},
             {"log_every", cfg.trainer.log_every},
             {"overlap_every", cfg.trainer.overlap_every}}},
           {"preview_samples_per_task", cfg.preview_samples_per_task}};
  if (cfg.damping >= 0.0) doc["damping"] = cfg.damping;
  if (cfg.entropy_override) doc["entropy_override"] = *cfg.entropy_override;
  return doc.dump(2) + "\n";
}

}  // namespace thanora
