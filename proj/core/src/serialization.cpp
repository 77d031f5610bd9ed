// SPDX-License-Identifier: Apache-2.0
#include "thanora/serialization.hpp"

#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "thanora/error.hpp"

namespace thanora {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json payload(const DenseMatrix& m) { return json(std::vector<double>(m.data().begin(), m.data().end())); }

json matrix_json(const DenseMatrix& m) {
  return json{{"rows", m.rows()}, {"cols", m.cols()}, {"data_rowmajor", payload(m)}};
}

json parse_document(std::string_view text, std::string_view what) {
  try {
    return json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw IoError(fmt::format("{}: malformed JSON ({})", what, e.what()));
  }
}

// Field access that reports the document path on failure.
template <typename T>
T field(const json& obj, std::string_view key, std::string_view where) {
  if (!obj.is_object() || !obj.contains(key)) {
    throw IoError(fmt::format("{}: missing field '{}'", where, key));
  }
  try {
    return obj.at(std::string(key)).get<T>();
  } catch (const json::exception&) {
    throw IoError(fmt::format("{}: field '{}' has the wrong type", where, key));
  }
}

DenseMatrix matrix_payload(const json& obj, std::string_view key, std::size_t rows,
                           std::size_t cols, std::string_view where) {
  auto data = field<std::vector<double>>(obj, key, where);
  if (data.size() != rows * cols) {
    throw IoError(fmt::format("{}: '{}' holds {} values, expected {}x{}", where, key, data.size(),
                              rows, cols));
  }
  try {
    return DenseMatrix(rows, cols, std::move(data));
  } catch (const Error& e) {
    throw IoError(fmt::format("{}: '{}': {}", where, key, e.what()));
  }
}

DenseMatrix matrix_from(const json& doc, std::string_view where) {
  const auto rows = field<std::size_t>(doc, "rows", where);
  const auto cols = field<std::size_t>(doc, "cols", where);
  return matrix_payload(doc, "data_rowmajor", rows, cols, where);
}

json adapter_json(const BlockAdapter& adapter, CompensationMode mode) {
  json blocks = json::array();
  auto add = [&](std::string_view id, const DenseMatrix& b, const DenseMatrix& a) {
    blocks.push_back({{"block_id", id},
                      {"task_id", id},
                      {"r", b.cols()},
                      {"b_rowmajor", payload(b)},
                      {"a_rowmajor", payload(a)}});
  };
  for (const auto& blk : adapter.task_blocks) add(blk.task_id, blk.b, blk.a);
  add(kCoopBlockId, adapter.coop_b, adapter.coop_a);

  json layout = json::array();
  for (const auto& e : adapter.column_layout) {
    layout.push_back({{"block_id", e.block_id}, {"offset", e.offset}, {"width", e.width}});
  }
  return json{{"format_version", kAdapterFormatVersion},
              {"layer_id", adapter.layer_id},
              {"d_out", adapter.d_out},
              {"d_in", adapter.d_in},
              {"gamma", adapter.gamma},
              {"compensation_mode", to_string(mode)},
              {"blocks", std::move(blocks)},
              {"layout", std::move(layout)}};
}

AdapterDocument adapter_from(const json& doc, std::string_view where) {
  const int version = field<int>(doc, "format_version", where);
  if (version != kAdapterFormatVersion) {
    throw IoError(fmt::format("{}: unsupported format_version {}", where, version));
  }
  AdapterDocument out;
  BlockAdapter& adp = out.adapter;
  adp.layer_id = field<std::size_t>(doc, "layer_id", where);
  adp.d_out = field<std::size_t>(doc, "d_out", where);
  adp.d_in = field<std::size_t>(doc, "d_in", where);
  adp.gamma = field<double>(doc, "gamma", where);
  try {
    out.compensation_mode =
        compensation_mode_from_string(field<std::string>(doc, "compensation_mode", where));
  } catch (const ConfigError& e) {
    throw IoError(fmt::format("{}: {}", where, e.what()));
  }

  const json blocks = field<json>(doc, "blocks", where);
  if (!blocks.is_array() || blocks.empty()) {
    throw IoError(fmt::format("{}: 'blocks' must be a non-empty array", where));
  }
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const std::string here = fmt::format("{}: blocks[{}]", where, i);
    const json& blk = blocks[i];
    const auto id = field<std::string>(blk, "block_id", here);
    const auto r = field<std::size_t>(blk, "r", here);
    DenseMatrix b = matrix_payload(blk, "b_rowmajor", adp.d_out, r, here);
    DenseMatrix a = matrix_payload(blk, "a_rowmajor", r, adp.d_in, here);
    const bool last = i + 1 == blocks.size();
    if (last != (id == kCoopBlockId)) {
      throw IoError(fmt::format("{}: the cooperative block must come last, exactly once", here));
    }
    if (last) {
      adp.coop_b = std::move(b);
      adp.coop_a = std::move(a);
    } else {
      adp.task_blocks.push_back({id, std::move(b), std::move(a)});
    }
  }

  const json layout = field<json>(doc, "layout", where);
  if (!layout.is_array()) throw IoError(fmt::format("{}: 'layout' must be an array", where));
  for (std::size_t i = 0; i < layout.size(); ++i) {
    const std::string here = fmt::format("{}: layout[{}]", where, i);
    adp.column_layout.push_back({field<std::string>(layout[i], "block_id", here),
                                 field<std::size_t>(layout[i], "offset", here),
                                 field<std::size_t>(layout[i], "width", here)});
  }
  try {
    adp.validate();
  } catch (const DimensionError& e) {
    throw IoError(fmt::format("{}: {}", where, e.what()));
  }
  return out;
}

}  // namespace

std::string matrix_to_json(const DenseMatrix& m) { return matrix_json(m).dump(); }

DenseMatrix matrix_from_json(std::string_view text) {
  return matrix_from(parse_document(text, "matrix"), "matrix");
}

std::string adapter_to_json(const BlockAdapter& adapter, CompensationMode mode) {
  return adapter_json(adapter, mode).dump();
}

AdapterDocument adapter_from_json(std::string_view text) {
  return adapter_from(parse_document(text, "adapter"), "adapter");
}

void write_checkpoint(const fs::path& dir, const ModelSnapshot& model) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError(fmt::format("cannot create checkpoint directory {}: {}", dir.string(), ec.message()));

  json layers = json::array();
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    const auto& layer = model.layers[l];
    const std::string base_file = fmt::format("base_{}.json", l);
    const std::string adapter_file = fmt::format("adapter_{}.json", l);
    write_text_file(dir / base_file, matrix_to_json(layer.base_w));
    write_text_file(dir / adapter_file, adapter_to_json(layer.adapter, layer.compensation_mode));
    layers.push_back({{"layer_id", l}, {"base_file", base_file}, {"adapter_file", adapter_file}});
  }
  const json manifest{{"format_version", kCheckpointFormatVersion},
                      {"nonlinearity", to_string(model.nonlinearity)},
                      {"dims", model.dims()},
                      {"layers", std::move(layers)}};
  write_text_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

ModelSnapshot read_checkpoint(const fs::path& dir) {
  const fs::path manifest_path = dir / "manifest.json";
  const std::string where = manifest_path.string();
  const json manifest = parse_document(read_text_file(manifest_path), where);
  const int version = field<int>(manifest, "format_version", where);
  if (version != kCheckpointFormatVersion) {
    throw IoError(fmt::format("{}: unsupported format_version {}", where, version));
  }

  ModelSnapshot model;
  try {
    model.nonlinearity = nonlinearity_from_string(field<std::string>(manifest, "nonlinearity", where));
  } catch (const ConfigError& e) {
    throw IoError(fmt::format("{}: {}", where, e.what()));
  }
  const json layers = field<json>(manifest, "layers", where);
  if (!layers.is_array() || layers.empty()) {
    throw IoError(fmt::format("{}: 'layers' must be a non-empty array", where));
  }
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const std::string here = fmt::format("{}: layers[{}]", where, l);
    const fs::path base_path = dir / field<std::string>(layers[l], "base_file", here);
    const fs::path adapter_path = dir / field<std::string>(layers[l], "adapter_file", here);
    DenseMatrix base = matrix_from(parse_document(read_text_file(base_path), base_path.string()),
                                   base_path.string());
    AdapterDocument doc = adapter_from(
        parse_document(read_text_file(adapter_path), adapter_path.string()), adapter_path.string());
    if (doc.adapter.layer_id != l) {
      throw IoError(fmt::format("{}: layer_id {} listed at position {}", adapter_path.string(),
                                doc.adapter.layer_id, l));
    }
    model.layers.push_back({std::move(base), std::move(doc.adapter), doc.compensation_mode});
  }
  try {
    model.validate();
  } catch (const Error& e) {
    throw IoError(fmt::format("{}: {}", where, e.what()));
  }
  if (manifest.contains("dims") && field<std::vector<std::size_t>>(manifest, "dims", where) != model.dims()) {
    throw IoError(fmt::format("{}: 'dims' disagrees with the layer files", where));
  }
  return model;
}

std::string merged_weights_to_json(const MergedWeights& merged) {
  json layers = json::array();
  for (const auto& w : merged.weights) layers.push_back(matrix_json(w));
  return json{{"format_version", kCheckpointFormatVersion},
              {"nonlinearity", to_string(merged.nonlinearity)},
              {"weights", std::move(layers)}}
      .dump();
}

MergedWeights merged_weights_from_json(std::string_view text) {
  const json doc = parse_document(text, "merged weights");
  MergedWeights out;
  try {
    out.nonlinearity = nonlinearity_from_string(field<std::string>(doc, "nonlinearity", "merged weights"));
  } catch (const ConfigError& e) {
    throw IoError(fmt::format("merged weights: {}", e.what()));
  }
  const json layers = field<json>(doc, "weights", "merged weights");
  if (!layers.is_array()) throw IoError("merged weights: 'weights' must be an array");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    out.weights.push_back(matrix_from(layers[l], fmt::format("merged weights: weights[{}]", l)));
    if (l > 0 && out.weights[l].cols() != out.weights[l - 1].rows()) {
      throw IoError(fmt::format("merged weights: weights[{}] does not chain onto weights[{}]", l, l - 1));
    }
  }
  return out;
}

std::string dataset_to_json(const TaskDataset& ds) {
  json deltas = json::array();
  for (const auto& e : ds.true_deltas) deltas.push_back(matrix_json(e));
  return json{{"task_id", ds.task_id},
              {"train_inputs", matrix_json(ds.train_inputs)},
              {"train_targets", matrix_json(ds.train_targets)},
              {"eval_inputs", matrix_json(ds.eval_inputs)},
              {"eval_targets", matrix_json(ds.eval_targets)},
              {"true_deltas", std::move(deltas)},
              {"input_spectrum", ds.input_spectrum}}
      .dump();
}

TaskDataset dataset_from_json(std::string_view text) {
  const json doc = parse_document(text, "dataset");
  auto sub = [&](std::string_view key) {
    return matrix_from(field<json>(doc, key, "dataset"), fmt::format("dataset: {}", key));
  };
  TaskDataset ds;
  ds.task_id = field<std::string>(doc, "task_id", "dataset");
  ds.train_inputs = sub("train_inputs");
  ds.train_targets = sub("train_targets");
  ds.eval_inputs = sub("eval_inputs");
  ds.eval_targets = sub("eval_targets");
  const json deltas = field<json>(doc, "true_deltas", "dataset");
  for (std::size_t l = 0; l < deltas.size(); ++l) {
    ds.true_deltas.push_back(matrix_from(deltas[l], fmt::format("dataset: true_deltas[{}]", l)));
  }
  ds.input_spectrum = field<std::vector<double>>(doc, "input_spectrum", "dataset");
  return ds;
}

std::string priors_to_json(const std::vector<std::vector<TaskPrior>>& priors) {
  json rows = json::array();
  for (const auto& layer : priors) {
    for (const auto& p : layer) {
      rows.push_back({{"task", p.task_id},
                      {"layer", p.layer_id},
                      {"sigma", p.svd.sigma},
                      {"entropy", p.entropy}});
    }
  }
  return rows.dump(2) + "\n";
}

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open {}", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError(fmt::format("error while reading {}", path.string()));
  return ss.str();
}

void write_text_file(const fs::path& path, std::string_view content) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (ec) throw IoError(fmt::format("cannot create {}: {}", path.parent_path().string(), ec.message()));
  }
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(fmt::format("cannot write {}", tmp.string()));
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw IoError(fmt::format("error while writing {}", tmp.string()));
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError(fmt::format("cannot move {} into place: {}", path.string(), ec.message()));
}

CsvWriter::CsvWriter(std::vector<std::string> header) : columns_(header.size()) {
  if (columns_ == 0) throw DimensionError("CsvWriter: empty header");
  add_row(std::move(header));
}

void CsvWriter::add_row(std::vector<std::string> fields) {
  if (fields.size() != columns_) {
    throw DimensionError(fmt::format("CsvWriter: row has {} fields, header has {}", fields.size(), columns_));
  }
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i > 0) out_ += ',';
    out_ += csv_escape(fields[i]);
  }
  out_ += "\r\n";
}

std::string CsvWriter::str() const { return out_; }

std::string csv_escape(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::string format_double(double value) { return fmt::format("{}", value); }

}  // namespace thanora
