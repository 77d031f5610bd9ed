// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <filesystem>
#include <limits>
#include <random>

#include <gtest/gtest.h>

#include "thanora/error.hpp"
#include "thanora/serialization.hpp"
#include "thanora/verify.hpp"

namespace fs = std::filesystem;

namespace thanora {
namespace {

class TempDir {
 public:
  TempDir() {
    path_ = fs::temp_directory_path() /
            ("thanora_ser_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) + "_" +
             ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

ModelSnapshot sample_model(Rng& rng) {
  ModelSnapshot m = model_from_weights({gaussian_matrix(rng, 5, 4), gaussian_matrix(rng, 3, 5)},
                                       Nonlinearity::tanh);
  m.layers[0].adapter = random_adapter(5, 4, {1, 2}, 1, rng);
  m.layers[0].adapter.layer_id = 0;
  m.layers[0].adapter.task_blocks[0].task_id = "alpha";
  m.layers[0].adapter.task_blocks[1].task_id = "beta";
  m.layers[0].adapter.rebuild_layout();
  m.layers[1].adapter = random_adapter(3, 5, {2, 1}, 0, rng);
  m.layers[1].adapter.layer_id = 1;
  m.layers[1].adapter.task_blocks[0].task_id = "alpha";
  m.layers[1].adapter.task_blocks[1].task_id = "beta";
  m.layers[1].adapter.rebuild_layout();
  m.layers[1].compensation_mode = CompensationMode::injective;
  return m;
}

TEST(FormatDouble, ShortestRoundTrip) {
  EXPECT_EQ(format_double(0.1), "0.1");
  EXPECT_EQ(format_double(1.0), "1");
  Rng rng(1);
  std::normal_distribution<double> n(0.0, 1e3);
  for (int i = 0; i < 1000; ++i) {
    const double v = n(rng) * std::pow(10.0, i % 40 - 20);
    EXPECT_EQ(std::stod(format_double(v)), v);
  }
}

TEST(MatrixJson, BitExactRoundTrip) {
  Rng rng(2);
  const DenseMatrix m = gaussian_matrix(rng, 7, 3);
  EXPECT_EQ(matrix_from_json(matrix_to_json(m)), m);
  const DenseMatrix empty(0, 4);
  const DenseMatrix back = matrix_from_json(matrix_to_json(empty));
  EXPECT_EQ(back.rows(), 0u);
  EXPECT_EQ(back.cols(), 4u);
}

TEST(MatrixJson, MalformedDocumentsNameTheProblem) {
  try {
    matrix_from_json(R"({"rows": 2, "cols": 2, "data_rowmajor": [1, 2, 3]})");
    FAIL() << "expected IoError";
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find("data_rowmajor"), std::string::npos);
  }
  try {
    matrix_from_json(R"({"rows": 1, "data_rowmajor": [1]})");
    FAIL() << "expected IoError";
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find("cols"), std::string::npos);
  }
  EXPECT_THROW(matrix_from_json("{not json"), IoError);
}

TEST(AdapterJson, RoundTripPreservesBlocksLayoutAndMode) {
  Rng rng(3);
  const ModelSnapshot m = sample_model(rng);
  const BlockAdapter& adp = m.layers[0].adapter;
  const AdapterDocument doc = adapter_from_json(adapter_to_json(adp, CompensationMode::injective));
  EXPECT_EQ(doc.compensation_mode, CompensationMode::injective);
  EXPECT_EQ(doc.adapter.column_layout, adp.column_layout);
  EXPECT_EQ(doc.adapter.concatenated_b(), adp.concatenated_b());
  EXPECT_EQ(doc.adapter.concatenated_a(), adp.concatenated_a());
  EXPECT_EQ(doc.adapter.task_blocks[1].task_id, "beta");
}

TEST(AdapterJson, RejectsUnsupportedVersion) {
  Rng rng(4);
  const ModelSnapshot m = sample_model(rng);
  std::string text = adapter_to_json(m.layers[0].adapter, CompensationMode::output_preserving);
  const std::string key = "\"format_version\":1";
  const auto pos = text.find(key);
  ASSERT_NE(pos, std::string::npos);
  std::string bumped = text;
  bumped.replace(pos, key.size(), "\"format_version\":99");
  try {
    adapter_from_json(bumped);
    FAIL() << "expected IoError";
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find("format_version"), std::string::npos);
  }
}

TEST(Checkpoint, WriteReadIsBitExact) {
  TempDir dir;
  Rng rng(5);
  const ModelSnapshot m = sample_model(rng);
  write_checkpoint(dir.path() / "ckpt", m);
  EXPECT_TRUE(fs::exists(dir.path() / "ckpt" / "manifest.json"));
  const ModelSnapshot back = read_checkpoint(dir.path() / "ckpt");
  EXPECT_EQ(back.nonlinearity, m.nonlinearity);
  ASSERT_EQ(back.layers.size(), 2u);
  for (std::size_t l = 0; l < 2; ++l) {
    EXPECT_EQ(back.layers[l].base_w, m.layers[l].base_w);
    EXPECT_EQ(back.layers[l].adapter.concatenated_b(), m.layers[l].adapter.concatenated_b());
    EXPECT_EQ(back.layers[l].adapter.concatenated_a(), m.layers[l].adapter.concatenated_a());
    EXPECT_EQ(back.layers[l].compensation_mode, m.layers[l].compensation_mode);
    EXPECT_EQ(back.merged_weights()[l], m.merged_weights()[l]);
  }
}

TEST(Checkpoint, CorruptFilesAreReportedByName) {
  TempDir dir;
  Rng rng(6);
  write_checkpoint(dir.path(), sample_model(rng));
  write_text_file(dir.path() / "adapter_1.json", "{\"format_version\": 1}");
  try {
    read_checkpoint(dir.path());
    FAIL() << "expected IoError";
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find("adapter_1.json"), std::string::npos) << e.what();
  }
  EXPECT_THROW(read_checkpoint(dir.path() / "missing"), IoError);
}

TEST(MergedWeightsJson, RoundTripAndChainCheck) {
  Rng rng(7);
  const MergedWeights w{{gaussian_matrix(rng, 4, 3), gaussian_matrix(rng, 2, 4)}, Nonlinearity::tanh};
  const MergedWeights back = merged_weights_from_json(merged_weights_to_json(w));
  EXPECT_EQ(back.nonlinearity, Nonlinearity::tanh);
  EXPECT_EQ(back.weights[0], w.weights[0]);
  EXPECT_EQ(back.weights[1], w.weights[1]);
  const MergedWeights broken{{gaussian_matrix(rng, 4, 3), gaussian_matrix(rng, 2, 5)}, Nonlinearity::none};
  EXPECT_THROW(merged_weights_from_json(merged_weights_to_json(broken)), IoError);
}

TEST(DatasetJson, RoundTrip) {
  Rng rng(8);
  TaskDataset ds;
  ds.task_id = "t";
  ds.train_inputs = gaussian_matrix(rng, 3, 5);
  ds.train_targets = gaussian_matrix(rng, 2, 5);
  ds.eval_inputs = gaussian_matrix(rng, 3, 2);
  ds.eval_targets = gaussian_matrix(rng, 2, 2);
  ds.true_deltas = {gaussian_matrix(rng, 2, 3)};
  ds.input_spectrum = {1.0, 0.5, 1.0 / 3.0};
  const TaskDataset back = dataset_from_json(dataset_to_json(ds));
  EXPECT_EQ(back.task_id, "t");
  EXPECT_EQ(back.train_targets, ds.train_targets);
  EXPECT_EQ(back.true_deltas[0], ds.true_deltas[0]);
  EXPECT_EQ(back.input_spectrum, ds.input_spectrum);
}

TEST(Csv, EscapingAndLineEndings) {
  EXPECT_EQ(csv_escape("plain"), "plain");
  EXPECT_EQ(csv_escape("a,b"), "\"a,b\"");
  EXPECT_EQ(csv_escape("say \"hi\""), "\"say \"\"hi\"\"\"");
  EXPECT_EQ(csv_escape("two\nlines"), "\"two\nlines\"");
  CsvWriter w({"x", "y"});
  w.add_row({"1", "a,b"});
  EXPECT_EQ(w.str(), "x,y\r\n1,\"a,b\"\r\n");
  EXPECT_THROW(w.add_row({"only one"}), DimensionError);
}

TEST(TextFiles, WriteThenReadAndMissingFile) {
  TempDir dir;
  write_text_file(dir.path() / "a.txt", "hello\n");
  EXPECT_EQ(read_text_file(dir.path() / "a.txt"), "hello\n");
  EXPECT_THROW(read_text_file(dir.path() / "nope.txt"), IoError);
}

}  // namespace
}  // namespace thanora
