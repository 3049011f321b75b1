#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "fcil/tensorcore.hpp"

namespace fcil {

struct TaskDataset {
  int task_id = 0;
  std::vector<int> classes;  // ascending
  std::vector<Sample> samples;
};

// A class-incremental stream: tasks have pairwise disjoint class sets, and
// test[l] holds the held-out samples of the classes of tasks[l].
struct TaskStream {
  std::vector<TaskDataset> tasks;
  std::vector<TaskDataset> test;
  std::vector<int> all_classes;       // ascending union of task classes
  std::vector<int> sensitive_values;  // empty: the class is the sensitive attribute
  int num_features = 0;
  int num_classes = 0;                // head width, max label + 1
  std::vector<std::string> warnings;

  [[nodiscard]] bool has_sensitive() const { return !sensitive_values.empty(); }
  // Classes of tasks [0, task_index].
  [[nodiscard]] std::vector<int> classes_through(std::size_t task_index) const;
};

struct LabeledData {
  std::vector<Sample> samples;
};

enum class ToyVariant {
  class_as_group,       // three classes; sensitive groups are the classes
  label_and_attribute,  // classes 0/1/2 become (y,z) = (0,0), (0,1), (1,1)
};

// Three unit-covariance Gaussians with means (-2,-2), (2,4), (4,2). Task one
// holds the first two, task two the third. n_test_per_class < 0 means
// n_per_class.
TaskStream gen_toy_gaussians(int n_per_class, std::uint64_t seed,
                             ToyVariant variant = ToyVariant::class_as_group,
                             int n_test_per_class = -1);

struct ColorBiasConfig {
  int n_per_class = 1000;
  int n_test_per_class = 200;
  double bias_train = 0.95;
  double bias_test = 0.5;
  int n_classes = 10;
  int tasks = 5;
  int base_dim = 8;
  double center_scale = 1.0;
  double color_strength = 1.0;
};

// Class-conditional Gaussian features followed by a one-hot "background
// color" channel. Each class has a canonical color used with probability
// bias_train (bias_test on the test split); otherwise a uniformly chosen other
// color. The sensitive attribute is 1 for the canonical color, 0 otherwise.
TaskStream gen_color_biased(const ColorBiasConfig& cfg, std::uint64_t seed);

// Assigns ascending classes to `num_tasks` contiguous groups of equal size;
// leftover classes go to the last task and a warning is recorded.
TaskStream split_tasks(const LabeledData& train, const LabeledData& test, int num_tasks);
TaskStream split_tasks(const LabeledData& train, int num_tasks);

enum class DataFormat { csv, idx };

struct CsvOptions {
  // When set, the first num_features columns are features, followed by the
  // label and, if present, the sensitive attribute. Otherwise has_sensitive
  // decides whether the last column is the sensitive attribute. A header row
  // (detected when the first row is not numeric) may name the columns
  // "label"/"y" and "sensitive"/"z", which then take precedence.
  std::optional<int> num_features;
  bool has_sensitive = false;
};

LabeledData read_csv(std::istream& in, const CsvOptions& opts,
                     const std::string& source = "<stream>");

struct IdxArray {
  std::vector<std::uint32_t> dims;
  std::vector<std::uint8_t> data;
};

IdxArray read_idx(std::istream& in, const std::string& source = "<stream>");
// Images scaled to [0,1], one row per image.
Matrix idx_images(const IdxArray& images);

struct IngestSpec {
  std::filesystem::path path;
  DataFormat format = DataFormat::csv;
  std::filesystem::path labels_path;  // idx only
  CsvOptions csv;
};

LabeledData ingest(const IngestSpec& spec);

// features..., label[, sensitive] with a header row.
void write_csv(std::ostream& out, std::span<const Sample> samples);

}  // namespace fcil
