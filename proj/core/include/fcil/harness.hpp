#pragma once

// Experiment driver: YAML configs, multi-seed runs of FSW and the baselines,
// hyperparameter sweeps, and CSV output.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "fcil/datasets.hpp"
#include "fcil/metrics.hpp"
#include "fcil/trainer.hpp"

namespace fcil {

enum class DatasetKind { toy, toy_yz, color_biased, csv, idx };

std::string to_string(DatasetKind k);
DatasetKind parse_dataset_kind(std::string_view s);

struct DatasetSpec {
  DatasetKind kind = DatasetKind::toy;
  int n_per_class = 500;
  int n_test_per_class = 500;
  int tasks = 2;  // split count for color_biased, csv and idx
  ColorBiasConfig color;
  // Ingestion. Without a test path every fifth training sample is held out.
  std::filesystem::path train_path;
  std::filesystem::path train_labels_path;  // idx only
  std::filesystem::path test_path;
  std::filesystem::path test_labels_path;   // idx only
  CsvOptions csv;
};

struct SweepGrid {
  std::vector<double> alpha;
  std::vector<double> lambda;
  std::vector<double> tau;
  std::vector<double> eta;
};

struct ExperimentConfig {
  DatasetSpec dataset;
  TrainConfig train;  // train.fsw holds the FSW settings
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};
  std::vector<Method> methods = {Method::fsw, Method::uniform_replay, Method::finetune,
                                 Method::joint};
  std::filesystem::path out_dir = "results";
  int workers = 1;
  SweepGrid sweep;  // empty axes fall back to the train/fsw values

  void validate() const;
};

// Parses the YAML sections dataset, model, train, fsw, run and sweep. Unknown
// keys are rejected. Missing keys keep their defaults.
ExperimentConfig parse_config(const std::string& yaml_text, const std::string& source = "<config>");
ExperimentConfig load_config(const std::filesystem::path& path);
std::string dump_config(const ExperimentConfig& cfg);

// Builds the task stream for one seed. Generators use the seed; ingested data
// ignores it.
TaskStream build_stream(const DatasetSpec& spec, std::uint64_t seed);

struct RunRecord {
  Method method = Method::fsw;
  std::uint64_t seed = 0;
  RunHistory history;
  MetricsReport report;
};

struct AggregateRow {
  Method method = Method::fsw;
  std::size_t runs = 0;
  double avg_accuracy_mean = 0.0, avg_accuracy_std = 0.0;
  double final_accuracy_mean = 0.0, final_accuracy_std = 0.0;
  std::optional<double> disparity_mean, disparity_std;  // configured measure
};

struct ExperimentResult {
  std::vector<RunRecord> runs;  // method order of the config, then seed order
  std::vector<AggregateRow> aggregate;
};

// Runs every (method, seed) pair on a worker pool and, when write_outputs is
// set, writes per_seed.csv, aggregate.csv, tasks.csv, manifest.yaml, one
// runs/<method>_seed<k>.csv per finished job, and for FSW runs weights.csv
// and fsw_epochs.csv.
ExperimentResult run_experiment(const ExperimentConfig& cfg, bool write_outputs = true);

// Sample standard deviation (n - 1); zero for a single value.
std::vector<AggregateRow> aggregate_runs(const std::vector<RunRecord>& runs,
                                         const std::vector<Method>& methods,
                                         FairnessMeasure measure);

struct SweepRow {
  double alpha = 0.0, lambda = 0.0, tau = 0.0, eta = 0.0;
  double accuracy = 0.0;   // mean average accuracy over seeds
  double disparity = 0.0;  // mean configured disparity over seeds
  bool pareto = false;
};

// Row i is Pareto-optimal unless another row has strictly higher accuracy and
// strictly lower disparity.
std::vector<bool> pareto_flags(const std::vector<SweepRow>& rows);

// FSW over the grid product (alpha, lambda, tau, eta); writes sweep.csv.
std::vector<SweepRow> grid_sweep(const ExperimentConfig& cfg, bool write_outputs = true);

// CSV writers, exposed for testing.
void write_per_seed_csv(std::ostream& out, const std::vector<RunRecord>& runs);
void write_aggregate_csv(std::ostream& out, const std::vector<AggregateRow>& rows,
                         FairnessMeasure measure);
void write_tasks_csv(std::ostream& out, const std::vector<RunRecord>& runs);
void write_weights_csv(std::ostream& out, const std::vector<RunRecord>& runs, int bins = 10);
void write_epochs_csv(std::ostream& out, const std::vector<RunRecord>& runs);
void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows);

// Writes train.csv and test.csv, every task in order, readable by read_csv.
void write_stream(const std::filesystem::path& dir, const TaskStream& stream);

}  // namespace fcil
