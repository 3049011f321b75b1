#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fcil/fsw.hpp"
#include "fcil/groups.hpp"

namespace fcil {

// Per-epoch FSW diagnostics.
struct EpochRecord {
  int task = 0;
  int epoch = 0;
  double objective = 0.0;
  double objective_at_ones = 0.0;
  double near_binary = 1.0;
  std::vector<double> weights;
  std::vector<GroupKey> groups;  // group of each weighted sample
};

// State after finishing task l: accuracy[t] = a_{l,t} for t <= l and the
// disparities on the union of test data of tasks <= l.
struct TaskSnapshot {
  std::vector<double> accuracy;
  std::optional<double> eer;
  std::optional<double> eo;
  std::optional<double> dp;
};

struct RunHistory {
  std::vector<TaskSnapshot> tasks;
  std::vector<EpochRecord> epochs;
};

struct AccuracySummary {
  std::vector<double> per_task;  // A_l = mean_t a_{l,t}
  double average = 0.0;          // mean over l of A_l
};

// accuracy[l] must hold l+1 finite entries.
AccuracySummary average_accuracy(const std::vector<std::vector<double>>& accuracy);

struct DisparityResult {
  double value = 0.0;
  std::size_t terms = 0;
  std::vector<std::string> warnings;
};

// Empirical disparity over samples whose label is in `classes`.
// EER: mean_y |Pr(yhat != y | y) - Pr(yhat != y)|
// EO:  mean_{y,z} |Pr(yhat = y | y, z) - Pr(yhat = y | y)|
// DP:  mean_{y,z} |Pr(yhat = y | z) - Pr(yhat = y)|
// Empty conditioning cells are skipped and the mean is taken over the
// remaining terms. `sensitive` is required (same length as labels) for EO/DP;
// the attribute values are those occurring in the evaluated samples.
DisparityResult disparity(FairnessMeasure measure, std::span<const int> predictions,
                          std::span<const int> labels, std::span<const int> sensitive,
                          std::span<const int> classes);

struct MetricsReport {
  double avg_accuracy = 0.0;
  std::vector<double> per_task;
  double final_accuracy = 0.0;  // A_L
  std::optional<double> eer;    // averaged over tasks
  std::optional<double> eo;
  std::optional<double> dp;

  [[nodiscard]] std::optional<double> disparity(FairnessMeasure m) const;
};

MetricsReport summarize(const RunHistory& history);

struct MetricRow {
  int task = 0;
  std::string metric;
  double value = 0.0;
};

// (task, metric, value) rows: accuracy_t<k>, avg_accuracy, eer, eo, dp.
std::vector<MetricRow> metric_rows(const RunHistory& history);

}  // namespace fcil
