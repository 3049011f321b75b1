#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "fcil/datasets.hpp"
#include "fcil/fsw.hpp"
#include "fcil/metrics.hpp"
#include "fcil/replay.hpp"
#include "fcil/tensorcore.hpp"

namespace fcil {

enum class BudgetMode {
  per_sensitive_group,  // budget per (y, z) when the stream has z, else per class
  per_class,
};

struct TrainConfig {
  double eta = 0.01;
  double tau = 1.0;
  int epochs = 5;
  int batch_size = 64;
  double momentum = 0.9;
  std::vector<int> hidden = {256, 256};

  FswConfig fsw;
  bool fsw_enabled = true;
  bool fsw_first_task = true;  // false skips weighting on the first task

  bool replay = true;             // false: no buffer gradient, nothing stored
  bool full_buffer_grad = false;  // g_prev over the whole buffer, not a batch
  std::size_t buffer_per_group = 32;
  BudgetMode budget_mode = BudgetMode::per_sensitive_group;

  void validate() const;
};

inline constexpr double kTauGrid[] = {1.0, 2.0, 5.0, 10.0};
inline constexpr double kEtaGrid[] = {0.001, 0.01, 0.1};

GroupMode buffer_group_mode(const TaskStream& stream, BudgetMode mode);

struct TaskTrainResult {
  std::vector<EpochRecord> epochs;  // one per FSW epoch
};

// One task of fair class-incremental training. Per epoch: weights from FSW
// against the epoch-start model (or all ones), then minibatch steps
//   theta <- theta - eta * momentum_update(g_curr + tau * g_prev)
// with g_curr the weighted batch gradient normalized by the batch size and
// g_prev the mean gradient over a buffer batch of equal size. Momentum starts
// from zero. With replay enabled the buffer then receives this task's share.
TaskTrainResult train_task(MlpModel& model, const TaskDataset& task, ReplayBuffer& buffer,
                           const TrainConfig& cfg, const FswContext& ctx, std::mt19937_64& rng);

enum class Method { fsw, uniform_replay, finetune, joint };

std::string to_string(Method m);
Method parse_method(std::string_view s);

// Accuracy on each seen task's test split and disparities on their union.
TaskSnapshot evaluate_snapshot(const MlpModel& model, const TaskStream& stream,
                               std::size_t task_index);

// Runs a whole stream with one method. The model initialization depends only
// on the seed, so methods sharing a seed start from identical weights.
RunHistory run_method(Method method, const TaskStream& stream, const TrainConfig& cfg,
                      std::uint64_t seed, MlpModel* final_model = nullptr);

}  // namespace fcil
