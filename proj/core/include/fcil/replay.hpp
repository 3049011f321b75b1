#pragma once

#include <cstddef>
#include <map>
#include <random>
#include <vector>

#include "fcil/datasets.hpp"
#include "fcil/groups.hpp"

namespace fcil {

// Uniform sampling without replacement inside each group of `task`; groups
// smaller than the budget are kept whole. Output is in group order, and
// within a group in source order. The task is not modified.
std::vector<Sample> select_buffer_samples(const TaskDataset& task, std::size_t budget_per_group,
                                          GroupMode mode, std::mt19937_64& rng);

class ReplayBuffer {
 public:
  ReplayBuffer() = default;
  ReplayBuffer(std::size_t budget_per_group, GroupMode mode)
      : budget_per_group_(budget_per_group), mode_(mode) {}

  // Selects this task's share and stores it under task.task_id.
  void add_task(const TaskDataset& task, std::mt19937_64& rng);
  void store(int task_id, std::vector<Sample> samples);

  // All stored samples, task order, deterministic.
  [[nodiscard]] std::vector<Sample> merged() const;
  [[nodiscard]] std::size_t size() const;
  [[nodiscard]] bool empty() const { return size() == 0; }
  [[nodiscard]] const std::map<int, std::vector<Sample>>& per_task() const { return per_task_; }
  [[nodiscard]] std::size_t budget_per_group() const { return budget_per_group_; }
  [[nodiscard]] GroupMode mode() const { return mode_; }

 private:
  std::size_t budget_per_group_ = 32;
  GroupMode mode_ = GroupMode::by_class;
  std::map<int, std::vector<Sample>> per_task_;
};

}  // namespace fcil
