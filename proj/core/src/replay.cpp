#include "fcil/replay.hpp"

#include <algorithm>
#include <iterator>

#include <fmt/format.h>

#include "fcil/error.hpp"

namespace fcil {

std::vector<Sample> select_buffer_samples(const TaskDataset& task, std::size_t budget_per_group,
                                          GroupMode mode, std::mt19937_64& rng) {
  std::vector<Sample> out;
  if (budget_per_group == 0) return out;
  for (const auto& [key, members] : group_index(task.samples, mode)) {
    std::vector<std::size_t> chosen;
    std::sample(members.begin(), members.end(), std::back_inserter(chosen), budget_per_group, rng);
    for (auto i : chosen) out.push_back(task.samples[i]);
  }
  return out;
}

void ReplayBuffer::add_task(const TaskDataset& task, std::mt19937_64& rng) {
  store(task.task_id, select_buffer_samples(task, budget_per_group_, mode_, rng));
}

void ReplayBuffer::store(int task_id, std::vector<Sample> samples) {
  if (per_task_.contains(task_id))
    throw ContractViolation(fmt::format("ReplayBuffer: task {} already stored", task_id));
  per_task_.emplace(task_id, std::move(samples));
}

std::vector<Sample> ReplayBuffer::merged() const {
  std::vector<Sample> out;
  out.reserve(size());
  for (const auto& [id, samples] : per_task_) out.insert(out.end(), samples.begin(), samples.end());
  return out;
}

std::size_t ReplayBuffer::size() const {
  std::size_t n = 0;
  for (const auto& [id, samples] : per_task_) n += samples.size();
  return n;
}

}  // namespace fcil
