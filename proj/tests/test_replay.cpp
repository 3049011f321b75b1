#include <doctest.h>

#include <algorithm>
#include <map>
#include <random>

#include "fcil/datasets.hpp"
#include "fcil/error.hpp"
#include "fcil/replay.hpp"
#include "support.hpp"

using namespace fcil;

namespace {

// classes x z-values, `per_cell` samples each, features tag the position.
TaskDataset grid_task(int task_id, std::vector<int> classes, int z_values, int per_cell) {
  TaskDataset t;
  t.task_id = task_id;
  t.classes = classes;
  int k = 0;
  for (int y : classes)
    for (int z = 0; z < z_values; ++z)
      for (int i = 0; i < per_cell; ++i) t.samples.push_back(test::sample({double(k++)}, y, z));
  return t;
}

}  // namespace

TEST_CASE("select_buffer_samples: per sensitive group budget") {
  std::mt19937_64 rng(1);
  const auto task = grid_task(0, {0, 1}, 2, 100);
  const auto picked = select_buffer_samples(task, 32, GroupMode::by_class_and_z, rng);
  CHECK(picked.size() == 128);
  std::map<std::pair<int, int>, int> cells;
  for (const auto& s : picked) {
    ++cells[{s.label, s.sensitive.value()}];
    CHECK(std::find(task.samples.begin(), task.samples.end(), s) != task.samples.end());
  }
  for (const auto& [cell, n] : cells) CHECK(n == 32);
  // Within a group, source order is kept.
  for (std::size_t i = 1; i < picked.size(); ++i)
    if (picked[i].label == picked[i - 1].label && picked[i].sensitive == picked[i - 1].sensitive)
      CHECK(picked[i].features[0] > picked[i - 1].features[0]);
}

TEST_CASE("select_buffer_samples: zero budget, undersized groups, per-class mode") {
  std::mt19937_64 rng(2);
  const auto task = grid_task(0, {3}, 1, 5);
  CHECK(select_buffer_samples(task, 0, GroupMode::by_class, rng).empty());
  CHECK(select_buffer_samples(task, 32, GroupMode::by_class, rng) == task.samples);
  const auto two = grid_task(0, {0, 1}, 2, 10);
  CHECK(select_buffer_samples(two, 4, GroupMode::by_class, rng).size() == 8);
}

TEST_CASE("select_buffer_samples: reproducible and leaves the task untouched") {
  const auto task = grid_task(0, {0, 1}, 2, 50);
  const auto copy = task.samples;
  std::mt19937_64 a(9), b(9);
  CHECK(select_buffer_samples(task, 7, GroupMode::by_class_and_z, a) ==
        select_buffer_samples(task, 7, GroupMode::by_class_and_z, b));
  CHECK(task.samples == copy);
}

TEST_CASE("ReplayBuffer: merged order and counts") {
  ReplayBuffer empty;
  CHECK(empty.merged().empty());
  CHECK(empty.empty());

  ReplayBuffer buf(32, GroupMode::by_class);
  buf.store(0, grid_task(0, {0}, 1, 3).samples);
  buf.store(1, grid_task(1, {1}, 1, 4).samples);
  const auto m = buf.merged();
  REQUIRE(m.size() == 7);
  for (int i = 0; i < 3; ++i) CHECK(m[i].label == 0);
  for (int i = 3; i < 7; ++i) CHECK(m[i].label == 1);
  CHECK_THROWS_AS(buf.store(1, {}), ContractViolation);
}

TEST_CASE("ReplayBuffer: size after each task is the running sum of stored shares") {
  const auto s = gen_toy_gaussians(40, 3);
  ReplayBuffer buf(8, GroupMode::by_class);
  std::mt19937_64 rng(4);
  std::size_t expected = 0;
  for (const auto& t : s.tasks) {
    buf.add_task(t, rng);
    expected += 8 * t.classes.size();
    CHECK(buf.merged().size() == expected);
    CHECK(buf.size() <= buf.budget_per_group() * 3);
  }
}
