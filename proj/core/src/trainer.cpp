#include "fcil/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>
#include <numeric>

#include <fmt/format.h>

#include "fcil/error.hpp"

namespace fcil {

void TrainConfig::validate() const {
  if (!(eta > 0.0)) throw ConfigError("train: eta must be > 0");
  if (!(tau >= 0.0)) throw ConfigError("train: tau must be >= 0");
  if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("train: momentum must be in [0,1)");
  for (int h : hidden)
    if (h < 1) throw ConfigError("train: hidden widths must be positive");
  if (fsw_enabled) fsw.validate();
}

GroupMode buffer_group_mode(const TaskStream& stream, BudgetMode mode) {
  return stream.has_sensitive() && mode == BudgetMode::per_sensitive_group
             ? GroupMode::by_class_and_z
             : GroupMode::by_class;
}

namespace {

std::vector<Sample> pick(std::span<const Sample> src, std::span<const std::size_t> idx) {
  std::vector<Sample> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(src[i]);
  return out;
}

}  // namespace

TaskTrainResult train_task(MlpModel& model, const TaskDataset& task, ReplayBuffer& buffer,
                           const TrainConfig& cfg, const FswContext& ctx, std::mt19937_64& rng) {
  cfg.validate();
  if (task.samples.empty())
    throw ContractViolation(fmt::format("train_task: task {} is empty", task.task_id));
  if (cfg.replay && task.task_id > 0 && buffer.empty())
    throw ContractViolation(
        fmt::format("train_task: task {} needs replay data but the buffer is empty", task.task_id));

  TaskTrainResult result;
  const std::vector<Sample> memory = cfg.replay ? buffer.merged() : std::vector<Sample>{};
  const bool weighted = cfg.fsw_enabled && (task.task_id > 0 || cfg.fsw_first_task);
  const std::size_t n = task.samples.size();
  const auto batch = static_cast<std::size_t>(cfg.batch_size);

  SgdMomentum opt(cfg.eta, cfg.momentum);
  std::vector<std::size_t> order(n);
  std::vector<std::size_t> memory_idx(memory.size());
  std::iota(memory_idx.begin(), memory_idx.end(), std::size_t{0});

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::vector<double> w(n, 1.0);
    if (weighted) {
      const FswResult fr = fsw_weights(task.samples, memory, model, cfg.fsw, ctx);
      w.assign(fr.weights.values().begin(), fr.weights.values().end());
      EpochRecord rec;
      rec.task = task.task_id;
      rec.epoch = epoch;
      rec.objective = fr.objective;
      rec.objective_at_ones = fr.objective_at_ones;
      rec.near_binary = fr.weights.near_binary_fraction();
      rec.weights = w;
      const bool joint = cfg.fsw.measure != FairnessMeasure::eer;
      for (const auto& s : task.samples)
        rec.groups.push_back(GroupKey{s.label, joint ? s.sensitive : std::nullopt});
      result.epochs.push_back(std::move(rec));
    }

    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t stop = std::min(n, start + batch);
      const std::span<const std::size_t> ids(order.data() + start, stop - start);
      const auto batch_samples = pick(task.samples, ids);
      std::vector<double> batch_w;
      batch_w.reserve(ids.size());
      for (auto i : ids) batch_w.push_back(w[i]);

      Vector g = full_grad(model, batch_samples, batch_w);
      if (cfg.replay && !memory.empty() && cfg.tau > 0.0) {
        Vector g_prev;
        if (cfg.full_buffer_grad) {
          g_prev = full_grad(model, memory);
        } else {
          std::vector<std::size_t> chosen;
          std::sample(memory_idx.begin(), memory_idx.end(), std::back_inserter(chosen),
                      std::min(ids.size(), memory.size()), rng);
          g_prev = full_grad(model, pick(memory, chosen));
        }
        g += cfg.tau * g_prev;
      }
      opt.step(model, g);
    }
    if (!model.all_finite())
      throw Error(fmt::format("train_task: parameters diverged in task {} epoch {}", task.task_id, epoch));
  }

  if (cfg.replay) buffer.add_task(task, rng);
  return result;
}

std::string to_string(Method m) {
  switch (m) {
    case Method::fsw: return "fsw";
    case Method::uniform_replay: return "uniform_replay";
    case Method::finetune: return "finetune";
    case Method::joint: return "joint";
  }
  return "unknown";
}

Method parse_method(std::string_view s) {
  if (s == "fsw") return Method::fsw;
  if (s == "uniform_replay" || s == "replay") return Method::uniform_replay;
  if (s == "finetune") return Method::finetune;
  if (s == "joint") return Method::joint;
  throw ConfigError(fmt::format(
      "unknown method '{}' (expected fsw, uniform_replay, finetune or joint)", s));
}

namespace {

double accuracy_on(const MlpModel& model, std::span<const Sample> samples) {
  if (samples.empty()) throw ContractViolation("evaluate: task has no test samples");
  const auto pred = predict(model, samples);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) hits += pred[i] == samples[i].label;
  return static_cast<double>(hits) / static_cast<double>(samples.size());
}

}  // namespace

TaskSnapshot evaluate_snapshot(const MlpModel& model, const TaskStream& stream,
                               std::size_t task_index) {
  TaskSnapshot snap;
  std::vector<Sample> seen;
  for (std::size_t t = 0; t <= task_index; ++t) {
    const auto& test = stream.test.at(t).samples;
    snap.accuracy.push_back(accuracy_on(model, test));
    seen.insert(seen.end(), test.begin(), test.end());
  }
  const auto pred = predict(model, seen);
  const auto labels = labels_of(seen);
  const auto classes = stream.classes_through(task_index);
  snap.eer = disparity(FairnessMeasure::eer, pred, labels, {}, classes).value;
  if (stream.has_sensitive()) {
    std::vector<int> z;
    z.reserve(seen.size());
    for (const auto& s : seen) z.push_back(s.sensitive.value_or(0));
    snap.eo = disparity(FairnessMeasure::eo, pred, labels, z, classes).value;
    snap.dp = disparity(FairnessMeasure::dp, pred, labels, z, classes).value;
  }
  return snap;
}

RunHistory run_method(Method method, const TaskStream& stream, const TrainConfig& base,
                      std::uint64_t seed, MlpModel* final_model) {
  TrainConfig cfg = base;
  switch (method) {
    case Method::fsw:
      cfg.fsw_enabled = true;
      cfg.replay = true;
      break;
    case Method::uniform_replay:
      cfg.fsw_enabled = false;
      cfg.replay = true;
      break;
    case Method::finetune:
    case Method::joint:
      cfg.fsw_enabled = false;
      cfg.replay = false;
      break;
  }
  cfg.validate();
  if (stream.tasks.empty()) throw ContractViolation("run_method: empty stream");

  std::seed_seq init_seq{seed, std::uint64_t{1}};
  std::seed_seq train_seq{seed, std::uint64_t{2}};
  std::mt19937_64 init_rng(init_seq);
  std::mt19937_64 rng(train_seq);
  MlpModel model = MlpModel::create(stream.num_features, cfg.hidden, stream.num_classes, init_rng);
  ReplayBuffer buffer(cfg.buffer_per_group, buffer_group_mode(stream, cfg.budget_mode));

  RunHistory history;
  TaskDataset seen_so_far;
  for (std::size_t l = 0; l < stream.tasks.size(); ++l) {
    FswContext ctx{stream.classes_through(l), stream.sensitive_values};
    const TaskDataset* task = &stream.tasks[l];
    if (method == Method::joint) {
      seen_so_far.task_id = static_cast<int>(l);
      seen_so_far.classes = ctx.all_classes;
      seen_so_far.samples.insert(seen_so_far.samples.end(), task->samples.begin(),
                                 task->samples.end());
      task = &seen_so_far;
    }
    auto res = train_task(model, *task, buffer, cfg, ctx, rng);
    history.epochs.insert(history.epochs.end(), std::make_move_iterator(res.epochs.begin()),
                          std::make_move_iterator(res.epochs.end()));
    history.tasks.push_back(evaluate_snapshot(model, stream, l));
  }
  if (final_model) *final_model = std::move(model);
  return history;
}

}  // namespace fcil
