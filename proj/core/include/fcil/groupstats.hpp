#pragma once

// Per-group losses and gradients against a model snapshot, and the affine
// forms a_G - b_G^T w that approximate each group's loss after a weighted
// gradient step on the current task.

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fcil/groups.hpp"
#include "fcil/tensorcore.hpp"

namespace fcil {

struct GroupStats {
  GroupKey key;
  double loss = 0.0;         // mean cross-entropy, nats
  GradientVector avg_grad;   // mean head gradient, unit norm when normalized
  std::size_t count = 0;
};

using GroupStatsMap = std::map<GroupKey, GroupStats>;

// Stats for every group of `current` (the current task T_l) and of `buffer`
// (stored samples of earlier tasks). A class present in both is rejected.
// Keys in `expected` that have no samples are skipped and reported through
// `warnings` when given.
GroupStatsMap compute_group_stats(const MlpModel& model, std::span<const Sample> current,
                                  std::span<const Sample> buffer, GroupMode mode,
                                  bool normalize = true,
                                  std::span<const GroupKey> expected = {},
                                  std::vector<std::string>* warnings = nullptr);

// One row per current-task sample; rows unit-normalized when requested (an
// all-zero row stays zero).
Matrix sample_gradients(const MlpModel& model, std::span<const Sample> current,
                        bool normalize = true);

struct LinearLossForm {
  double a = 0.0;
  Vector b;

  friend LinearLossForm operator+(const LinearLossForm& l, const LinearLossForm& r);
  friend LinearLossForm operator-(const LinearLossForm& l, const LinearLossForm& r);
  friend LinearLossForm operator*(double s, const LinearLossForm& f);
};

// a - b^T w.
double approx_group_loss(const LinearLossForm& form, std::span<const double> w);
double approx_group_loss(const LinearLossForm& form, const Vector& w);

using LinearFormMap = std::map<GroupKey, LinearLossForm>;

// b_G[i] = (alpha / n) * <avg_grad(G), g_i> where g_i is row i of
// sample_grads and n its row count; a_G = loss(G).
LinearFormMap linear_forms(const GroupStatsMap& stats, const Matrix& sample_grads, double alpha);

struct GroupCounts {
  std::map<std::pair<int, int>, std::size_t> m_yz;
  std::map<int, std::size_t> m_star_z;

  static GroupCounts from_samples(std::span<const Sample> samples);
  // Adds counts of a second sample set (e.g. current task plus buffer).
  void accumulate(std::span<const Sample> samples);
};

struct DpScaledForms {
  LinearFormMap joint;                 // (m_yz / m_*z) * form(G_yz)
  std::map<int, LinearLossForm> per_class;  // mean over z of the scaled forms
  std::map<GroupKey, double> factors;
};

// Count-scaled forms for the demographic-parity objective. Every (y,z) key of
// `joint_forms` must appear in `counts`; a zero m_*z is an error.
DpScaledForms dp_scale(const LinearFormMap& joint_forms, const GroupCounts& counts,
                       std::span<const int> sensitive_values);

}  // namespace fcil
