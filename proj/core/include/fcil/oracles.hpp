#pragma once

// Brute-force reference computations. Everything here runs on plain
// std::vector loops and re-derives the arithmetic from scratch, so it can be
// used to check the Eigen-based implementations.

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "fcil/lp.hpp"
#include "fcil/tensorcore.hpp"

namespace fcil::oracle {

struct GridMin {
  std::vector<double> w;
  double value = 0.0;
  std::size_t evaluations = 0;
};

using Evaluator = std::function<double(std::span<const double>)>;

inline constexpr int kMaxGridDimension = 4;

// Exhaustive search over {0, step, ..., 1}^n. The first minimizer in
// lexicographic order wins ties, so a constant objective returns w = 0.
GridMin grid_min(const Evaluator& objective, int n, double step);

// sum weight*|a - b.w| + sum weight*(c - d.w), recomputed term by term.
double abs_objective_value(const AbsObjective& obj, std::span<const double> w);

GridMin grid_min(const AbsObjective& obj, double step);

// Lipschitz constant (Euclidean) of the objective: sum_i weight_i*|b_i| plus
// |sum_j weight_j*d_j|.
double lipschitz_constant(const AbsObjective& obj);

// Allowed gap between the grid minimum and the true minimum: L * step * sqrt(n).
double grid_gap_bound(const AbsObjective& obj, double step);

// Class probabilities for one input, hand-rolled.
std::vector<double> forward(const MlpModel& model, std::span<const double> x);

// Mean cross-entropy over samples, hand-rolled with the same probability floor.
double mean_loss(const MlpModel& model, std::span<const Sample> samples);

// Central differences of the mean loss over the head parameters, ordered as
// head weights row-major then head bias.
GradientVector finite_diff_grad(const MlpModel& model, std::span<const Sample> batch,
                                double step = 1e-4);

// Head gradient of (1/n) sum_i weights_i * loss(task_i), from explicit
// softmax derivatives (p - onehot) times the penultimate activations.
std::vector<double> weighted_head_grad(const MlpModel& model, std::span<const Sample> task,
                                       std::span<const double> weights);

// Copies the model, takes one head-only step of size eta along the weighted
// current-task gradient and returns the group's mean loss afterwards.
double exact_loss_after_step(const MlpModel& model, std::span<const Sample> group,
                             std::span<const Sample> task, std::span<const double> weights,
                             double eta);

}  // namespace fcil::oracle
