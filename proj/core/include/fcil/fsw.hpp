#pragma once

// Fairness-aware sample weighting: per-sample weights w in [0,1]^|T_l| for the
// current task, chosen by an LP that trades off approximated post-update loss
// disparities across sensitive groups against the current-task loss.

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fcil/groupstats.hpp"
#include "fcil/lp.hpp"
#include "fcil/tensorcore.hpp"

namespace fcil {

enum class FairnessMeasure { eer, eo, dp };

std::string to_string(FairnessMeasure m);
FairnessMeasure parse_measure(std::string_view s);

struct FswConfig {
  double alpha = 0.001;
  double lambda = 0.5;
  FairnessMeasure measure = FairnessMeasure::eer;
  // Unit-normalize the group average gradients / the per-sample gradients
  // before taking inner products.
  bool normalize_group_grads = true;
  bool normalize_sample_grads = true;

  void validate() const;
};

// Default hyperparameter grids.
inline constexpr double kAlphaGrid[] = {0.0005, 0.001, 0.002, 0.01};
inline constexpr double kLambdaGrid[] = {0.1, 0.5, 1.0};

class WeightVector {
 public:
  WeightVector() = default;
  explicit WeightVector(std::vector<double> values);  // checks [0,1]
  static WeightVector ones(std::size_t n) { return WeightVector(std::vector<double>(n, 1.0)); }

  [[nodiscard]] std::size_t size() const { return values_.size(); }
  [[nodiscard]] std::span<const double> values() const { return values_; }
  [[nodiscard]] double operator[](std::size_t i) const { return values_[i]; }
  // Share of entries within tol of 0 or 1.
  [[nodiscard]] double near_binary_fraction(double tol = 1e-6) const;

 private:
  std::vector<double> values_;
};

// Everything the objective needs besides the measure: class-level forms
// (keys without z), (class, z) forms, DP counts, and the class/attribute sets.
struct ObjectiveInputs {
  LinearFormMap class_forms;
  LinearFormMap joint_forms;
  GroupCounts counts;
  double lambda = 0.5;
  std::vector<int> all_classes;      // every class seen so far
  std::vector<int> current_classes;  // classes of the current task
  std::vector<int> sensitive_values; // empty for class-only streams
  int n = 0;                         // |T_l|
};

// EER: sum_y 1/|Y| |l~(G_y) - l~(G_Y)| with l~(G_Y) the mean class form.
// EO:  sum_{y,z} 1/(|Y||Z|) |l~(G_yz) - l~(G_y)|.
// DP:  as EO on count-scaled forms.
// Each adds lambda/|Y_c| (EER) or lambda/(|Y_c||Z|) (EO, DP) times the
// unscaled current-task group forms. Groups without a form are skipped and
// noted in `warnings`.
AbsObjective build_objective(FairnessMeasure measure, const ObjectiveInputs& in,
                             std::vector<std::string>* warnings = nullptr);

struct FswResult {
  WeightVector weights;
  double objective = 0.0;          // objective at the returned weights
  double objective_at_ones = 0.0;  // objective at uniform weights
  LpStatus status = LpStatus::optimal;
  std::size_t lp_iterations = 0;
  std::size_t abs_terms = 0;
  std::vector<std::string> warnings;
};

struct FswContext {
  std::vector<int> all_classes;
  std::vector<int> sensitive_values;
};

// Runs group stats -> per-sample gradients -> objective -> LP solve against
// the given model snapshot. `buffer` holds the stored samples of earlier
// tasks (empty on the first task).
FswResult fsw_weights(std::span<const Sample> task, std::span<const Sample> buffer,
                      const MlpModel& model, const FswConfig& cfg, const FswContext& ctx,
                      const SimplexOptions& lp_options = {});

}  // namespace fcil
