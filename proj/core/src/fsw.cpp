#include "fcil/fsw.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <fmt/format.h>

#include "fcil/error.hpp"

namespace fcil {

std::string to_string(FairnessMeasure m) {
  switch (m) {
    case FairnessMeasure::eer: return "eer";
    case FairnessMeasure::eo: return "eo";
    case FairnessMeasure::dp: return "dp";
  }
  return "unknown";
}

FairnessMeasure parse_measure(std::string_view s) {
  if (s == "eer" || s == "EER") return FairnessMeasure::eer;
  if (s == "eo" || s == "EO") return FairnessMeasure::eo;
  if (s == "dp" || s == "DP") return FairnessMeasure::dp;
  throw ConfigError(fmt::format("unknown fairness measure '{}' (expected eer, eo or dp)", s));
}

void FswConfig::validate() const {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw ConfigError("fsw: alpha must be > 0");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ConfigError("fsw: lambda must be >= 0");
}

WeightVector::WeightVector(std::vector<double> values) : values_(std::move(values)) {
  for (std::size_t i = 0; i < values_.size(); ++i)
    if (!(values_[i] >= 0.0 && values_[i] <= 1.0))
      throw ContractViolation(fmt::format("WeightVector: entry {} = {} outside [0,1]", i, values_[i]));
}

double WeightVector::near_binary_fraction(double tol) const {
  if (values_.empty()) return 1.0;
  const auto hits = std::count_if(values_.begin(), values_.end(), [tol](double v) {
    return std::abs(v) <= tol || std::abs(v - 1.0) <= tol;
  });
  return static_cast<double>(hits) / static_cast<double>(values_.size());
}

namespace {

const LinearLossForm* find_form(const LinearFormMap& forms, GroupKey key) {
  const auto it = forms.find(key);
  return it == forms.end() ? nullptr : &it->second;
}

void note(std::vector<std::string>* warnings, std::string msg) {
  if (warnings) warnings->push_back(std::move(msg));
}

AbsTerm abs_term(const LinearLossForm& f, double weight) { return AbsTerm{f.a, f.b, weight}; }
LinTerm lin_term(const LinearLossForm& f, double weight) { return LinTerm{f.a, f.b, weight}; }

}  // namespace

AbsObjective build_objective(FairnessMeasure measure, const ObjectiveInputs& in,
                             std::vector<std::string>* warnings) {
  AbsObjective obj;
  obj.n = in.n;
  const auto n_all = static_cast<double>(in.all_classes.size());
  const auto n_cur = static_cast<double>(in.current_classes.size());
  if (in.all_classes.empty()) throw ContractViolation("build_objective: no classes");

  if (measure == FairnessMeasure::eer) {
    std::vector<const LinearLossForm*> present;
    for (int y : in.all_classes) {
      if (const auto* f = find_form(in.class_forms, {y, std::nullopt})) present.push_back(f);
      else note(warnings, fmt::format("EER: class {} has no form; term dropped", y));
    }
    if (!present.empty()) {
      LinearLossForm mean{0.0, Vector::Zero(in.n)};
      for (const auto* f : present) mean = mean + *f;
      mean = (1.0 / static_cast<double>(present.size())) * mean;
      for (const auto* f : present) obj.abs_terms.push_back(abs_term(*f - mean, 1.0 / n_all));
    }
    for (int y : in.current_classes)
      if (const auto* f = find_form(in.class_forms, {y, std::nullopt}))
        obj.lin_terms.push_back(lin_term(*f, in.lambda / n_cur));
    return obj;
  }

  if (in.sensitive_values.empty())
    throw ConfigError(fmt::format("{} requires a sensitive attribute; this stream has none",
                                  to_string(measure)));
  const auto n_z = static_cast<double>(in.sensitive_values.size());
  const double fair_weight = 1.0 / (n_all * n_z);

  if (measure == FairnessMeasure::eo) {
    for (int y : in.all_classes) {
      const auto* fy = find_form(in.class_forms, {y, std::nullopt});
      for (int z : in.sensitive_values) {
        const auto* fyz = find_form(in.joint_forms, {y, z});
        if (!fy || !fyz) {
          note(warnings, fmt::format("EO: group y{}z{} missing; term dropped", y, z));
          continue;
        }
        obj.abs_terms.push_back(abs_term(*fyz - *fy, fair_weight));
      }
    }
  } else {
    const DpScaledForms scaled = dp_scale(in.joint_forms, in.counts, in.sensitive_values);
    for (int y : in.all_classes) {
      const auto cls = scaled.per_class.find(y);
      for (int z : in.sensitive_values) {
        const auto* fyz = find_form(scaled.joint, {y, z});
        if (!fyz || cls == scaled.per_class.end()) {
          note(warnings, fmt::format("DP: group y{}z{} missing; term dropped", y, z));
          continue;
        }
        obj.abs_terms.push_back(abs_term(*fyz - cls->second, fair_weight));
      }
    }
  }

  const double acc_weight = in.lambda / (n_cur * n_z);
  for (int y : in.current_classes)
    for (int z : in.sensitive_values)
      if (const auto* f = find_form(in.joint_forms, {y, z}))
        obj.lin_terms.push_back(lin_term(*f, acc_weight));
  return obj;
}

FswResult fsw_weights(std::span<const Sample> task, std::span<const Sample> buffer,
                      const MlpModel& model, const FswConfig& cfg, const FswContext& ctx,
                      const SimplexOptions& lp_options) {
  cfg.validate();
  if (task.empty()) throw ContractViolation("fsw_weights: empty current task");

  FswResult result;
  const bool joint = cfg.measure != FairnessMeasure::eer;

  ObjectiveInputs in;
  in.lambda = cfg.lambda;
  in.n = static_cast<int>(task.size());
  in.all_classes = ctx.all_classes;
  in.sensitive_values = ctx.sensitive_values;
  {
    std::set<int> cur;
    for (const auto& s : task) cur.insert(s.label);
    in.current_classes.assign(cur.begin(), cur.end());
  }
  if (in.all_classes.empty()) {
    std::set<int> all(in.current_classes.begin(), in.current_classes.end());
    for (const auto& s : buffer) all.insert(s.label);
    in.all_classes.assign(all.begin(), all.end());
  }

  std::vector<GroupKey> expected;
  for (int y : in.all_classes) expected.push_back({y, std::nullopt});
  const auto class_stats = compute_group_stats(model, task, buffer, GroupMode::by_class,
                                               cfg.normalize_group_grads, expected, &result.warnings);
  const Matrix grads = sample_gradients(model, task, cfg.normalize_sample_grads);
  in.class_forms = linear_forms(class_stats, grads, cfg.alpha);

  if (joint) {
    if (ctx.sensitive_values.empty())
      throw ConfigError(fmt::format("{} requires a sensitive attribute; this stream has none",
                                    to_string(cfg.measure)));
    expected.clear();
    for (int y : in.all_classes)
      for (int z : ctx.sensitive_values) expected.push_back({y, z});
    const auto joint_stats =
        compute_group_stats(model, task, buffer, GroupMode::by_class_and_z,
                            cfg.normalize_group_grads, expected, &result.warnings);
    in.joint_forms = linear_forms(joint_stats, grads, cfg.alpha);
    if (cfg.measure == FairnessMeasure::dp) {
      in.counts = GroupCounts::from_samples(task);
      in.counts.accumulate(buffer);
    }
  }

  const AbsObjective objective = build_objective(cfg.measure, in, &result.warnings);
  const LpProblem lp = build_abs_lp(objective);
  const LpSolution sol = solve_lp(lp, lp_options);
  result.status = sol.status;
  result.lp_iterations = sol.iterations;
  result.abs_terms = objective.abs_terms.size();
  if (sol.status != LpStatus::optimal)
    throw SolverError(fmt::format(
        "fsw_weights: LP ended with status {} after {} iterations ({} variables, {} rows)",
        to_string(sol.status), sol.iterations, lp.num_vars(), lp.num_rows()));

  std::vector<double> w(task.size());
  for (std::size_t i = 0; i < w.size(); ++i)
    w[i] = std::clamp(sol.w[static_cast<Eigen::Index>(i)], 0.0, 1.0);
  result.weights = WeightVector(std::move(w));
  const Eigen::Map<const Vector> wv(result.weights.values().data(),
                                    static_cast<Eigen::Index>(result.weights.size()));
  result.objective = objective.evaluate(wv);
  result.objective_at_ones = objective.evaluate(Vector::Ones(in.n));
  return result;
}

}  // namespace fcil
