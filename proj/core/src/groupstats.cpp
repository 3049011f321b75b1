#include "fcil/groupstats.hpp"

#include <set>

#include <fmt/format.h>

#include "fcil/error.hpp"

namespace fcil {

std::string GroupKey::str() const {
  return z ? fmt::format("y{}z{}", y, *z) : fmt::format("y{}", y);
}

GroupIndex group_index(std::span<const Sample> samples, GroupMode mode) {
  GroupIndex idx;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    GroupKey key{samples[i].label, std::nullopt};
    if (mode == GroupMode::by_class_and_z) {
      if (!samples[i].sensitive)
        throw ContractViolation(fmt::format("group_index: sample {} has no sensitive attribute", i));
      key.z = samples[i].sensitive;
    }
    idx[key].push_back(i);
  }
  return idx;
}

namespace {

std::vector<Sample> gather(std::span<const Sample> src, const std::vector<std::size_t>& idx) {
  std::vector<Sample> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(src[i]);
  return out;
}

void add_stats(GroupStatsMap& out, const MlpModel& model, std::span<const Sample> src,
               GroupMode mode, bool normalize) {
  for (const auto& [key, members] : group_index(src, mode)) {
    if (out.contains(key))
      throw ContractViolation("compute_group_stats: group " + key.str() +
                              " appears in both the current task and the buffer");
    const auto samples = gather(src, members);
    GroupStats st;
    st.key = key;
    st.count = samples.size();
    st.loss = mean_loss(model, samples);
    st.avg_grad = last_layer_grad(model, samples);
    if (normalize) st.avg_grad = st.avg_grad.unit();
    out.emplace(key, std::move(st));
  }
}

}  // namespace

GroupStatsMap compute_group_stats(const MlpModel& model, std::span<const Sample> current,
                                  std::span<const Sample> buffer, GroupMode mode,
                                  bool normalize, std::span<const GroupKey> expected,
                                  std::vector<std::string>* warnings) {
  GroupStatsMap out;
  add_stats(out, model, current, mode, normalize);
  std::set<int> current_classes;
  for (const auto& s : current) current_classes.insert(s.label);
  for (const auto& s : buffer)
    if (current_classes.contains(s.label))
      throw ContractViolation(fmt::format(
          "compute_group_stats: buffer holds class {} of the current task", s.label));
  add_stats(out, model, buffer, mode, normalize);
  for (const auto& key : expected) {
    if (!out.contains(key) && warnings)
      warnings->push_back("group " + key.str() + " has no samples; dropped from objective");
  }
  return out;
}

Matrix sample_gradients(const MlpModel& model, std::span<const Sample> current, bool normalize) {
  Matrix g = per_sample_last_layer_grads(model, current);
  if (normalize) {
    for (Eigen::Index r = 0; r < g.rows(); ++r) {
      const double n = g.row(r).norm();
      if (n > 0.0) g.row(r) /= n;
    }
  }
  return g;
}

LinearLossForm operator+(const LinearLossForm& l, const LinearLossForm& r) {
  if (l.b.size() != r.b.size()) throw ContractViolation("LinearLossForm: size mismatch");
  return {l.a + r.a, l.b + r.b};
}

LinearLossForm operator-(const LinearLossForm& l, const LinearLossForm& r) {
  if (l.b.size() != r.b.size()) throw ContractViolation("LinearLossForm: size mismatch");
  return {l.a - r.a, l.b - r.b};
}

LinearLossForm operator*(double s, const LinearLossForm& f) { return {s * f.a, s * f.b}; }

double approx_group_loss(const LinearLossForm& form, std::span<const double> w) {
  if (static_cast<std::size_t>(form.b.size()) != w.size())
    throw ContractViolation(fmt::format("approx_group_loss: |w| = {} but |b| = {}", w.size(),
                                        form.b.size()));
  double dot = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) dot += form.b[static_cast<Eigen::Index>(i)] * w[i];
  return form.a - dot;
}

double approx_group_loss(const LinearLossForm& form, const Vector& w) {
  return approx_group_loss(form, std::span<const double>(w.data(), static_cast<std::size_t>(w.size())));
}

LinearFormMap linear_forms(const GroupStatsMap& stats, const Matrix& sample_grads, double alpha) {
  if (alpha < 0.0) throw ContractViolation("linear_forms: alpha must be non-negative");
  LinearFormMap out;
  const auto n = sample_grads.rows();
  if (n == 0) throw ContractViolation("linear_forms: no current-task samples");
  const double scale = alpha / static_cast<double>(n);
  for (const auto& [key, st] : stats) {
    if (st.avg_grad.values().size() != sample_grads.cols())
      throw ContractViolation("linear_forms: gradient dimension mismatch for " + key.str());
    out.emplace(key, LinearLossForm{st.loss, scale * (sample_grads * st.avg_grad.values())});
  }
  return out;
}

GroupCounts GroupCounts::from_samples(std::span<const Sample> samples) {
  GroupCounts c;
  c.accumulate(samples);
  return c;
}

void GroupCounts::accumulate(std::span<const Sample> samples) {
  for (const auto& s : samples) {
    if (!s.sensitive) throw ContractViolation("GroupCounts: sample without sensitive attribute");
    ++m_yz[{s.label, *s.sensitive}];
    ++m_star_z[*s.sensitive];
  }
}

DpScaledForms dp_scale(const LinearFormMap& joint_forms, const GroupCounts& counts,
                       std::span<const int> sensitive_values) {
  if (sensitive_values.empty()) throw ContractViolation("dp_scale: no sensitive values");
  DpScaledForms out;
  const double inv_z = 1.0 / static_cast<double>(sensitive_values.size());
  for (const auto& [key, form] : joint_forms) {
    if (!key.z) throw ContractViolation("dp_scale: class-only key " + key.str());
    const auto yz = counts.m_yz.find({key.y, *key.z});
    if (yz == counts.m_yz.end())
      throw ContractViolation("dp_scale: counts missing group " + key.str());
    const auto star = counts.m_star_z.find(*key.z);
    if (star == counts.m_star_z.end() || star->second == 0)
      throw ContractViolation(fmt::format("dp_scale: m_*z is zero for z = {}", *key.z));
    const double factor = static_cast<double>(yz->second) / static_cast<double>(star->second);
    out.factors[key] = factor;
    LinearLossForm scaled = factor * form;
    auto [it, inserted] = out.per_class.try_emplace(key.y, inv_z * scaled);
    if (!inserted) it->second = it->second + inv_z * scaled;
    out.joint.emplace(key, std::move(scaled));
  }
  return out;
}

}  // namespace fcil
