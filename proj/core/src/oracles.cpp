#include "fcil/oracles.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "fcil/error.hpp"

namespace fcil::oracle {

namespace {

int grid_points(double step) {
  if (!(step > 0.0) || step > 1.0) throw ContractViolation("grid_min: step must be in (0, 1]");
  return static_cast<int>(std::lround(1.0 / step)) + 1;
}

void check_dimension(int n) {
  if (n < 0) throw ContractViolation("grid_min: negative dimension");
  if (n > kMaxGridDimension)
    throw ContractViolation(fmt::format("grid_min: refusing n = {} (limit {})", n, kMaxGridDimension));
}

// Walks the grid in lexicographic order, calling visit(w) at each point.
template <typename Visit>
void walk_grid(int n, int points, double step, Visit&& visit) {
  std::vector<int> idx(static_cast<std::size_t>(n), 0);
  std::vector<double> w(static_cast<std::size_t>(n), 0.0);
  while (true) {
    for (int i = 0; i < n; ++i) w[i] = std::min(1.0, idx[i] * step);
    visit(std::span<const double>(w));
    int k = n - 1;
    while (k >= 0 && ++idx[k] == points) idx[k--] = 0;
    if (k < 0) break;
  }
}

struct Flat {
  std::vector<double> a, weight;
  std::vector<std::vector<double>> b;
  double lin_const = 0.0;
  std::vector<double> lin_coef;
};

Flat flatten(const AbsObjective& obj) {
  Flat f;
  f.lin_coef.assign(static_cast<std::size_t>(obj.n), 0.0);
  for (const auto& t : obj.abs_terms) {
    f.a.push_back(t.a);
    f.weight.push_back(t.weight);
    f.b.emplace_back(t.b.data(), t.b.data() + t.b.size());
  }
  for (const auto& t : obj.lin_terms) {
    f.lin_const += t.weight * t.c;
    for (int i = 0; i < obj.n; ++i) f.lin_coef[i] -= t.weight * t.d[i];
  }
  return f;
}

double eval_flat(const Flat& f, std::span<const double> w) {
  double total = f.lin_const;
  for (std::size_t i = 0; i < w.size(); ++i) total += f.lin_coef[i] * w[i];
  for (std::size_t k = 0; k < f.a.size(); ++k) {
    double r = f.a[k];
    for (std::size_t i = 0; i < w.size(); ++i) r -= f.b[k][i] * w[i];
    total += f.weight[k] * std::abs(r);
  }
  return total;
}

void check_terms(const AbsObjective& obj) {
  for (const auto& t : obj.abs_terms)
    if (t.b.size() != obj.n) throw ContractViolation("oracle: abs term length differs from n");
  for (const auto& t : obj.lin_terms)
    if (t.d.size() != obj.n) throw ContractViolation("oracle: linear term length differs from n");
}

// Activations of every layer for one input; back() holds the logits.
std::vector<std::vector<double>> activations(const MlpModel& model, std::span<const double> x) {
  const auto& layers = model.layers();
  if (layers.empty()) throw ContractViolation("oracle: model has no layers");
  if (static_cast<Eigen::Index>(x.size()) != layers.front().fan_in())
    throw ContractViolation("oracle: input dimension mismatch");
  std::vector<std::vector<double>> acts;
  acts.emplace_back(x.begin(), x.end());
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& L = layers[l];
    const auto& in = acts.back();
    std::vector<double> out(static_cast<std::size_t>(L.fan_out()));
    for (Eigen::Index k = 0; k < L.fan_out(); ++k) {
      double s = L.bias[k];
      for (Eigen::Index j = 0; j < L.fan_in(); ++j) s += in[j] * L.weights(j, k);
      if (l + 1 < layers.size()) s = s > 0.0 ? s : 0.0;
      out[k] = s;
    }
    acts.push_back(std::move(out));
  }
  return acts;
}

std::vector<double> softmax(const std::vector<double>& z) {
  double m = z[0];
  for (double v : z) m = std::max(m, v);
  std::vector<double> p(z.size());
  double sum = 0.0;
  for (std::size_t k = 0; k < z.size(); ++k) sum += p[k] = std::exp(z[k] - m);
  for (double& v : p) v /= sum;
  return p;
}

std::vector<double> features_of(const Sample& s) {
  return {s.features.data(), s.features.data() + s.features.size()};
}

}  // namespace

GridMin grid_min(const Evaluator& objective, int n, double step) {
  check_dimension(n);
  const int points = grid_points(step);
  GridMin best;
  best.value = kInfinity;
  walk_grid(n, points, step, [&](std::span<const double> w) {
    const double v = objective(w);
    ++best.evaluations;
    if (v < best.value) {
      best.value = v;
      best.w.assign(w.begin(), w.end());
    }
  });
  return best;
}

double abs_objective_value(const AbsObjective& obj, std::span<const double> w) {
  check_terms(obj);
  if (static_cast<int>(w.size()) != obj.n) throw ContractViolation("oracle: w length differs from n");
  double total = 0.0;
  for (const auto& t : obj.abs_terms) {
    double r = t.a;
    for (int i = 0; i < obj.n; ++i) r -= t.b[i] * w[i];
    total += t.weight * std::abs(r);
  }
  for (const auto& t : obj.lin_terms) {
    double r = t.c;
    for (int i = 0; i < obj.n; ++i) r -= t.d[i] * w[i];
    total += t.weight * r;
  }
  return total;
}

GridMin grid_min(const AbsObjective& obj, double step) {
  check_dimension(obj.n);
  check_terms(obj);
  const int points = grid_points(step);
  const Flat flat = flatten(obj);
  GridMin best;
  best.value = kInfinity;
  walk_grid(obj.n, points, step, [&](std::span<const double> w) {
    const double v = eval_flat(flat, w);
    ++best.evaluations;
    if (v < best.value) {
      best.value = v;
      best.w.assign(w.begin(), w.end());
    }
  });
  return best;
}

double lipschitz_constant(const AbsObjective& obj) {
  check_terms(obj);
  double total = 0.0;
  for (const auto& t : obj.abs_terms) {
    double sq = 0.0;
    for (int i = 0; i < obj.n; ++i) sq += t.b[i] * t.b[i];
    total += std::abs(t.weight) * std::sqrt(sq);
  }
  double sq = 0.0;
  for (int i = 0; i < obj.n; ++i) {
    double s = 0.0;
    for (const auto& t : obj.lin_terms) s += t.weight * t.d[i];
    sq += s * s;
  }
  return total + std::sqrt(sq);
}

double grid_gap_bound(const AbsObjective& obj, double step) {
  return lipschitz_constant(obj) * step * std::sqrt(static_cast<double>(obj.n));
}

std::vector<double> forward(const MlpModel& model, std::span<const double> x) {
  return softmax(activations(model, x).back());
}

double mean_loss(const MlpModel& model, std::span<const Sample> samples) {
  if (samples.empty()) throw ContractViolation("oracle: empty sample set");
  double total = 0.0;
  for (const auto& s : samples) {
    const auto p = forward(model, features_of(s));
    total -= std::log(std::max(p.at(static_cast<std::size_t>(s.label)), kProbabilityFloor));
  }
  return total / static_cast<double>(samples.size());
}

GradientVector finite_diff_grad(const MlpModel& model, std::span<const Sample> batch, double step) {
  if (!(step > 0.0)) throw ContractViolation("finite_diff_grad: step must be > 0");
  MlpModel probe = model;
  auto& head = probe.layers().back();
  const Eigen::Index rows = head.fan_in();
  const Eigen::Index cols = head.fan_out();
  Vector g(rows * cols + cols);

  auto central = [&](double& param) {
    const double saved = param;
    param = saved + step;
    const double up = oracle::mean_loss(probe, batch);
    param = saved - step;
    const double down = oracle::mean_loss(probe, batch);
    param = saved;
    return (up - down) / (2.0 * step);
  };
  Eigen::Index k = 0;
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) g[k++] = central(head.weights(r, c));
  for (Eigen::Index c = 0; c < cols; ++c) g[k++] = central(head.bias[c]);
  return GradientVector::raw(std::move(g));
}

std::vector<double> weighted_head_grad(const MlpModel& model, std::span<const Sample> task,
                                       std::span<const double> weights) {
  if (task.empty()) throw ContractViolation("oracle: empty task");
  if (!weights.empty() && weights.size() != task.size())
    throw ContractViolation("oracle: weight count differs from task size");
  const auto& head = model.layers().back();
  const auto rows = static_cast<std::size_t>(head.fan_in());
  const auto cols = static_cast<std::size_t>(head.fan_out());
  std::vector<double> g(rows * cols + cols, 0.0);
  const double inv_n = 1.0 / static_cast<double>(task.size());
  for (std::size_t i = 0; i < task.size(); ++i) {
    const double wi = weights.empty() ? 1.0 : weights[i];
    const auto acts = activations(model, features_of(task[i]));
    const auto& h = acts[acts.size() - 2];
    auto p = softmax(acts.back());
    p.at(static_cast<std::size_t>(task[i].label)) -= 1.0;
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c) g[r * cols + c] += inv_n * wi * h[r] * p[c];
    for (std::size_t c = 0; c < cols; ++c) g[rows * cols + c] += inv_n * wi * p[c];
  }
  return g;
}

double exact_loss_after_step(const MlpModel& model, std::span<const Sample> group,
                             std::span<const Sample> task, std::span<const double> weights,
                             double eta) {
  const auto g = weighted_head_grad(model, task, weights);
  MlpModel stepped = model;
  auto& head = stepped.layers().back();
  const Eigen::Index rows = head.fan_in();
  const Eigen::Index cols = head.fan_out();
  std::size_t k = 0;
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) head.weights(r, c) -= eta * g[k++];
  for (Eigen::Index c = 0; c < cols; ++c) head.bias[c] -= eta * g[k++];
  return oracle::mean_loss(stepped, group);
}

}  // namespace fcil::oracle
