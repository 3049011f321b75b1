#include "fcil/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "fcil/error.hpp"
#include "fcil/groupstats.hpp"
#include "fcil/metrics.hpp"
#include "fcil/oracles.hpp"

namespace fcil::verify {

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

int uniform_int(std::mt19937_64& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

GroupStats raw_stats(const MlpModel& model, std::span<const Sample> group, GroupKey key) {
  GroupStats s;
  s.key = key;
  s.loss = mean_loss(model, group);
  s.avg_grad = last_layer_grad(model, group);
  s.count = group.size();
  return s;
}

}  // namespace

AbsObjective random_abs_objective(std::mt19937_64& rng, int max_n, int max_abs, int max_lin) {
  std::uniform_real_distribution<double> coef(-2.0, 2.0);
  std::uniform_real_distribution<double> weight(0.1, 1.0);
  AbsObjective obj;
  obj.n = uniform_int(rng, 1, max_n);
  const int k = uniform_int(rng, 1, max_abs);
  const int m = uniform_int(rng, 0, max_lin);
  auto random_vec = [&] {
    Vector v(obj.n);
    for (int i = 0; i < obj.n; ++i) v[i] = coef(rng);
    return v;
  };
  for (int i = 0; i < k; ++i) {
    AbsTerm t;
    t.a = coef(rng);
    t.b = random_vec();
    t.weight = weight(rng);
    obj.abs_terms.push_back(std::move(t));
  }
  for (int j = 0; j < m; ++j) {
    LinTerm t;
    t.c = coef(rng);
    t.d = random_vec();
    t.weight = weight(rng);
    obj.lin_terms.push_back(std::move(t));
  }
  return obj;
}

std::vector<Sample> random_samples(std::mt19937_64& rng, std::size_t count, int dim,
                                   int num_classes) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_int_distribution<int> label(0, num_classes - 1);
  std::vector<Sample> out(count);
  for (auto& s : out) {
    s.features.resize(dim);
    for (int j = 0; j < dim; ++j) s.features[j] = normal(rng);
    s.label = label(rng);
  }
  return out;
}

LpSoundness lp_soundness(std::size_t instances, std::uint64_t seed, double step) {
  const auto start = Clock::now();
  std::mt19937_64 rng(seed);
  LpSoundness r;
  r.instances = instances;
  r.worst_gap_fraction = 0.0;
  r.max_lp_excess = -kInfinity;
  for (std::size_t k = 0; k < instances; ++k) {
    const AbsObjective obj = random_abs_objective(rng);
    const LpSolution sol = solve_lp(build_abs_lp(obj));
    if (sol.status != LpStatus::optimal) continue;
    ++r.optimal;

    const oracle::GridMin grid = oracle::grid_min(obj, step);
    const double bound = oracle::grid_gap_bound(obj, step);
    const double gap = grid.value - sol.objective;
    r.max_lp_excess = std::max(r.max_lp_excess, -gap);
    if (bound > 0.0) r.worst_gap_fraction = std::max(r.worst_gap_fraction, gap / bound);
    if (gap >= -1e-9 && gap <= bound + 1e-9) ++r.within_bound;

    for (std::size_t i = 0; i < obj.abs_terms.size(); ++i) {
      const auto base = static_cast<Eigen::Index>(obj.n + 2 * i);
      r.max_complementarity =
          std::max(r.max_complementarity, std::min(sol.x[base], sol.x[base + 1]));
    }
    const std::vector<double> w(sol.w.data(), sol.w.data() + sol.w.size());
    r.max_objective_mismatch = std::max(
        r.max_objective_mismatch, std::abs(oracle::abs_objective_value(obj, w) - sol.objective));
  }
  r.seconds = since(start);
  return r;
}

TaylorFidelity taylor_fidelity(std::size_t fixtures, std::uint64_t seed, std::vector<double> etas) {
  const auto start = Clock::now();
  if (etas.size() < 2) throw ContractViolation("taylor_fidelity: need at least two step sizes");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  TaylorFidelity r;
  r.etas = etas;
  std::vector<std::vector<double>> ratios(etas.size() - 1);
  for (std::size_t f = 0; f < fixtures; ++f) {
    const int dim = uniform_int(rng, 2, 4);
    const int classes = uniform_int(rng, 2, 4);
    MlpModel model = MlpModel::create(dim, {uniform_int(rng, 3, 8)}, classes, rng);
    const auto task = random_samples(rng, 12, dim, classes);
    const auto group = random_samples(rng, 8, dim, classes);
    std::vector<double> w(task.size());
    for (auto& v : w) v = unit(rng);

    GroupStatsMap stats;
    const GroupKey key{0, std::nullopt};
    stats.emplace(key, raw_stats(model, group, key));
    const Matrix grads = sample_gradients(model, task, false);

    std::vector<double> errs;
    for (double eta : etas) {
      const LinearFormMap forms = linear_forms(stats, grads, eta);
      const double approx = approx_group_loss(forms.at(key), w);
      const double exact = oracle::exact_loss_after_step(model, group, task, w, eta);
      errs.push_back(std::abs(approx - exact));
    }
    for (std::size_t i = 0; i + 1 < errs.size(); ++i)
      ratios[i].push_back(errs[i + 1] > 0.0 ? errs[i] / errs[i + 1] : kInfinity);
    r.errors.push_back(std::move(errs));
  }
  for (auto& v : ratios) r.median_ratio.push_back(median(v));
  r.seconds = since(start);
  return r;
}

ForgettingInequality forgetting_inequality(std::size_t instances, std::uint64_t seed, double alpha) {
  const auto start = Clock::now();
  std::mt19937_64 rng(seed);
  ForgettingInequality r;
  r.min_margin = kInfinity;
  constexpr std::size_t kMaxCandidates = 100000;
  std::size_t candidates = 0;
  while (r.instances < instances) {
    if (++candidates > kMaxCandidates)
      throw Error("forgetting_inequality: could not construct enough qualifying instances");
    const int dim = uniform_int(rng, 2, 4);
    MlpModel model = MlpModel::create(dim, {uniform_int(rng, 3, 8)}, 2, rng);
    auto g1 = random_samples(rng, 6, dim, 1);
    auto g2 = random_samples(rng, 6, dim, 1);
    for (auto& s : g2) s.label = 1;
    const double l1 = mean_loss(model, g1);
    const double l2 = mean_loss(model, g2);
    if (l1 > l2) std::swap(g1, g2);
    auto d = random_samples(rng, 1, dim, 1);
    d[0].label = g1[0].label;

    GroupStatsMap stats;
    const GroupKey k1{g1[0].label, std::nullopt};
    const GroupKey k2{g2[0].label, std::nullopt};
    stats.emplace(k1, raw_stats(model, g1, k1));
    stats.emplace(k2, raw_stats(model, g2, k2));
    for (auto& [key, s] : stats) s.avg_grad = s.avg_grad.unit();
    const Matrix gd = sample_gradients(model, d, true);
    const Vector gdv = gd.row(0).transpose();

    const double loss1 = stats.at(k1).loss;
    const double loss2 = stats.at(k2).loss;
    const double dot1 = stats.at(k1).avg_grad.values().dot(gdv);
    const double dot2 = stats.at(k2).avg_grad.values().dot(gdv);
    if (!(loss1 < loss2 && dot1 > 0.0 && dot2 < 0.0)) {
      ++r.rejected_candidates;
      continue;
    }
    const LinearFormMap forms = linear_forms(stats, gd, alpha);
    const std::vector<double> w{1.0};
    const double approx_gap =
        std::abs(approx_group_loss(forms.at(k1), w) - approx_group_loss(forms.at(k2), w));
    const double margin = approx_gap - std::abs(loss1 - loss2);
    r.min_margin = std::min(r.min_margin, margin);
    r.holds += margin > 0.0;
    ++r.instances;
  }
  r.seconds = since(start);
  return r;
}

GradientCheck gradient_check(std::size_t fixtures, std::uint64_t seed, double step,
                             double tolerance) {
  const auto start = Clock::now();
  std::mt19937_64 rng(seed);
  GradientCheck r;
  r.fixtures = fixtures;
  for (std::size_t f = 0; f < fixtures; ++f) {
    const int dim = uniform_int(rng, 2, 5);
    const int classes = uniform_int(rng, 2, 5);
    std::vector<int> hidden(static_cast<std::size_t>(uniform_int(rng, 1, 2)));
    for (auto& h : hidden) h = uniform_int(rng, 3, 8);
    MlpModel model = MlpModel::create(dim, hidden, classes, rng);
    const auto batch = random_samples(rng, static_cast<std::size_t>(uniform_int(rng, 1, 8)), dim,
                                      classes);
    const Vector analytic = last_layer_grad(model, batch).values();
    const Vector numeric = oracle::finite_diff_grad(model, batch, step).values();
    const double scale = std::max(numeric.cwiseAbs().maxCoeff(), 1e-8);
    const double rel = (analytic - numeric).cwiseAbs().maxCoeff() / scale;
    r.max_relative_error = std::max(r.max_relative_error, rel);
    r.passed += rel < tolerance;
  }
  r.seconds = since(start);
  return r;
}

MetricExamples metric_examples() {
  MetricExamples m;
  {
    // Class 0: 1 error in 10. Class 1: 3 errors in 10.
    std::vector<int> labels, preds;
    for (int i = 0; i < 10; ++i) {
      labels.push_back(0);
      preds.push_back(i < 1 ? 1 : 0);
    }
    for (int i = 0; i < 10; ++i) {
      labels.push_back(1);
      preds.push_back(i < 3 ? 0 : 1);
    }
    const std::vector<int> classes{0, 1};
    m.eer_two_classes = disparity(FairnessMeasure::eer, preds, labels, {}, classes).value;
  }
  {
    const auto s = average_accuracy({{0.9}, {0.5, 0.8}});
    m.a1 = s.per_task[0];
    m.a2 = s.per_task[1];
    m.a_bar = s.average;
  }
  {
    std::vector<int> labels, z;
    for (int y = 0; y < 3; ++y)
      for (int k = 0; k < 4; ++k) {
        labels.push_back(y);
        z.push_back(k % 2);
      }
    const std::vector<int> classes{0, 1, 2};
    m.perfect_eer = disparity(FairnessMeasure::eer, labels, labels, z, classes).value;
    m.perfect_eo = disparity(FairnessMeasure::eo, labels, labels, z, classes).value;
    m.perfect_dp = disparity(FairnessMeasure::dp, labels, labels, z, classes).value;
  }
  return m;
}

}  // namespace fcil::verify
