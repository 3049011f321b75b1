#include "fcil/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include <fmt/format.h>

#include "fcil/error.hpp"

namespace fcil {

AccuracySummary average_accuracy(const std::vector<std::vector<double>>& accuracy) {
  if (accuracy.empty()) throw ContractViolation("average_accuracy: empty history");
  AccuracySummary out;
  for (std::size_t l = 0; l < accuracy.size(); ++l) {
    const auto& row = accuracy[l];
    if (row.size() < l + 1)
      throw ContractViolation(fmt::format("average_accuracy: missing a_{{{},{}}}", l + 1, row.size() + 1));
    double sum = 0.0;
    for (std::size_t t = 0; t <= l; ++t) {
      if (!std::isfinite(row[t]))
        throw ContractViolation(fmt::format("average_accuracy: a_{{{},{}}} is not finite", l + 1, t + 1));
      sum += row[t];
    }
    out.per_task.push_back(sum / static_cast<double>(l + 1));
  }
  double sum = 0.0;
  for (double a : out.per_task) sum += a;
  out.average = sum / static_cast<double>(out.per_task.size());
  return out;
}

namespace {

struct Rate {
  std::size_t hits = 0;
  std::size_t total = 0;
};

// |h1/t1 - h2/t2| from one integer cross product, so equal-ratio cells give
// exactly zero and simple fractions stay exact.
double rate_gap(std::size_t h1, std::size_t t1, std::size_t h2, std::size_t t2) {
  const auto a = static_cast<long double>(h1) * static_cast<long double>(t2);
  const auto b = static_cast<long double>(h2) * static_cast<long double>(t1);
  return static_cast<double>(std::abs(a - b) / (static_cast<long double>(t1) * static_cast<long double>(t2)));
}

double rate_gap(const Rate& a, const Rate& b) { return rate_gap(a.hits, a.total, b.hits, b.total); }

}  // namespace

DisparityResult disparity(FairnessMeasure measure, std::span<const int> predictions,
                          std::span<const int> labels, std::span<const int> sensitive,
                          std::span<const int> classes) {
  if (predictions.size() != labels.size())
    throw ContractViolation("disparity: predictions and labels differ in length");
  const bool needs_z = measure != FairnessMeasure::eer;
  if (needs_z && sensitive.size() != labels.size())
    throw ContractViolation("disparity: " + to_string(measure) + " requires sensitive attributes");

  const std::set<int> class_set(classes.begin(), classes.end());
  DisparityResult out;
  double sum = 0.0;

  if (measure == FairnessMeasure::eer) {
    Rate overall;
    std::map<int, Rate> per_class;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (!class_set.contains(labels[i])) continue;
      const bool err = predictions[i] != labels[i];
      overall.hits += err;
      ++overall.total;
      auto& r = per_class[labels[i]];
      r.hits += err;
      ++r.total;
    }
    for (int y : classes) {
      const auto it = per_class.find(y);
      if (it == per_class.end()) {
        out.warnings.push_back(fmt::format("EER: no samples of class {}; term skipped", y));
        continue;
      }
      sum += rate_gap(it->second, overall);
      ++out.terms;
    }
  } else {
    std::set<int> z_values;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (class_set.contains(labels[i])) z_values.insert(sensitive[i]);

    if (measure == FairnessMeasure::eo) {
      std::map<int, Rate> by_y;
      std::map<std::pair<int, int>, Rate> by_yz;
      for (std::size_t i = 0; i < labels.size(); ++i) {
        if (!class_set.contains(labels[i])) continue;
        const bool ok = predictions[i] == labels[i];
        auto& ry = by_y[labels[i]];
        ry.hits += ok;
        ++ry.total;
        auto& ryz = by_yz[{labels[i], sensitive[i]}];
        ryz.hits += ok;
        ++ryz.total;
      }
      for (int y : classes) {
        for (int z : z_values) {
          const auto it = by_yz.find({y, z});
          if (it == by_yz.end()) {
            out.warnings.push_back(fmt::format("EO: empty cell y{}z{}; term skipped", y, z));
            continue;
          }
          sum += rate_gap(it->second, by_y.at(y));
          ++out.terms;
        }
      }
    } else {
      std::size_t n = 0;
      std::map<int, std::size_t> pred_count;
      std::map<int, std::size_t> z_count;
      std::map<std::pair<int, int>, std::size_t> pred_z_count;
      for (std::size_t i = 0; i < labels.size(); ++i) {
        if (!class_set.contains(labels[i])) continue;
        ++n;
        ++pred_count[predictions[i]];
        ++z_count[sensitive[i]];
        ++pred_z_count[{predictions[i], sensitive[i]}];
      }
      for (int y : classes) {
        if (n == 0) break;
        for (int z : z_values) {
          sum += rate_gap(pred_z_count[{y, z}], z_count.at(z), pred_count[y], n);
          ++out.terms;
        }
      }
    }
  }
  out.value = out.terms == 0 ? 0.0 : sum / static_cast<double>(out.terms);
  return out;
}

std::optional<double> MetricsReport::disparity(FairnessMeasure m) const {
  switch (m) {
    case FairnessMeasure::eer: return eer;
    case FairnessMeasure::eo: return eo;
    case FairnessMeasure::dp: return dp;
  }
  return std::nullopt;
}

namespace {

std::optional<double> mean_over_tasks(const RunHistory& h, std::optional<double> TaskSnapshot::*field) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& t : h.tasks) {
    if (const auto& v = t.*field) {
      sum += *v;
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

}  // namespace

MetricsReport summarize(const RunHistory& history) {
  std::vector<std::vector<double>> acc;
  for (const auto& t : history.tasks) acc.push_back(t.accuracy);
  const auto summary = average_accuracy(acc);
  MetricsReport r;
  r.avg_accuracy = summary.average;
  r.per_task = summary.per_task;
  r.final_accuracy = summary.per_task.back();
  r.eer = mean_over_tasks(history, &TaskSnapshot::eer);
  r.eo = mean_over_tasks(history, &TaskSnapshot::eo);
  r.dp = mean_over_tasks(history, &TaskSnapshot::dp);
  return r;
}

std::vector<MetricRow> metric_rows(const RunHistory& history) {
  std::vector<MetricRow> rows;
  std::vector<std::vector<double>> acc;
  for (std::size_t l = 0; l < history.tasks.size(); ++l) {
    const auto& t = history.tasks[l];
    const int task = static_cast<int>(l);
    for (std::size_t k = 0; k < t.accuracy.size(); ++k)
      rows.push_back({task, fmt::format("accuracy_t{}", k), t.accuracy[k]});
    acc.push_back(t.accuracy);
    rows.push_back({task, "avg_accuracy", average_accuracy(acc).per_task.back()});
    if (t.eer) rows.push_back({task, "eer", *t.eer});
    if (t.eo) rows.push_back({task, "eo", *t.eo});
    if (t.dp) rows.push_back({task, "dp", *t.dp});
  }
  return rows;
}

}  // namespace fcil
