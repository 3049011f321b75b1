#include "fcil/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include <fmt/format.h>
#include <yaml-cpp/yaml.h>

#include "fcil/error.hpp"

namespace fcil {

namespace fs = std::filesystem;

std::string to_string(DatasetKind k) {
  switch (k) {
    case DatasetKind::toy: return "toy";
    case DatasetKind::toy_yz: return "toy_yz";
    case DatasetKind::color_biased: return "color_biased";
    case DatasetKind::csv: return "csv";
    case DatasetKind::idx: return "idx";
  }
  return "unknown";
}

DatasetKind parse_dataset_kind(std::string_view s) {
  if (s == "toy") return DatasetKind::toy;
  if (s == "toy_yz") return DatasetKind::toy_yz;
  if (s == "color_biased") return DatasetKind::color_biased;
  if (s == "csv") return DatasetKind::csv;
  if (s == "idx") return DatasetKind::idx;
  throw ConfigError(fmt::format(
      "unknown dataset kind '{}' (expected toy, toy_yz, color_biased, csv or idx)", s));
}

void ExperimentConfig::validate() const {
  train.validate();
  train.fsw.validate();
  if (seeds.empty()) throw ConfigError("run.seeds must not be empty");
  if (methods.empty()) throw ConfigError("run.methods must not be empty");
  if (workers < 1) throw ConfigError("run.workers must be >= 1");
  const auto& d = dataset;
  if (d.kind == DatasetKind::toy || d.kind == DatasetKind::toy_yz) {
    if (d.n_per_class < 1) throw ConfigError("dataset.n_per_class must be >= 1");
    if (d.n_test_per_class < 1) throw ConfigError("dataset.n_test_per_class must be >= 1");
  } else if (d.tasks < 1) {
    throw ConfigError("dataset.tasks must be >= 1");
  }
  if (d.kind == DatasetKind::color_biased) {
    const auto& c = d.color;
    if (c.bias_train < 0.0 || c.bias_train > 1.0 || c.bias_test < 0.0 || c.bias_test > 1.0)
      throw ConfigError("dataset bias probabilities must lie in [0,1]");
    if (c.n_classes < 1 || c.base_dim < 1 || c.n_per_class < 1 || c.n_test_per_class < 1)
      throw ConfigError("dataset color_biased sizes must be positive");
  }
  if ((d.kind == DatasetKind::csv || d.kind == DatasetKind::idx) && d.train_path.empty())
    throw ConfigError("dataset.train_path is required for ingested data");
  if (d.kind == DatasetKind::idx && d.train_labels_path.empty())
    throw ConfigError("dataset.train_labels_path is required for idx data");
  if (d.kind == DatasetKind::idx && !d.test_path.empty() && d.test_labels_path.empty())
    throw ConfigError("dataset.test_labels_path is required with an idx test_path");
  auto check_axis = [](const std::vector<double>& v, const char* name, bool positive) {
    for (double x : v)
      if (!std::isfinite(x) || (positive ? x <= 0.0 : x < 0.0))
        throw ConfigError(fmt::format("sweep.{} has an invalid value {}", name, x));
  };
  check_axis(sweep.alpha, "alpha", true);
  check_axis(sweep.lambda, "lambda", false);
  check_axis(sweep.tau, "tau", false);
  check_axis(sweep.eta, "eta", true);
}

namespace {

void check_keys(const YAML::Node& node, const std::string& where,
                std::initializer_list<const char*> allowed) {
  if (!node) return;
  if (!node.IsMap()) throw ConfigError(where + " must be a mapping");
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }))
      throw ConfigError(fmt::format("{}: unknown key '{}'", where, key));
  }
}

template <typename T>
void read(const YAML::Node& node, const char* key, T& out, const std::string& where) {
  if (!node || !node[key]) return;
  try {
    out = node[key].as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigError(fmt::format("{}.{}: cannot read value '{}'", where, key,
                                  node[key].IsScalar() ? node[key].Scalar() : std::string("<node>")));
  }
}

void read_path(const YAML::Node& node, const char* key, fs::path& out, const std::string& where) {
  std::string s;
  read(node, key, s, where);
  if (!s.empty()) out = s;
}

template <typename T>
void read_list(const YAML::Node& node, const char* key, std::vector<T>& out,
               const std::string& where) {
  if (!node || !node[key]) return;
  const auto& n = node[key];
  try {
    if (n.IsSequence()) out = n.as<std::vector<T>>();
    else out = {n.as<T>()};
  } catch (const YAML::Exception&) {
    throw ConfigError(fmt::format("{}.{}: expected a list of values", where, key));
  }
}

}  // namespace

ExperimentConfig parse_config(const std::string& yaml_text, const std::string& source) {
  YAML::Node root;
  try {
    root = YAML::Load(yaml_text);
  } catch (const YAML::Exception& e) {
    throw ConfigError(fmt::format("{}: {}", source, e.what()));
  }
  ExperimentConfig cfg;
  if (!root || root.IsNull()) return cfg;
  if (!root.IsMap()) throw ConfigError(source + ": top level must be a mapping");
  check_keys(root, source, {"dataset", "model", "train", "fsw", "run", "sweep"});

  const auto ds = root["dataset"];
  const std::string dw = source + ":dataset";
  check_keys(ds, dw, {"kind", "n_per_class", "n_test_per_class", "tasks", "bias_train",
                      "bias_test", "n_classes", "base_dim", "center_scale", "color_strength",
                      "train_path", "train_labels_path", "test_path", "test_labels_path",
                      "num_features", "has_sensitive"});
  auto& d = cfg.dataset;
  std::string kind = to_string(d.kind);
  read(ds, "kind", kind, dw);
  d.kind = parse_dataset_kind(kind);
  read(ds, "n_per_class", d.n_per_class, dw);
  read(ds, "n_test_per_class", d.n_test_per_class, dw);
  read(ds, "tasks", d.tasks, dw);
  if (d.kind == DatasetKind::color_biased) {
    if (!(ds && ds["n_per_class"])) d.n_per_class = d.color.n_per_class;
    if (!(ds && ds["n_test_per_class"])) d.n_test_per_class = d.color.n_test_per_class;
    if (!(ds && ds["tasks"])) d.tasks = d.color.tasks;
  }
  read(ds, "bias_train", d.color.bias_train, dw);
  read(ds, "bias_test", d.color.bias_test, dw);
  read(ds, "n_classes", d.color.n_classes, dw);
  read(ds, "base_dim", d.color.base_dim, dw);
  read(ds, "center_scale", d.color.center_scale, dw);
  read(ds, "color_strength", d.color.color_strength, dw);
  read_path(ds, "train_path", d.train_path, dw);
  read_path(ds, "train_labels_path", d.train_labels_path, dw);
  read_path(ds, "test_path", d.test_path, dw);
  read_path(ds, "test_labels_path", d.test_labels_path, dw);
  if (ds && ds["num_features"]) {
    int nf = 0;
    read(ds, "num_features", nf, dw);
    d.csv.num_features = nf;
  }
  read(ds, "has_sensitive", d.csv.has_sensitive, dw);

  const auto model = root["model"];
  check_keys(model, source + ":model", {"hidden"});
  read_list(model, "hidden", cfg.train.hidden, source + ":model");

  const auto tr = root["train"];
  const std::string tw = source + ":train";
  check_keys(tr, tw, {"eta", "tau", "epochs", "batch_size", "momentum", "buffer_per_group",
                      "budget", "replay_batch", "fsw_first_task"});
  auto& t = cfg.train;
  read(tr, "eta", t.eta, tw);
  read(tr, "tau", t.tau, tw);
  read(tr, "epochs", t.epochs, tw);
  read(tr, "batch_size", t.batch_size, tw);
  read(tr, "momentum", t.momentum, tw);
  read(tr, "buffer_per_group", t.buffer_per_group, tw);
  read(tr, "fsw_first_task", t.fsw_first_task, tw);
  std::string budget = "per_sensitive_group";
  read(tr, "budget", budget, tw);
  if (budget == "per_sensitive_group") t.budget_mode = BudgetMode::per_sensitive_group;
  else if (budget == "per_class") t.budget_mode = BudgetMode::per_class;
  else throw ConfigError(fmt::format("{}.budget: expected per_sensitive_group or per_class", tw));
  std::string replay_batch = "batch";
  read(tr, "replay_batch", replay_batch, tw);
  if (replay_batch == "batch") t.full_buffer_grad = false;
  else if (replay_batch == "full") t.full_buffer_grad = true;
  else throw ConfigError(fmt::format("{}.replay_batch: expected batch or full", tw));

  const auto fw = root["fsw"];
  const std::string fww = source + ":fsw";
  check_keys(fw, fww, {"alpha", "lambda", "measure", "normalize_group_grads",
                       "normalize_sample_grads"});
  auto& f = cfg.train.fsw;
  read(fw, "alpha", f.alpha, fww);
  read(fw, "lambda", f.lambda, fww);
  std::string measure = to_string(f.measure);
  read(fw, "measure", measure, fww);
  f.measure = parse_measure(measure);
  read(fw, "normalize_group_grads", f.normalize_group_grads, fww);
  read(fw, "normalize_sample_grads", f.normalize_sample_grads, fww);

  const auto run = root["run"];
  const std::string rw = source + ":run";
  check_keys(run, rw, {"seeds", "methods", "out", "workers"});
  read_list(run, "seeds", cfg.seeds, rw);
  std::vector<std::string> methods;
  read_list(run, "methods", methods, rw);
  if (run && run["methods"]) {
    cfg.methods.clear();
    for (const auto& m : methods) cfg.methods.push_back(parse_method(m));
  }
  read_path(run, "out", cfg.out_dir, rw);
  read(run, "workers", cfg.workers, rw);

  const auto sw = root["sweep"];
  const std::string sww = source + ":sweep";
  check_keys(sw, sww, {"alpha", "lambda", "tau", "eta"});
  for (const char* axis : {"alpha", "lambda", "tau", "eta"})
    if (sw && sw[axis] && sw[axis].IsSequence() && sw[axis].size() == 0)
      throw ConfigError(fmt::format("{}.{}: grid must not be empty", sww, axis));
  read_list(sw, "alpha", cfg.sweep.alpha, sww);
  read_list(sw, "lambda", cfg.sweep.lambda, sww);
  read_list(sw, "tau", cfg.sweep.tau, sww);
  read_list(sw, "eta", cfg.sweep.eta, sww);
  return cfg;
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot open config file {}", path.string()));
  std::stringstream ss;
  ss << in.rdbuf();
  ExperimentConfig cfg = parse_config(ss.str(), path.string());
  const fs::path base = path.parent_path();
  for (fs::path* p : {&cfg.dataset.train_path, &cfg.dataset.train_labels_path,
                      &cfg.dataset.test_path, &cfg.dataset.test_labels_path})
    if (!p->empty() && p->is_relative()) *p = base / *p;
  return cfg;
}

namespace {

std::string num(double v) { return fmt::format("{}", v); }

template <typename T, typename F>
std::string list(const std::vector<T>& v, F&& fmt_one) {
  std::string s = "[";
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + fmt_one(v[i]);
  return s + "]";
}

}  // namespace

std::string dump_config(const ExperimentConfig& cfg) {
  const auto& d = cfg.dataset;
  const auto& t = cfg.train;
  const auto& f = t.fsw;
  auto as_num = [](double v) { return num(v); };
  std::string s;
  s += "dataset:\n";
  s += fmt::format("  kind: {}\n", to_string(d.kind));
  s += fmt::format("  n_per_class: {}\n  n_test_per_class: {}\n  tasks: {}\n", d.n_per_class,
                   d.n_test_per_class, d.tasks);
  if (d.kind == DatasetKind::color_biased)
    s += fmt::format(
        "  bias_train: {}\n  bias_test: {}\n  n_classes: {}\n  base_dim: {}\n"
        "  center_scale: {}\n  color_strength: {}\n",
        num(d.color.bias_train), num(d.color.bias_test), d.color.n_classes, d.color.base_dim,
        num(d.color.center_scale), num(d.color.color_strength));
  for (const auto& [key, p] : {std::pair{"train_path", &d.train_path},
                               {"train_labels_path", &d.train_labels_path},
                               {"test_path", &d.test_path},
                               {"test_labels_path", &d.test_labels_path}})
    if (!p->empty()) s += fmt::format("  {}: \"{}\"\n", key, p->generic_string());
  if (d.kind == DatasetKind::csv) {
    if (d.csv.num_features) s += fmt::format("  num_features: {}\n", *d.csv.num_features);
    s += fmt::format("  has_sensitive: {}\n", d.csv.has_sensitive);
  }
  s += "model:\n";
  s += fmt::format("  hidden: {}\n", list(t.hidden, [](int h) { return std::to_string(h); }));
  s += "train:\n";
  s += fmt::format(
      "  eta: {}\n  tau: {}\n  epochs: {}\n  batch_size: {}\n  momentum: {}\n"
      "  buffer_per_group: {}\n  budget: {}\n  replay_batch: {}\n  fsw_first_task: {}\n",
      num(t.eta), num(t.tau), t.epochs, t.batch_size, num(t.momentum), t.buffer_per_group,
      t.budget_mode == BudgetMode::per_class ? "per_class" : "per_sensitive_group",
      t.full_buffer_grad ? "full" : "batch", t.fsw_first_task);
  s += "fsw:\n";
  s += fmt::format(
      "  alpha: {}\n  lambda: {}\n  measure: {}\n  normalize_group_grads: {}\n"
      "  normalize_sample_grads: {}\n",
      num(f.alpha), num(f.lambda), to_string(f.measure), f.normalize_group_grads,
      f.normalize_sample_grads);
  s += "run:\n";
  s += fmt::format("  seeds: {}\n", list(cfg.seeds, [](std::uint64_t v) { return std::to_string(v); }));
  s += fmt::format("  methods: {}\n", list(cfg.methods, [](Method m) { return to_string(m); }));
  s += fmt::format("  out: \"{}\"\n  workers: {}\n", cfg.out_dir.generic_string(), cfg.workers);
  const auto& g = cfg.sweep;
  if (!g.alpha.empty() || !g.lambda.empty() || !g.tau.empty() || !g.eta.empty()) {
    s += "sweep:\n";
    if (!g.alpha.empty()) s += fmt::format("  alpha: {}\n", list(g.alpha, as_num));
    if (!g.lambda.empty()) s += fmt::format("  lambda: {}\n", list(g.lambda, as_num));
    if (!g.tau.empty()) s += fmt::format("  tau: {}\n", list(g.tau, as_num));
    if (!g.eta.empty()) s += fmt::format("  eta: {}\n", list(g.eta, as_num));
  }
  return s;
}

namespace {

LabeledData load_split(const DatasetSpec& spec, const fs::path& path, const fs::path& labels) {
  IngestSpec in;
  in.path = path;
  in.labels_path = labels;
  in.format = spec.kind == DatasetKind::idx ? DataFormat::idx : DataFormat::csv;
  in.csv = spec.csv;
  return ingest(in);
}

}  // namespace

TaskStream build_stream(const DatasetSpec& spec, std::uint64_t seed) {
  switch (spec.kind) {
    case DatasetKind::toy:
      return gen_toy_gaussians(spec.n_per_class, seed, ToyVariant::class_as_group,
                               spec.n_test_per_class);
    case DatasetKind::toy_yz:
      return gen_toy_gaussians(spec.n_per_class, seed, ToyVariant::label_and_attribute,
                               spec.n_test_per_class);
    case DatasetKind::color_biased: {
      ColorBiasConfig c = spec.color;
      c.n_per_class = spec.n_per_class;
      c.n_test_per_class = spec.n_test_per_class;
      c.tasks = spec.tasks;
      return gen_color_biased(c, seed);
    }
    case DatasetKind::csv:
    case DatasetKind::idx: {
      LabeledData train = load_split(spec, spec.train_path, spec.train_labels_path);
      LabeledData test;
      if (!spec.test_path.empty()) {
        test = load_split(spec, spec.test_path, spec.test_labels_path);
      } else {
        LabeledData kept;
        for (std::size_t i = 0; i < train.samples.size(); ++i)
          (i % 5 == 4 ? test : kept).samples.push_back(std::move(train.samples[i]));
        train = std::move(kept);
      }
      return split_tasks(train, test, spec.tasks);
    }
  }
  throw ConfigError("unsupported dataset kind");
}

void write_stream(const fs::path& dir, const TaskStream& stream) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError(fmt::format("cannot create directory {}: {}", dir.string(), ec.message()));
  auto dump = [&](const std::vector<TaskDataset>& parts, const char* name) {
    std::vector<Sample> all;
    for (const auto& t : parts) all.insert(all.end(), t.samples.begin(), t.samples.end());
    const fs::path p = dir / name;
    std::ofstream out(p, std::ios::binary);
    if (!out) throw IoError(fmt::format("cannot write {}", p.string()));
    write_csv(out, all);
    if (!out) throw IoError(fmt::format("write failed for {}", p.string()));
  };
  dump(stream.tasks, "train.csv");
  dump(stream.test, "test.csv");
}

namespace {

// Runs f(i) for i in [0, n) on `workers` threads. Every job runs even when
// another fails; the first failure in index order is rethrown.
template <typename F>
void parallel_for(std::size_t n, int workers, F&& f) {
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        f(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const auto threads = std::min<std::size_t>(static_cast<std::size_t>(std::max(workers, 1)), n);
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

void require_measure_support(const TaskStream& stream, const ExperimentConfig& cfg) {
  const bool uses_fsw =
      std::find(cfg.methods.begin(), cfg.methods.end(), Method::fsw) != cfg.methods.end();
  if (uses_fsw && cfg.train.fsw.measure != FairnessMeasure::eer && !stream.has_sensitive())
    throw ConfigError(fmt::format("fsw.measure {} needs a sensitive attribute; dataset {} has none",
                                  to_string(cfg.train.fsw.measure), to_string(cfg.dataset.kind)));
}

std::map<std::uint64_t, TaskStream> build_streams(const ExperimentConfig& cfg) {
  std::map<std::uint64_t, TaskStream> streams;
  const bool ingested =
      cfg.dataset.kind == DatasetKind::csv || cfg.dataset.kind == DatasetKind::idx;
  for (auto seed : cfg.seeds) {
    if (streams.contains(seed)) continue;
    if (ingested && !streams.empty()) streams.emplace(seed, streams.begin()->second);
    else streams.emplace(seed, build_stream(cfg.dataset, seed));
    require_measure_support(streams.at(seed), cfg);
  }
  return streams;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError(fmt::format("cannot create directory {}: {}", dir.string(), ec.message()));
}

template <typename Writer>
void write_file(const fs::path& path, Writer&& writer) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(fmt::format("cannot open {} for writing", path.string()));
  writer(out);
  out.flush();
  if (!out) throw IoError(fmt::format("write failed for {}", path.string()));
}

std::string opt(const std::optional<double>& v) { return v ? num(*v) : std::string(); }

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double std_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

}  // namespace

std::vector<AggregateRow> aggregate_runs(const std::vector<RunRecord>& runs,
                                         const std::vector<Method>& methods,
                                         FairnessMeasure measure) {
  std::vector<AggregateRow> rows;
  for (Method m : methods) {
    std::vector<double> avg, fin, disp;
    for (const auto& r : runs) {
      if (r.method != m) continue;
      avg.push_back(r.report.avg_accuracy);
      fin.push_back(r.report.final_accuracy);
      if (const auto d = r.report.disparity(measure)) disp.push_back(*d);
    }
    if (avg.empty()) continue;
    AggregateRow row;
    row.method = m;
    row.runs = avg.size();
    row.avg_accuracy_mean = mean_of(avg);
    row.avg_accuracy_std = std_of(avg);
    row.final_accuracy_mean = mean_of(fin);
    row.final_accuracy_std = std_of(fin);
    if (disp.size() == avg.size()) {
      row.disparity_mean = mean_of(disp);
      row.disparity_std = std_of(disp);
    }
    rows.push_back(row);
  }
  return rows;
}

void write_per_seed_csv(std::ostream& out, const std::vector<RunRecord>& runs) {
  out << "method,seed,avg_accuracy,final_accuracy,eer,eo,dp\n";
  for (const auto& r : runs)
    out << fmt::format("{},{},{},{},{},{},{}\n", to_string(r.method), r.seed,
                       num(r.report.avg_accuracy), num(r.report.final_accuracy), opt(r.report.eer),
                       opt(r.report.eo), opt(r.report.dp));
}

void write_aggregate_csv(std::ostream& out, const std::vector<AggregateRow>& rows,
                         FairnessMeasure measure) {
  const auto m = to_string(measure);
  out << fmt::format(
      "method,runs,avg_accuracy_mean,avg_accuracy_std,final_accuracy_mean,final_accuracy_std,"
      "{}_mean,{}_std\n",
      m, m);
  for (const auto& r : rows)
    out << fmt::format("{},{},{},{},{},{},{},{}\n", to_string(r.method), r.runs,
                       num(r.avg_accuracy_mean), num(r.avg_accuracy_std),
                       num(r.final_accuracy_mean), num(r.final_accuracy_std),
                       opt(r.disparity_mean), opt(r.disparity_std));
}

void write_tasks_csv(std::ostream& out, const std::vector<RunRecord>& runs) {
  out << "method,seed,task,metric,value\n";
  for (const auto& r : runs)
    for (const auto& row : metric_rows(r.history))
      out << fmt::format("{},{},{},{},{}\n", to_string(r.method), r.seed, row.task, row.metric,
                         num(row.value));
}

void write_weights_csv(std::ostream& out, const std::vector<RunRecord>& runs, int bins) {
  if (bins < 1) throw ContractViolation("write_weights_csv: bins must be >= 1");
  out << "method,seed,task,epoch,group,bin_lo,bin_hi,count\n";
  for (const auto& r : runs) {
    for (const auto& e : r.history.epochs) {
      std::map<GroupKey, std::vector<std::size_t>> hist;
      for (std::size_t i = 0; i < e.weights.size(); ++i) {
        auto& h = hist[e.groups.at(i)];
        h.resize(static_cast<std::size_t>(bins), 0);
        const auto b = std::min(bins - 1, static_cast<int>(std::floor(e.weights[i] * bins)));
        ++h[static_cast<std::size_t>(std::max(b, 0))];
      }
      for (const auto& [key, h] : hist)
        for (int b = 0; b < bins; ++b)
          out << fmt::format("{},{},{},{},{},{},{},{}\n", to_string(r.method), r.seed, e.task,
                             e.epoch, key.str(), num(static_cast<double>(b) / bins),
                             num(static_cast<double>(b + 1) / bins), h[static_cast<std::size_t>(b)]);
    }
  }
}

void write_epochs_csv(std::ostream& out, const std::vector<RunRecord>& runs) {
  out << "method,seed,task,epoch,objective,objective_at_ones,near_binary\n";
  for (const auto& r : runs)
    for (const auto& e : r.history.epochs)
      out << fmt::format("{},{},{},{},{},{},{}\n", to_string(r.method), r.seed, e.task, e.epoch,
                         num(e.objective), num(e.objective_at_ones), num(e.near_binary));
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
  out << "alpha,lambda,tau,eta,accuracy,disparity,pareto\n";
  for (const auto& r : rows)
    out << fmt::format("{},{},{},{},{},{},{}\n", num(r.alpha), num(r.lambda), num(r.tau),
                       num(r.eta), num(r.accuracy), num(r.disparity), r.pareto ? 1 : 0);
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, bool write_outputs) {
  const auto start = std::chrono::steady_clock::now();
  cfg.validate();
  const auto streams = build_streams(cfg);

  struct Job {
    Method method;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (Method m : cfg.methods)
    for (auto seed : cfg.seeds) jobs.push_back({m, seed});

  if (write_outputs) ensure_dir(cfg.out_dir / "runs");
  ExperimentResult result;
  result.runs.resize(jobs.size());
  parallel_for(jobs.size(), cfg.workers, [&](std::size_t i) {
    auto& rec = result.runs[i];
    rec.method = jobs[i].method;
    rec.seed = jobs[i].seed;
    rec.history = run_method(rec.method, streams.at(rec.seed), cfg.train, rec.seed);
    rec.report = summarize(rec.history);
    if (write_outputs)
      write_file(cfg.out_dir / "runs" / fmt::format("{}_seed{}.csv", to_string(rec.method), rec.seed),
                 [&](std::ostream& out) { write_tasks_csv(out, {rec}); });
  });

  const auto measure = cfg.train.fsw.measure;
  result.aggregate = aggregate_runs(result.runs, cfg.methods, measure);
  if (!write_outputs) return result;

  std::vector<RunRecord> fsw_runs;
  for (const auto& r : result.runs)
    if (r.method == Method::fsw) fsw_runs.push_back(r);
  write_file(cfg.out_dir / "per_seed.csv", [&](auto& o) { write_per_seed_csv(o, result.runs); });
  write_file(cfg.out_dir / "aggregate.csv",
             [&](auto& o) { write_aggregate_csv(o, result.aggregate, measure); });
  write_file(cfg.out_dir / "tasks.csv", [&](auto& o) { write_tasks_csv(o, result.runs); });
  if (!fsw_runs.empty()) {
    write_file(cfg.out_dir / "weights.csv", [&](auto& o) { write_weights_csv(o, fsw_runs); });
    write_file(cfg.out_dir / "fsw_epochs.csv", [&](auto& o) { write_epochs_csv(o, fsw_runs); });
  }

  std::set<std::string> warnings;
  for (const auto& [seed, s] : streams) warnings.insert(s.warnings.begin(), s.warnings.end());
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  write_file(cfg.out_dir / "manifest.yaml", [&](std::ostream& o) {
    o << fmt::format("fcil_version: \"{}\"\n", FCIL_VERSION);
    o << fmt::format("eigen_version: \"{}.{}.{}\"\n", EIGEN_WORLD_VERSION, EIGEN_MAJOR_VERSION,
                     EIGEN_MINOR_VERSION);
    o << fmt::format("wall_clock_seconds: {:.3f}\n", seconds);
    o << "warnings:\n";
    for (const auto& w : warnings) o << fmt::format("  - \"{}\"\n", w);
    o << "config:\n";
    std::istringstream lines(dump_config(cfg));
    for (std::string line; std::getline(lines, line);) o << "  " << line << '\n';
  });
  return result;
}

std::vector<bool> pareto_flags(const std::vector<SweepRow>& rows) {
  std::vector<bool> flags(rows.size(), true);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows.size(); ++j)
      if (rows[j].accuracy > rows[i].accuracy && rows[j].disparity < rows[i].disparity) {
        flags[i] = false;
        break;
      }
  return flags;
}

std::vector<SweepRow> grid_sweep(const ExperimentConfig& cfg, bool write_outputs) {
  cfg.validate();
  ExperimentConfig base = cfg;
  base.methods = {Method::fsw};
  const auto streams = build_streams(base);
  const auto& t = cfg.train;
  auto axis = [](const std::vector<double>& v, double fallback) {
    return v.empty() ? std::vector<double>{fallback} : v;
  };
  const auto alphas = axis(cfg.sweep.alpha, t.fsw.alpha);
  const auto lambdas = axis(cfg.sweep.lambda, t.fsw.lambda);
  const auto taus = axis(cfg.sweep.tau, t.tau);
  const auto etas = axis(cfg.sweep.eta, t.eta);

  std::vector<SweepRow> rows;
  for (double a : alphas)
    for (double l : lambdas)
      for (double tau : taus)
        for (double eta : etas) rows.push_back(SweepRow{a, l, tau, eta, 0.0, 0.0, false});

  const std::size_t seeds = cfg.seeds.size();
  std::vector<MetricsReport> reports(rows.size() * seeds);
  const auto measure = t.fsw.measure;
  parallel_for(reports.size(), cfg.workers, [&](std::size_t k) {
    const auto& row = rows[k / seeds];
    const auto seed = cfg.seeds[k % seeds];
    TrainConfig tc = t;
    tc.fsw.alpha = row.alpha;
    tc.fsw.lambda = row.lambda;
    tc.tau = row.tau;
    tc.eta = row.eta;
    reports[k] = summarize(run_method(Method::fsw, streams.at(seed), tc, seed));
  });
  for (std::size_t i = 0; i < rows.size(); ++i) {
    double acc = 0.0, disp = 0.0;
    for (std::size_t s = 0; s < seeds; ++s) {
      const auto& r = reports[i * seeds + s];
      acc += r.avg_accuracy;
      disp += r.disparity(measure).value_or(0.0);
    }
    rows[i].accuracy = acc / static_cast<double>(seeds);
    rows[i].disparity = disp / static_cast<double>(seeds);
  }
  const auto flags = pareto_flags(rows);
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i].pareto = flags[i];

  if (write_outputs) {
    ensure_dir(cfg.out_dir);
    write_file(cfg.out_dir / "sweep.csv", [&](auto& o) { write_sweep_csv(o, rows); });
  }
  return rows;
}

}  // namespace fcil
