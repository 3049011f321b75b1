#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "fcil/error.hpp"
#include "fcil/harness.hpp"
#include "support.hpp"

using namespace fcil;
namespace fs = std::filesystem;

namespace {

ExperimentConfig tiny(const fs::path& out) {
  ExperimentConfig cfg;
  cfg.dataset.n_per_class = 30;
  cfg.dataset.n_test_per_class = 30;
  cfg.train.hidden = {6};
  cfg.train.epochs = 2;
  cfg.train.batch_size = 16;
  cfg.train.buffer_per_group = 4;
  cfg.seeds = {0, 1, 2, 3, 4};
  cfg.out_dir = out;
  return cfg;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::vector<std::string>> csv_rows(const fs::path& p) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(slurp(p));
  for (std::string line; std::getline(in, line);) {
    std::vector<std::string> cells;
    std::stringstream ls(line);
    for (std::string c; std::getline(ls, c, ',');) cells.push_back(c);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    rows.push_back(cells);
  }
  return rows;
}

}  // namespace

TEST_CASE("parse_config: sections, defaults and overrides") {
  const auto cfg = parse_config(R"(
dataset:
  kind: toy_yz
  n_per_class: 40
model:
  hidden: [12, 6]
train:
  eta: 0.002
  tau: 2
  epochs: 3
  budget: per_class
  replay_batch: full
  fsw_first_task: false
fsw:
  alpha: 0.01
  lambda: 0.1
  measure: eo
run:
  seeds: [3, 4]
  methods: [fsw, finetune]
  workers: 2
sweep:
  lambda: [0.1, 1]
)");
  CHECK(cfg.dataset.kind == DatasetKind::toy_yz);
  CHECK(cfg.dataset.n_per_class == 40);
  CHECK(cfg.dataset.n_test_per_class == 500);
  CHECK(cfg.train.hidden == std::vector<int>{12, 6});
  CHECK(cfg.train.eta == 0.002);
  CHECK(cfg.train.tau == 2.0);
  CHECK(cfg.train.budget_mode == BudgetMode::per_class);
  CHECK(cfg.train.full_buffer_grad);
  CHECK_FALSE(cfg.train.fsw_first_task);
  CHECK(cfg.train.batch_size == 64);
  CHECK(cfg.train.fsw.measure == FairnessMeasure::eo);
  CHECK(cfg.seeds == std::vector<std::uint64_t>{3, 4});
  CHECK(cfg.methods == std::vector<Method>{Method::fsw, Method::finetune});
  CHECK(cfg.workers == 2);
  CHECK(cfg.sweep.lambda == std::vector<double>{0.1, 1.0});
  CHECK(cfg.sweep.alpha.empty());
}

TEST_CASE("parse_config: errors") {
  CHECK_THROWS_AS(parse_config("train:\n  etaa: 1\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("extra: 1\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("fsw:\n  measure: gini\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("train:\n  eta: fast\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("sweep:\n  tau: []\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("run:\n  methods: [icarl]\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("dataset: [1, 2"), ConfigError);
  auto cfg = parse_config("train:\n  eta: -1\n");
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  CHECK_NOTHROW(parse_config("").validate());
}

TEST_CASE("parse_config: color_biased defaults and dump round-trip") {
  const auto cfg = parse_config("dataset:\n  kind: color_biased\n  bias_train: 0.9\n");
  CHECK(cfg.dataset.n_per_class == ColorBiasConfig{}.n_per_class);
  CHECK(cfg.dataset.tasks == ColorBiasConfig{}.tasks);
  CHECK(cfg.dataset.color.bias_train == 0.9);
  const auto again = parse_config(dump_config(cfg));
  CHECK(dump_config(again) == dump_config(cfg));

  ExperimentConfig other;
  other.train.eta = 0.1 + 0.2;
  other.sweep.alpha = {0.001, 0.002};
  other.seeds = {9};
  CHECK(parse_config(dump_config(other)).train.eta == other.train.eta);
  CHECK(dump_config(parse_config(dump_config(other))) == dump_config(other));
}

TEST_CASE("load_config: relative data paths follow the config file") {
  test::TempDir dir("cfg");
  {
    std::ofstream f(dir.path() / "exp.yaml");
    f << "dataset:\n  kind: csv\n  train_path: data/train.csv\n";
  }
  const auto cfg = load_config(dir.path() / "exp.yaml");
  CHECK(cfg.dataset.train_path == dir.path() / "data/train.csv");
  CHECK_THROWS_AS(load_config(dir.path() / "nope.yaml"), IoError);
}

TEST_CASE("build_stream: csv ingestion holds out every fifth sample") {
  test::TempDir dir("csv");
  const auto toy = gen_toy_gaussians(10, 1);
  write_stream(dir.path(), toy);
  DatasetSpec spec;
  spec.kind = DatasetKind::csv;
  spec.train_path = dir.path() / "train.csv";
  spec.tasks = 3;
  const auto s = build_stream(spec, 0);
  std::size_t train = 0, test = 0;
  for (const auto& t : s.tasks) train += t.samples.size();
  for (const auto& t : s.test) test += t.samples.size();
  CHECK(train == 24);
  CHECK(test == 6);
  CHECK(s.tasks[2].classes == std::vector<int>{2});

  spec.test_path = dir.path() / "test.csv";
  const auto full = build_stream(spec, 0);
  CHECK(full.tasks[0].samples == std::vector<Sample>(toy.tasks[0].samples.begin(),
                                                     toy.tasks[0].samples.begin() + 10));
}

TEST_CASE("run_experiment: output shape for the toy stream over five seeds") {
  test::TempDir dir("run");
  const auto cfg = tiny(dir.path());
  const auto result = run_experiment(cfg);
  CHECK(result.runs.size() == 20);
  REQUIRE(result.aggregate.size() == 4);
  for (const auto& row : result.aggregate) {
    CHECK(row.runs == 5);
    CHECK(row.disparity_mean.has_value());
  }
  const auto agg = csv_rows(dir.path() / "aggregate.csv");
  REQUIRE(agg.size() == 5);
  CHECK(agg[0] == std::vector<std::string>{"method", "runs", "avg_accuracy_mean", "avg_accuracy_std",
                                           "final_accuracy_mean", "final_accuracy_std", "eer_mean",
                                           "eer_std"});
  for (const char* f : {"per_seed.csv", "tasks.csv", "weights.csv", "fsw_epochs.csv",
                        "manifest.yaml", "runs/fsw_seed0.csv", "runs/joint_seed4.csv"})
    CHECK(fs::exists(dir.path() / f));
  const auto manifest = slurp(dir.path() / "manifest.yaml");
  CHECK(manifest.find("fcil_version") != std::string::npos);
  CHECK(manifest.find("wall_clock_seconds") != std::string::npos);
  CHECK(manifest.find("  run:") != std::string::npos);

  // Aggregates recomputed from per_seed.csv.
  const auto per_seed = csv_rows(dir.path() / "per_seed.csv");
  std::map<std::string, std::vector<double>> acc, eer;
  for (std::size_t i = 1; i < per_seed.size(); ++i) {
    acc[per_seed[i][0]].push_back(std::stod(per_seed[i][2]));
    eer[per_seed[i][0]].push_back(std::stod(per_seed[i][4]));
  }
  for (std::size_t i = 1; i < agg.size(); ++i) {
    const auto& xs = acc.at(agg[i][0]);
    double m = 0.0;
    for (double x : xs) m += x;
    m /= xs.size();
    double v = 0.0;
    for (double x : xs) v += (x - m) * (x - m);
    CHECK(std::stod(agg[i][2]) == doctest::Approx(m).epsilon(1e-12));
    CHECK(std::stod(agg[i][3]) == doctest::Approx(std::sqrt(v / (xs.size() - 1))).epsilon(1e-9));
    double e = 0.0;
    for (double x : eer.at(agg[i][0])) e += x;
    CHECK(std::stod(agg[i][6]) == doctest::Approx(e / 5).epsilon(1e-12));
  }

  // Each FSW epoch contributes one histogram per group; counts add up to |T_l|.
  const auto weights = csv_rows(dir.path() / "weights.csv");
  std::map<std::string, long> per_epoch;
  for (std::size_t i = 1; i < weights.size(); ++i)
    per_epoch[weights[i][1] + "/" + weights[i][2] + "/" + weights[i][3]] += std::stol(weights[i][7]);
  for (const auto& [key, total] : per_epoch) CHECK((total == 60 || total == 30));
}

TEST_CASE("run_experiment: method filter and worker count do not change results") {
  test::TempDir a("filter_a"), b("filter_b");
  auto cfg = tiny(a.path());
  cfg.methods = {Method::finetune};
  cfg.seeds = {0, 1};
  const auto r = run_experiment(cfg);
  CHECK(r.aggregate.size() == 1);
  const auto rows = csv_rows(a.path() / "per_seed.csv");
  CHECK(rows.size() == 3);
  for (std::size_t i = 1; i < rows.size(); ++i) CHECK(rows[i][0] == "finetune");
  CHECK_FALSE(fs::exists(a.path() / "weights.csv"));

  auto one = tiny(a.path() / "w1");
  auto many = tiny(b.path() / "w3");
  one.seeds = many.seeds = {0, 1, 2};
  many.workers = 3;
  run_experiment(one);
  run_experiment(many);
  for (const char* f : {"per_seed.csv", "aggregate.csv", "tasks.csv", "weights.csv", "fsw_epochs.csv"})
    CHECK(slurp(one.out_dir / f) == slurp(many.out_dir / f));
}

TEST_CASE("run_experiment: EO on a stream without attributes is a configuration error") {
  test::TempDir dir("eo");
  auto cfg = tiny(dir.path());
  cfg.train.fsw.measure = FairnessMeasure::eo;
  CHECK_THROWS_AS(run_experiment(cfg, false), ConfigError);
  cfg.dataset.kind = DatasetKind::toy_yz;
  cfg.seeds = {0};
  const auto r = run_experiment(cfg, false);
  for (const auto& row : r.aggregate) CHECK(row.disparity_mean.has_value());
}

TEST_CASE("pareto_flags") {
  CHECK(pareto_flags({SweepRow{}}) == std::vector<bool>{true});
  SweepRow good, bad;
  good.accuracy = 0.9;
  good.disparity = 0.1;
  bad.accuracy = 0.8;
  bad.disparity = 0.2;
  CHECK(pareto_flags({good, bad}) == std::vector<bool>{true, false});
  SweepRow tradeoff;
  tradeoff.accuracy = 0.95;
  tradeoff.disparity = 0.3;
  CHECK(pareto_flags({good, bad, tradeoff}) == std::vector<bool>{true, false, true});
  SweepRow tie = good;
  CHECK(pareto_flags({good, tie}) == std::vector<bool>{true, true});
}

TEST_CASE("grid_sweep: 3 x 3 lambda x tau table and its Pareto set") {
  test::TempDir dir("sweep");
  auto cfg = tiny(dir.path());
  cfg.seeds = {0, 1};
  cfg.workers = 4;
  cfg.sweep.lambda = {0.1, 0.5, 1.0};
  cfg.sweep.tau = {1.0, 2.0, 5.0};
  const auto rows = grid_sweep(cfg);
  REQUIRE(rows.size() == 9);
  const auto table = csv_rows(dir.path() / "sweep.csv");
  REQUIRE(table.size() == 10);
  std::vector<double> acc, disp;
  for (std::size_t i = 1; i < table.size(); ++i) {
    acc.push_back(std::stod(table[i][4]));
    disp.push_back(std::stod(table[i][5]));
  }
  for (std::size_t i = 0; i < acc.size(); ++i) {
    bool dominated = false;
    for (std::size_t j = 0; j < acc.size(); ++j)
      dominated = dominated || (acc[j] > acc[i] && disp[j] < disp[i]);
    CHECK(table[i + 1][6] == (dominated ? "0" : "1"));
  }
  CHECK(std::count_if(rows.begin(), rows.end(), [](const SweepRow& r) { return r.pareto; }) >= 1);
}
