// fcil: run, sweep, gen-data and verify subcommands.

#include <cstdint>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "fcil/error.hpp"
#include "fcil/harness.hpp"
#include "fcil/verify.hpp"

namespace {

enum ExitCode : int {
  kOk = 0,
  kOther = 1,
  kConfig = 2,
  kIo = 3,
  kParse = 4,
  kSolver = 5,
  kVerifyFailed = 6,
};

struct CommonFlags {
  std::string config;
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> methods;
  std::string measure;
  std::string out;
  int workers = 0;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "YAML experiment config")->check(CLI::ExistingFile);
  cmd->add_option("--seed", f.seeds, "seed(s), replacing run.seeds");
  cmd->add_option("--method", f.methods, "method filter: fsw, uniform_replay, finetune, joint")
      ->delimiter(',');
  cmd->add_option("--measure", f.measure, "fairness measure: eer, eo or dp");
  cmd->add_option("--out", f.out, "output directory");
  cmd->add_option("--workers", f.workers, "parallel jobs");
}

// Defaults, then the config file, then flags.
fcil::ExperimentConfig resolve(const CommonFlags& f) {
  fcil::ExperimentConfig cfg = f.config.empty() ? fcil::ExperimentConfig{} : fcil::load_config(f.config);
  if (!f.seeds.empty()) cfg.seeds = f.seeds;
  if (!f.methods.empty()) {
    cfg.methods.clear();
    for (const auto& m : f.methods) cfg.methods.push_back(fcil::parse_method(m));
  }
  if (!f.measure.empty()) cfg.train.fsw.measure = fcil::parse_measure(f.measure);
  if (!f.out.empty()) cfg.out_dir = f.out;
  if (f.workers > 0) cfg.workers = f.workers;
  cfg.validate();
  return cfg;
}

std::string opt(const std::optional<double>& v) { return v ? fmt::format("{:.4f}", *v) : "n/a"; }

int cmd_run(const CommonFlags& f) {
  const auto cfg = resolve(f);
  const auto result = fcil::run_experiment(cfg);
  const auto m = fcil::to_string(cfg.train.fsw.measure);
  fmt::print("{:<16} {:>5} {:>18} {:>18} {:>18}\n", "method", "runs", "avg_accuracy",
             "final_accuracy", m);
  for (const auto& r : result.aggregate)
    fmt::print("{:<16} {:>5} {:>9.4f} ± {:<6.4f} {:>9.4f} ± {:<6.4f} {:>9} ± {:<6}\n",
               fcil::to_string(r.method), r.runs, r.avg_accuracy_mean, r.avg_accuracy_std,
               r.final_accuracy_mean, r.final_accuracy_std, opt(r.disparity_mean),
               opt(r.disparity_std));
  fmt::print("results written to {}\n", cfg.out_dir.string());
  return kOk;
}

int cmd_sweep(const CommonFlags& f) {
  const auto cfg = resolve(f);
  const auto rows = fcil::grid_sweep(cfg);
  fmt::print("{:>8} {:>8} {:>6} {:>8} {:>10} {:>10} {}\n", "alpha", "lambda", "tau", "eta",
             "accuracy", fcil::to_string(cfg.train.fsw.measure), "pareto");
  for (const auto& r : rows)
    fmt::print("{:>8} {:>8} {:>6} {:>8} {:>10.4f} {:>10.4f} {}\n", r.alpha, r.lambda, r.tau, r.eta,
               r.accuracy, r.disparity, r.pareto ? "*" : "");
  fmt::print("sweep written to {}\n", (cfg.out_dir / "sweep.csv").string());
  return kOk;
}

int cmd_gen_data(const CommonFlags& f) {
  const auto cfg = resolve(f);
  const auto seed = cfg.seeds.front();
  const auto stream = fcil::build_stream(cfg.dataset, seed);
  fcil::write_stream(cfg.out_dir, stream);
  for (const auto& w : stream.warnings) fmt::print(stderr, "warning: {}\n", w);
  std::size_t train = 0, test = 0;
  for (const auto& t : stream.tasks) train += t.samples.size();
  for (const auto& t : stream.test) test += t.samples.size();
  fmt::print("{} tasks, {} train and {} test samples written to {}\n", stream.tasks.size(), train,
             test, cfg.out_dir.string());
  return kOk;
}

int cmd_verify(std::uint64_t seed) {
  bool ok = true;
  auto line = [&](bool pass, const std::string& name, const std::string& detail) {
    ok = ok && pass;
    fmt::print("{} {:<28} {}\n", pass ? "PASS" : "FAIL", name, detail);
  };

  const auto lp = fcil::verify::lp_soundness(100, seed);
  line(lp.within_bound == lp.instances && lp.max_complementarity <= 1e-8, "lp-transform",
       fmt::format("{}/{} within bound, complementarity {:.2e}, {:.2f}s", lp.within_bound,
                   lp.instances, lp.max_complementarity, lp.seconds));

  const auto ty = fcil::verify::taylor_fidelity(20, seed);
  bool ty_ok = true;
  std::string ratios;
  for (double r : ty.median_ratio) {
    ty_ok = ty_ok && r >= 3.5 && r <= 4.5;
    ratios += fmt::format(" {:.3f}", r);
  }
  line(ty_ok, "taylor-fidelity", fmt::format("median ratios{}, {:.2f}s", ratios, ty.seconds));

  const auto t1 = fcil::verify::forgetting_inequality(50, seed);
  line(t1.holds == t1.instances, "unfair-forgetting-condition",
       fmt::format("{}/{} strict, min margin {:.3e}, {:.2f}s", t1.holds, t1.instances, t1.min_margin,
                   t1.seconds));

  const auto gc = fcil::verify::gradient_check(50, seed);
  line(gc.passed == gc.fixtures, "last-layer-gradient",
       fmt::format("{}/{} below 1e-4, max rel {:.2e}, {:.2f}s", gc.passed, gc.fixtures,
                   gc.max_relative_error, gc.seconds));

  const auto me = fcil::verify::metric_examples();
  line(me.eer_two_classes == 0.1 && me.a1 == 0.9 && me.a2 == 0.65 && me.a_bar == 0.775 &&
           me.perfect_eer == 0.0 && me.perfect_eo == 0.0 && me.perfect_dp == 0.0,
       "metric-examples",
       fmt::format("eer {} A1 {} A2 {} Abar {}", me.eer_two_classes, me.a1, me.a2, me.a_bar));
  return ok ? kOk : kVerifyFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fairness-aware sample weighting for class-incremental learning"};
  app.require_subcommand(1);

  CommonFlags run_flags, sweep_flags, gen_flags;
  auto* run = app.add_subcommand("run", "train FSW and baselines over seeds, write CSV tables");
  add_common(run, run_flags);
  auto* sweep = app.add_subcommand("sweep", "grid search over alpha, lambda, tau and eta");
  add_common(sweep, sweep_flags);
  auto* gen = app.add_subcommand("gen-data", "write the configured dataset as CSV");
  add_common(gen, gen_flags);
  auto* verify = app.add_subcommand("verify", "check the numerical core against the oracles");
  std::uint64_t verify_seed = 2024;
  verify->add_option("--seed", verify_seed, "seed for the randomized checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (*run) return cmd_run(run_flags);
    if (*sweep) return cmd_sweep(sweep_flags);
    if (*gen) return cmd_gen_data(gen_flags);
    if (*verify) return cmd_verify(verify_seed);
  } catch (const fcil::ConfigError& e) {
    fmt::print(stderr, "config error: {}\n", e.what());
    return kConfig;
  } catch (const fcil::IoError& e) {
    fmt::print(stderr, "io error: {}\n", e.what());
    return kIo;
  } catch (const fcil::ParseError& e) {
    fmt::print(stderr, "parse error: {}\n", e.what());
    return kParse;
  } catch (const fcil::SolverError& e) {
    fmt::print(stderr, "solver error: {}\n", e.what());
    return kSolver;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kOther;
  }
  return kOther;
}
