#include <doctest.h>

#include <cmath>
#include <random>

#include "fcil/error.hpp"
#include "fcil/lp.hpp"
#include "fcil/oracles.hpp"
#include "fcil/verify.hpp"
#include "support.hpp"

using namespace fcil;
using fcil::test::vec;

TEST_CASE("grid_min: constant objective returns the first grid point") {
  const auto r = oracle::grid_min([](std::span<const double>) { return 3.0; }, 2, 0.1);
  CHECK(r.value == 3.0);
  CHECK(r.w == std::vector<double>{0.0, 0.0});
  CHECK(r.evaluations == 121);
}

TEST_CASE("grid_min: |0.5 - w| at step 0.01") {
  AbsObjective obj;
  obj.n = 1;
  obj.abs_terms.push_back({0.5, vec({1.0}), 1.0});
  const auto r = oracle::grid_min(obj, 0.01);
  CHECK(r.value == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(r.w[0] == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("grid_min: refuses large dimensions and bad steps") {
  auto f = [](std::span<const double>) { return 0.0; };
  CHECK_THROWS_AS(oracle::grid_min(f, oracle::kMaxGridDimension + 1, 0.5), ContractViolation);
  CHECK_THROWS_AS(oracle::grid_min(f, 1, 0.0), ContractViolation);
}

TEST_CASE("grid_min: random n = 3 objectives lie within the Lipschitz bound of the LP") {
  std::mt19937_64 rng(8);
  int checked = 0;
  while (checked < 10) {
    auto obj = verify::random_abs_objective(rng, 3, 3, 1);
    if (obj.n != 3 || obj.abs_terms.size() != 3) continue;
    const auto sol = solve_lp(build_abs_lp(obj));
    const auto grid = oracle::grid_min(obj, 0.01);
    const double gap = grid.value - sol.objective;
    CHECK(gap >= -1e-9);
    CHECK(gap <= oracle::grid_gap_bound(obj, 0.01) + 1e-9);
    ++checked;
  }
}

TEST_CASE("abs_objective_value and lipschitz_constant by hand") {
  AbsObjective obj;
  obj.n = 2;
  obj.abs_terms.push_back({1.0, vec({3.0, 4.0}), 0.5});
  obj.lin_terms.push_back({2.0, vec({1.0, 0.0}), 1.0});
  const std::vector<double> w{1.0, 1.0};
  // 0.5 * |1 - 7| + (2 - 1) = 4
  CHECK(oracle::abs_objective_value(obj, w) == 4.0);
  // 0.5 * 5 + 1
  CHECK(oracle::lipschitz_constant(obj) == 3.5);
  CHECK(oracle::grid_gap_bound(obj, 0.01) == doctest::Approx(3.5 * 0.01 * std::sqrt(2.0)));
}

TEST_CASE("finite_diff_grad matches the analytic head gradient on the fixed net") {
  const auto model = test::net_243();
  const std::vector<Sample> batch{test::sample({1.0, 0.0}, 2), test::sample({-0.5, 0.3}, 0)};
  const Vector fd = oracle::finite_diff_grad(model, batch, 1e-4).values();
  const Vector an = last_layer_grad(model, batch).values();
  CHECK((fd - an).cwiseAbs().maxCoeff() / an.cwiseAbs().maxCoeff() < 1e-4);
  CHECK_THROWS_AS(oracle::finite_diff_grad(model, batch, 0.0), ContractViolation);
}

TEST_CASE("exact_loss_after_step: zero step leaves the loss unchanged") {
  std::mt19937_64 rng(2);
  const auto model = MlpModel::create(2, {3}, 2, rng);
  const auto task = test::gaussian_batch(rng, 5, 2, 2);
  const auto group = test::gaussian_batch(rng, 4, 2, 2);
  const std::vector<double> w(5, 1.0);
  CHECK(oracle::exact_loss_after_step(model, group, task, w, 0.0) == oracle::mean_loss(model, group));
  CHECK(oracle::mean_loss(model, group) == doctest::Approx(mean_loss(model, group)).epsilon(1e-13));
}

TEST_CASE("weighted_head_grad agrees with the library's weighted full gradient tail") {
  std::mt19937_64 rng(3);
  const auto model = MlpModel::create(3, {4}, 3, rng);
  const auto task = test::gaussian_batch(rng, 6, 3, 3);
  std::vector<double> w{0.0, 1.0, 0.5, 0.25, 1.0, 0.75};
  const auto g = oracle::weighted_head_grad(model, task, w);
  const Vector full = full_grad(model, task, w);
  const Vector tail = full.tail(static_cast<Eigen::Index>(g.size()));
  for (std::size_t i = 0; i < g.size(); ++i)
    CHECK(tail[static_cast<Eigen::Index>(i)] == doctest::Approx(g[i]).epsilon(1e-12));
}

TEST_CASE("Taylor error shrinks about fourfold per halving of the step") {
  const auto r = verify::taylor_fidelity(20, 4);
  for (double ratio : r.median_ratio) {
    CHECK(ratio >= 3.5);
    CHECK(ratio <= 4.5);
  }
}

TEST_CASE("unfair-forgetting construction holds strictly") {
  const auto r = verify::forgetting_inequality(50, 6);
  CHECK(r.holds == r.instances);
  CHECK(r.min_margin > 0.0);
}
