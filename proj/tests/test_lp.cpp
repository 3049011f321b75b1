#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <sstream>

#include "fcil/error.hpp"
#include "fcil/lp.hpp"
#include "fcil/oracles.hpp"
#include "fcil/verify.hpp"
#include "support.hpp"

using namespace fcil;
using fcil::test::vec;

namespace {

AbsObjective one_var(double a, double b) {
  AbsObjective obj;
  obj.n = 1;
  obj.abs_terms.push_back({a, vec({b}), 1.0});
  return obj;
}

// Minimum of cost^T x over every basic solution of {Ax = b, lo <= x <= hi}
// with finite bounds: choose m basic columns, fix the rest at a bound, solve.
double vertex_min(const LpProblem& p) {
  const auto m = p.num_rows();
  const auto n = p.num_vars();
  double best = kInfinity;
  std::vector<int> basis(static_cast<std::size_t>(m));
  auto try_basis = [&] {
    Eigen::MatrixXd B(m, m);
    for (Eigen::Index r = 0; r < m; ++r) B.col(r) = p.eq_matrix.col(basis[r]);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(B);
    if (lu.rank() < m) return;
    std::vector<int> nonbasic;
    for (int j = 0; j < n; ++j)
      if (std::find(basis.begin(), basis.end(), j) == basis.end()) nonbasic.push_back(j);
    for (long mask = 0; mask < (1L << nonbasic.size()); ++mask) {
      Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
      for (std::size_t k = 0; k < nonbasic.size(); ++k)
        x[nonbasic[k]] = (mask >> k) & 1 ? p.upper[nonbasic[k]] : p.lower[nonbasic[k]];
      const Eigen::VectorXd xb = lu.solve(p.eq_rhs - p.eq_matrix * x);
      bool ok = true;
      for (Eigen::Index r = 0; r < m; ++r) {
        x[basis[r]] = xb[r];
        ok = ok && xb[r] >= p.lower[basis[r]] - 1e-9 && xb[r] <= p.upper[basis[r]] + 1e-9;
      }
      if (ok) best = std::min(best, p.cost.dot(x) + p.cost_offset);
    }
  };
  // Enumerate m-subsets of the columns.
  std::function<void(int, int)> rec = [&](int start, int depth) {
    if (depth == m) return try_basis();
    for (int j = start; j < n; ++j) {
      basis[depth] = j;
      rec(j + 1, depth + 1);
    }
  };
  rec(0, 0);
  return best;
}

}  // namespace

TEST_CASE("build_abs_lp: small examples against the grid oracle") {
  SUBCASE("min |3 - w|") {
    const auto obj = one_var(3.0, 1.0);
    const auto sol = solve_lp(build_abs_lp(obj));
    REQUIRE(sol.status == LpStatus::optimal);
    CHECK(sol.w[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(sol.objective == doctest::Approx(2.0).epsilon(1e-12));
    const auto grid = oracle::grid_min(obj, 0.01);
    CHECK(grid.value == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(grid.w[0] == 1.0);
  }
  SUBCASE("min |0 - w|") {
    const auto sol = solve_lp(build_abs_lp(one_var(0.0, 1.0)));
    CHECK(sol.w[0] == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(std::abs(sol.objective) < 1e-12);
  }
  SUBCASE("min |1 - w| + (1 - w)") {
    auto obj = one_var(1.0, 1.0);
    obj.lin_terms.push_back({1.0, vec({1.0}), 1.0});
    const auto sol = solve_lp(build_abs_lp(obj));
    CHECK(sol.w[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(sol.objective) < 1e-12);
    const auto grid = oracle::grid_min(obj, 0.01);
    CHECK(std::abs(grid.value) < 1e-12);
    CHECK(grid.w[0] == 1.0);
  }
}

TEST_CASE("build_abs_lp: layout") {
  AbsObjective obj;
  obj.n = 2;
  obj.abs_terms.push_back({0.5, vec({1.0, -2.0}), 0.25});
  obj.lin_terms.push_back({3.0, vec({0.5, 1.0}), 2.0});
  const auto p = build_abs_lp(obj);
  CHECK(p.num_vars() == 4);
  CHECK(p.num_rows() == 1);
  CHECK(p.decision_count == 2);
  CHECK(p.cost == vec({-1.0, -2.0, 0.25, 0.25}));
  CHECK(p.cost_offset == 6.0);
  CHECK(p.eq_matrix.row(0).transpose() == vec({1.0, -2.0, 1.0, -1.0}));
  CHECK(p.eq_rhs[0] == 0.5);
  CHECK(p.upper.head(2) == vec({1.0, 1.0}));
  CHECK(std::isinf(p.upper[2]));

  std::ostringstream lp;
  write_lp_format(lp, p);
  const auto text = lp.str();
  CHECK(text.find("Minimize") != std::string::npos);
  CHECK(text.find("c0: 1 w0 - 2 w1 + 1 yp0 - 1 ym0 = 0.5") != std::string::npos);
  CHECK(text.find("0 <= w1 <= 1") != std::string::npos);
  CHECK(text.find("ym0 >= 0") != std::string::npos);

  obj.abs_terms[0].weight = -1.0;
  CHECK_THROWS_AS(build_abs_lp(obj), ContractViolation);
}

TEST_CASE("solve_lp: box corner and feasible zero") {
  LpProblem box;
  box.cost = vec({-1.0, -1.0});
  box.eq_matrix = Eigen::MatrixXd::Zero(0, 2);
  box.eq_rhs = Eigen::VectorXd::Zero(0);
  box.lower = Eigen::VectorXd::Zero(2);
  box.upper = Eigen::VectorXd::Ones(2);
  box.decision_count = 2;
  const auto s = solve_lp(box);
  REQUIRE(s.status == LpStatus::optimal);
  CHECK(s.w == vec({1.0, 1.0}));
  CHECK(s.objective == -2.0);

  const auto half = solve_lp(build_abs_lp(one_var(0.5, 1.0)));
  CHECK(std::abs(half.objective) < 1e-12);
  CHECK(half.w[0] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("solve_lp: infeasible and unbounded are statuses, not exceptions") {
  LpProblem inf;
  inf.cost = vec({1.0});
  inf.eq_matrix = Eigen::MatrixXd::Ones(1, 1);
  inf.eq_rhs = vec({2.0});
  inf.lower = vec({0.0});
  inf.upper = vec({1.0});
  inf.decision_count = 1;
  CHECK(solve_lp(inf).status == LpStatus::infeasible);

  LpProblem unb;
  unb.cost = vec({0.0, -1.0, 0.0});
  unb.eq_matrix = Eigen::MatrixXd(1, 3);
  unb.eq_matrix << 1.0, 1.0, -1.0;
  unb.eq_rhs = vec({0.5});
  unb.lower = Eigen::VectorXd::Zero(3);
  unb.upper = vec({1.0, kInfinity, kInfinity});
  unb.decision_count = 1;
  CHECK(solve_lp(unb).status == LpStatus::unbounded);
}

TEST_CASE("solve_lp: random dense bounded LPs match vertex enumeration") {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_int_distribution<int> dim(2, 8);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = dim(rng);
    const int m = std::uniform_int_distribution<int>(1, std::min(3, n - 1))(rng);
    LpProblem p;
    p.decision_count = n;
    p.cost = Eigen::VectorXd(n);
    p.lower = Eigen::VectorXd::Zero(n);
    p.upper = Eigen::VectorXd(n);
    Eigen::VectorXd x0(n);
    for (int j = 0; j < n; ++j) {
      p.cost[j] = u(rng);
      p.upper[j] = 1.5 + u(rng);
      x0[j] = 0.5 * (1.0 + u(rng)) * p.upper[j];
    }
    p.eq_matrix = Eigen::MatrixXd(m, n);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) p.eq_matrix(i, j) = u(rng);
    p.eq_rhs = p.eq_matrix * x0;
    const auto sol = solve_lp(p);
    REQUIRE(sol.status == LpStatus::optimal);
    CHECK(std::abs(sol.objective - vertex_min(p)) < 1e-6);
    CHECK((p.eq_matrix * sol.x - p.eq_rhs).cwiseAbs().maxCoeff() < 1e-8);
    CHECK(sol.x.minCoeff() >= -1e-8);
    CHECK(((sol.x - p.upper).array() <= 1e-8).all());
  }
}

TEST_CASE("solve_lp: random abs objectives, complementarity and determinism") {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 40; ++trial) {
    const auto obj = verify::random_abs_objective(rng, 3, 4, 2);
    const auto p = build_abs_lp(obj);
    const auto a = solve_lp(p);
    const auto b = solve_lp(p);
    REQUIRE(a.status == LpStatus::optimal);
    CHECK(a.x == b.x);
    CHECK(a.iterations == b.iterations);
    CHECK(a.objective == doctest::Approx(obj.evaluate(a.w)).epsilon(1e-9));
    for (std::size_t i = 0; i < obj.abs_terms.size(); ++i) {
      const auto k = static_cast<Eigen::Index>(obj.n + 2 * i);
      CHECK(std::min(a.x[k], a.x[k + 1]) <= 1e-8);
    }
    const auto grid = oracle::grid_min(obj, 0.01);
    CHECK(grid.value >= a.objective - 1e-9);
    CHECK(grid.value <= a.objective + oracle::grid_gap_bound(obj, 0.01) + 1e-9);
  }
}

TEST_CASE("solve_lp: degenerate problem with many tied optima stays finite") {
  // Every w gives |0 - 0 w| = 0; many ties.
  AbsObjective obj;
  obj.n = 6;
  for (int k = 0; k < 5; ++k) obj.abs_terms.push_back({0.0, Eigen::VectorXd::Zero(6), 1.0});
  const auto sol = solve_lp(build_abs_lp(obj));
  CHECK(sol.status == LpStatus::optimal);
  CHECK(sol.objective == 0.0);
}
