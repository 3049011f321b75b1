#pragma once

#include <cstddef>
#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace fcil {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

// weight * |a - b^T w|
struct AbsTerm {
  double a = 0.0;
  Eigen::VectorXd b;
  double weight = 1.0;
};

// weight * (c - d^T w)
struct LinTerm {
  double c = 0.0;
  Eigen::VectorXd d;
  double weight = 1.0;
};

// A weighted sum of absolute values of affine functions plus affine terms,
// over decision variables w in [0,1]^n. Abs-term weights must be >= 0 so the
// function stays convex.
struct AbsObjective {
  int n = 0;
  std::vector<AbsTerm> abs_terms;
  std::vector<LinTerm> lin_terms;

  [[nodiscard]] double evaluate(const Eigen::VectorXd& w) const;
  void validate() const;
};

// min cost^T x + cost_offset  s.t.  eq_matrix x = eq_rhs,  lower <= x <= upper.
// The first decision_count variables are the weights w.
struct LpProblem {
  Eigen::VectorXd cost;
  double cost_offset = 0.0;
  Eigen::MatrixXd eq_matrix;
  Eigen::VectorXd eq_rhs;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
  int decision_count = 0;
  std::vector<std::string> names;  // optional, used by write_lp_format

  [[nodiscard]] Eigen::Index num_vars() const { return cost.size(); }
  [[nodiscard]] Eigen::Index num_rows() const { return eq_matrix.rows(); }
  void validate() const;
};

enum class LpStatus { optimal, infeasible, unbounded, iteration_limit };

std::string to_string(LpStatus s);

struct LpSolution {
  LpStatus status = LpStatus::infeasible;
  Eigen::VectorXd x;  // all variables
  Eigen::VectorXd w;  // leading decision_count entries of x
  double objective = 0.0;
  std::size_t iterations = 0;
  std::size_t bland_iterations = 0;
};

struct SimplexOptions {
  double feasibility_tol = 1e-8;
  double optimality_tol = 1e-9;
  double pivot_tol = 1e-11;
  std::size_t max_iterations = 200000;
  // Consecutive degenerate pivots before switching to Bland's rule.
  std::size_t stall_threshold = 50;
  std::size_t refactor_interval = 100;
};

// One equality y+_i - y-_i + b_i^T w = a_i per abs term with y+_i, y-_i >= 0;
// the objective charges weight_i * (y+_i + y-_i). Variables are laid out as
// w (n, bounded [0,1]) then (y+_1, y-_1, ..., y+_k, y-_k).
LpProblem build_abs_lp(const AbsObjective& obj);

// Bounded-variable two-phase primal simplex, dense basis inverse. Dantzig
// pricing, switching to Bland's rule after a run of degenerate pivots.
LpSolution solve_lp(const LpProblem& problem, const SimplexOptions& options = {});

// CPLEX LP text format, for cross-checking against external solvers.
void write_lp_format(std::ostream& out, const LpProblem& problem);

}  // namespace fcil
