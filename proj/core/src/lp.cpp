#include "fcil/lp.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include <fmt/format.h>

#include "fcil/error.hpp"

namespace fcil {

double AbsObjective::evaluate(const Eigen::VectorXd& w) const {
  if (w.size() != n) throw ContractViolation("AbsObjective::evaluate: |w| != n");
  double v = 0.0;
  for (const auto& t : abs_terms) v += t.weight * std::abs(t.a - t.b.dot(w));
  for (const auto& t : lin_terms) v += t.weight * (t.c - t.d.dot(w));
  return v;
}

void AbsObjective::validate() const {
  if (n < 0) throw ContractViolation("AbsObjective: negative dimension");
  for (std::size_t i = 0; i < abs_terms.size(); ++i) {
    if (abs_terms[i].b.size() != n)
      throw ContractViolation(fmt::format("AbsObjective: abs term {} has length {}, expected {}", i,
                                          abs_terms[i].b.size(), n));
    if (!(abs_terms[i].weight >= 0.0))
      throw ContractViolation(fmt::format("AbsObjective: abs term {} has negative weight", i));
  }
  for (std::size_t j = 0; j < lin_terms.size(); ++j)
    if (lin_terms[j].d.size() != n)
      throw ContractViolation(fmt::format("AbsObjective: linear term {} has length {}, expected {}",
                                          j, lin_terms[j].d.size(), n));
}

void LpProblem::validate() const {
  const auto nv = num_vars();
  if (eq_matrix.cols() != nv || lower.size() != nv || upper.size() != nv)
    throw ContractViolation("LpProblem: inconsistent variable count");
  if (eq_rhs.size() != eq_matrix.rows()) throw ContractViolation("LpProblem: rhs size mismatch");
  if (decision_count < 0 || decision_count > nv)
    throw ContractViolation("LpProblem: decision_count out of range");
  for (Eigen::Index j = 0; j < nv; ++j)
    if (lower[j] > upper[j] || std::isnan(lower[j]) || std::isnan(upper[j]))
      throw ContractViolation(fmt::format("LpProblem: bad bounds on variable {}", j));
}

std::string to_string(LpStatus s) {
  switch (s) {
    case LpStatus::optimal: return "optimal";
    case LpStatus::infeasible: return "infeasible";
    case LpStatus::unbounded: return "unbounded";
    case LpStatus::iteration_limit: return "iteration_limit";
  }
  return "unknown";
}

LpProblem build_abs_lp(const AbsObjective& obj) {
  obj.validate();
  const int n = obj.n;
  const auto k = static_cast<Eigen::Index>(obj.abs_terms.size());
  const Eigen::Index nv = n + 2 * k;

  LpProblem p;
  p.decision_count = n;
  p.cost = Eigen::VectorXd::Zero(nv);
  p.eq_matrix = Eigen::MatrixXd::Zero(k, nv);
  p.eq_rhs = Eigen::VectorXd::Zero(k);
  p.lower = Eigen::VectorXd::Zero(nv);
  p.upper = Eigen::VectorXd::Constant(nv, kInfinity);
  p.upper.head(n).setOnes();

  for (const auto& t : obj.lin_terms) {
    p.cost.head(n) -= t.weight * t.d;
    p.cost_offset += t.weight * t.c;
  }
  for (Eigen::Index i = 0; i < k; ++i) {
    const auto& t = obj.abs_terms[static_cast<std::size_t>(i)];
    const Eigen::Index plus = n + 2 * i;
    p.eq_matrix.row(i).head(n) = t.b.transpose();
    p.eq_matrix(i, plus) = 1.0;
    p.eq_matrix(i, plus + 1) = -1.0;
    p.eq_rhs[i] = t.a;
    p.cost[plus] = t.weight;
    p.cost[plus + 1] = t.weight;
  }

  p.names.reserve(static_cast<std::size_t>(nv));
  for (int j = 0; j < n; ++j) p.names.push_back(fmt::format("w{}", j));
  for (Eigen::Index i = 0; i < k; ++i) {
    p.names.push_back(fmt::format("yp{}", i));
    p.names.push_back(fmt::format("ym{}", i));
  }
  return p;
}

namespace {

enum class VarState { basic, at_lower, at_upper, free_zero };

constexpr double kTieTol = 1e-12;
constexpr double kDegenerateGain = 1e-15;

// Working state of the bounded-variable simplex over structural columns plus
// one artificial column per row.
class Simplex {
 public:
  Simplex(const LpProblem& p, const SimplexOptions& opt) : p_(p), opt_(opt) {
    m_ = p.num_rows();
    n_ = p.num_vars();
    total_ = n_ + m_;
    lower_.resize(total_);
    upper_.resize(total_);
    lower_.head(n_) = p.lower;
    upper_.head(n_) = p.upper;
    lower_.tail(m_).setZero();
    upper_.tail(m_).setConstant(kInfinity);
    x_ = Eigen::VectorXd::Zero(total_);
    state_.assign(static_cast<std::size_t>(total_), VarState::at_lower);
    art_sign_ = Eigen::VectorXd::Ones(m_);

    for (Eigen::Index j = 0; j < n_; ++j) {
      if (std::isfinite(lower_[j])) {
        x_[j] = lower_[j];
        state_[idx(j)] = VarState::at_lower;
      } else if (std::isfinite(upper_[j])) {
        x_[j] = upper_[j];
        state_[idx(j)] = VarState::at_upper;
      } else {
        x_[j] = 0.0;
        state_[idx(j)] = VarState::free_zero;
      }
    }
    const Eigen::VectorXd resid = p.eq_rhs - p.eq_matrix * x_.head(n_);
    basis_.resize(static_cast<std::size_t>(m_));
    for (Eigen::Index i = 0; i < m_; ++i) {
      art_sign_[i] = resid[i] >= 0.0 ? 1.0 : -1.0;
      const Eigen::Index a = n_ + i;
      x_[a] = std::abs(resid[i]);
      state_[idx(a)] = VarState::basic;
      basis_[idx(i)] = a;
    }
    binv_ = art_sign_.asDiagonal();
  }

  LpSolution run() {
    if (m_ > 0) {
      Eigen::VectorXd phase1 = Eigen::VectorXd::Zero(total_);
      phase1.tail(m_).setOnes();
      const auto st = iterate(phase1);
      if (st == LpStatus::iteration_limit) return finish(LpStatus::iteration_limit);
      const double infeas = x_.tail(m_).sum();
      const double scale = 1.0 + (m_ > 0 ? p_.eq_rhs.cwiseAbs().maxCoeff() : 0.0);
      if (infeas > opt_.feasibility_tol * scale * static_cast<double>(m_))
        return finish(LpStatus::infeasible);
    }
    // Artificials are pinned at zero for phase two.
    for (Eigen::Index i = 0; i < m_; ++i) {
      const Eigen::Index a = n_ + i;
      upper_[a] = 0.0;
      if (state_[idx(a)] != VarState::basic) {
        x_[a] = 0.0;
        state_[idx(a)] = VarState::at_lower;
      }
    }
    Eigen::VectorXd phase2 = Eigen::VectorXd::Zero(total_);
    phase2.head(n_) = p_.cost;
    return finish(iterate(phase2));
  }

 private:
  static std::size_t idx(Eigen::Index i) { return static_cast<std::size_t>(i); }

  // Column j of [A | diag(art_sign)].
  Eigen::VectorXd column(Eigen::Index j) const {
    if (j < n_) return p_.eq_matrix.col(j);
    Eigen::VectorXd e = Eigen::VectorXd::Zero(m_);
    e[j - n_] = art_sign_[j - n_];
    return e;
  }

  void refactor() {
    Eigen::MatrixXd b(m_, m_);
    for (Eigen::Index i = 0; i < m_; ++i) b.col(i) = column(basis_[idx(i)]);
    binv_ = b.partialPivLu().inverse();
    Eigen::VectorXd rhs = p_.eq_rhs;
    for (Eigen::Index j = 0; j < total_; ++j)
      if (state_[idx(j)] != VarState::basic && x_[j] != 0.0) rhs -= x_[j] * column(j);
    const Eigen::VectorXd xb = binv_ * rhs;
    for (Eigen::Index i = 0; i < m_; ++i) x_[basis_[idx(i)]] = xb[i];
  }

  LpStatus iterate(const Eigen::VectorXd& cost) {
    std::size_t degenerate_run = 0;
    bool bland = false;
    std::size_t since_refactor = 0;
    while (true) {
      if (iterations_ >= opt_.max_iterations) return LpStatus::iteration_limit;
      if (since_refactor >= opt_.refactor_interval) {
        refactor();
        since_refactor = 0;
      }

      Eigen::VectorXd cb(m_);
      for (Eigen::Index i = 0; i < m_; ++i) cb[i] = cost[basis_[idx(i)]];
      const Eigen::RowVectorXd duals = cb.transpose() * binv_;

      // Pricing.
      Eigen::Index enter = -1;
      double enter_dir = 0.0;
      double enter_d = 0.0;
      double best = 0.0;
      for (Eigen::Index j = 0; j < total_; ++j) {
        const VarState s = state_[idx(j)];
        if (s == VarState::basic || lower_[j] == upper_[j]) continue;
        double d = cost[j];
        if (j < n_) {
          d -= duals.dot(p_.eq_matrix.col(j));
        } else {
          d -= duals[j - n_] * art_sign_[j - n_];
        }
        double dir = 0.0;
        if ((s == VarState::at_lower || s == VarState::free_zero) && d < -opt_.optimality_tol) dir = 1.0;
        else if ((s == VarState::at_upper || s == VarState::free_zero) && d > opt_.optimality_tol) dir = -1.0;
        if (dir == 0.0) continue;
        if (bland) {
          enter = j;
          enter_dir = dir;
          enter_d = d;
          break;
        }
        if (std::abs(d) > best) {
          best = std::abs(d);
          enter = j;
          enter_dir = dir;
          enter_d = d;
        }
      }
      if (enter < 0) return LpStatus::optimal;

      // Ratio test.
      const Eigen::VectorXd alpha = binv_ * column(enter);
      double step = upper_[enter] - lower_[enter];  // bound flip distance
      Eigen::Index leave_row = -1;
      double leave_pivot = 0.0;
      for (Eigen::Index i = 0; i < m_; ++i) {
        const double delta = -enter_dir * alpha[i];  // change of x_B[i] per unit step
        if (std::abs(alpha[i]) <= opt_.pivot_tol) continue;
        const Eigen::Index bv = basis_[idx(i)];
        double limit = kInfinity;
        if (delta < 0.0 && std::isfinite(lower_[bv])) limit = (x_[bv] - lower_[bv]) / -delta;
        else if (delta > 0.0 && std::isfinite(upper_[bv])) limit = (upper_[bv] - x_[bv]) / delta;
        if (!std::isfinite(limit)) continue;
        limit = std::max(limit, 0.0);
        bool take = false;
        if (leave_row < 0) {
          take = limit < step;
        } else if (limit < step - kTieTol) {
          take = true;
        } else if (std::abs(limit - step) <= kTieTol) {
          take = bland ? bv < basis_[idx(leave_row)] : std::abs(alpha[i]) > std::abs(leave_pivot);
        }
        if (take) {
          step = limit;
          leave_row = i;
          leave_pivot = alpha[i];
        }
      }
      if (!std::isfinite(step)) return LpStatus::unbounded;

      ++iterations_;
      if (bland) ++bland_iterations_;
      ++since_refactor;

      if (step * std::abs(enter_d) <= kDegenerateGain) {
        if (++degenerate_run >= opt_.stall_threshold) bland = true;
      } else {
        degenerate_run = 0;
        bland = false;
      }

      x_[enter] += enter_dir * step;
      for (Eigen::Index i = 0; i < m_; ++i) x_[basis_[idx(i)]] -= enter_dir * step * alpha[i];

      if (leave_row < 0) {
        // Entering variable reached its opposite bound.
        if (enter_dir > 0.0) {
          x_[enter] = upper_[enter];
          state_[idx(enter)] = VarState::at_upper;
        } else {
          x_[enter] = lower_[enter];
          state_[idx(enter)] = VarState::at_lower;
        }
        continue;
      }

      const Eigen::Index leaving = basis_[idx(leave_row)];
      const double delta = -enter_dir * alpha[leave_row];
      if (delta < 0.0) {
        x_[leaving] = lower_[leaving];
        state_[idx(leaving)] = VarState::at_lower;
      } else {
        x_[leaving] = upper_[leaving];
        state_[idx(leaving)] = VarState::at_upper;
      }
      state_[idx(enter)] = VarState::basic;
      basis_[idx(leave_row)] = enter;

      const Eigen::RowVectorXd pivot_row = binv_.row(leave_row) / alpha[leave_row];
      for (Eigen::Index i = 0; i < m_; ++i) {
        if (i == leave_row) continue;
        if (alpha[i] != 0.0) binv_.row(i) -= alpha[i] * pivot_row;
      }
      binv_.row(leave_row) = pivot_row;
    }
  }

  LpSolution finish(LpStatus status) {
    LpSolution sol;
    sol.status = status;
    sol.iterations = iterations_;
    sol.bland_iterations = bland_iterations_;
    if (m_ > 0 && status == LpStatus::optimal) refactor();
    sol.x = x_.head(n_);
    // Snap values within tolerance of a bound onto it.
    for (Eigen::Index j = 0; j < n_; ++j) {
      if (sol.x[j] < p_.lower[j] && sol.x[j] > p_.lower[j] - opt_.feasibility_tol) sol.x[j] = p_.lower[j];
      if (sol.x[j] > p_.upper[j] && sol.x[j] < p_.upper[j] + opt_.feasibility_tol) sol.x[j] = p_.upper[j];
    }
    sol.w = sol.x.head(p_.decision_count);
    sol.objective = p_.cost.dot(sol.x) + p_.cost_offset;
    return sol;
  }

  const LpProblem& p_;
  const SimplexOptions& opt_;
  Eigen::Index m_ = 0;
  Eigen::Index n_ = 0;
  Eigen::Index total_ = 0;
  Eigen::VectorXd lower_, upper_, x_, art_sign_;
  std::vector<VarState> state_;
  std::vector<Eigen::Index> basis_;
  Eigen::MatrixXd binv_;
  std::size_t iterations_ = 0;
  std::size_t bland_iterations_ = 0;
};

}  // namespace

LpSolution solve_lp(const LpProblem& problem, const SimplexOptions& options) {
  problem.validate();
  Simplex s(problem, options);
  return s.run();
}

void write_lp_format(std::ostream& out, const LpProblem& p) {
  p.validate();
  auto name = [&](Eigen::Index j) {
    return static_cast<std::size_t>(j) < p.names.size() ? p.names[static_cast<std::size_t>(j)]
                                                        : fmt::format("x{}", j);
  };
  auto term = [&](double coef, Eigen::Index j, bool first) {
    std::string sign = coef < 0.0 ? "- " : (first ? "" : "+ ");
    return fmt::format("{}{} {}", sign, std::abs(coef), name(j));
  };
  out << "\\ constant objective offset: " << fmt::format("{}", p.cost_offset) << "\n";
  out << "Minimize\n obj:";
  bool first = true;
  for (Eigen::Index j = 0; j < p.num_vars(); ++j) {
    if (p.cost[j] == 0.0) continue;
    out << ' ' << term(p.cost[j], j, first);
    first = false;
  }
  if (first) out << " 0 " << name(0);
  out << "\nSubject To\n";
  for (Eigen::Index i = 0; i < p.num_rows(); ++i) {
    out << " c" << i << ':';
    first = true;
    for (Eigen::Index j = 0; j < p.num_vars(); ++j) {
      if (p.eq_matrix(i, j) == 0.0) continue;
      out << ' ' << term(p.eq_matrix(i, j), j, first);
      first = false;
    }
    if (first) out << " 0 " << name(0);
    out << " = " << fmt::format("{}", p.eq_rhs[i]) << '\n';
  }
  out << "Bounds\n";
  for (Eigen::Index j = 0; j < p.num_vars(); ++j) {
    const bool lo = std::isfinite(p.lower[j]);
    const bool hi = std::isfinite(p.upper[j]);
    if (lo && hi) out << ' ' << fmt::format("{} <= {} <= {}", p.lower[j], name(j), p.upper[j]) << '\n';
    else if (lo) out << ' ' << fmt::format("{} >= {}", name(j), p.lower[j]) << '\n';
    else if (hi) out << ' ' << fmt::format("-inf <= {} <= {}", name(j), p.upper[j]) << '\n';
    else out << ' ' << name(j) << " free\n";
  }
  out << "End\n";
}

}  // namespace fcil
