#pragma once

// Randomized checks of the numerical core against the brute-force oracles.
// Each routine returns raw measurements; callers decide pass/fail.

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

#include "fcil/lp.hpp"
#include "fcil/tensorcore.hpp"

namespace fcil::verify {

// n in [1, max_n], 1..max_abs abs terms, 0..max_lin linear terms. Coefficients
// are uniform in [-2, 2], term weights uniform in [0.1, 1].
AbsObjective random_abs_objective(std::mt19937_64& rng, int max_n = 3, int max_abs = 4,
                                  int max_lin = 2);

// Gaussian features, uniform labels in [0, num_classes).
std::vector<Sample> random_samples(std::mt19937_64& rng, std::size_t count, int dim,
                                   int num_classes);

struct LpSoundness {
  std::size_t instances = 0;
  std::size_t optimal = 0;
  std::size_t within_bound = 0;        // |lp - grid| <= gap bound and lp <= grid
  double worst_gap_fraction = 0.0;     // max (grid - lp) / bound
  double max_lp_excess = 0.0;          // max (lp - grid), should be <= 0
  double max_complementarity = 0.0;    // max_i min(y+_i, y-_i)
  double max_objective_mismatch = 0.0; // |reported objective - oracle value at w|
  double seconds = 0.0;
};

LpSoundness lp_soundness(std::size_t instances, std::uint64_t seed, double step = 0.01);

struct TaylorFidelity {
  std::vector<double> etas;
  std::vector<std::vector<double>> errors;  // [fixture][eta] |approx - exact|
  std::vector<double> median_ratio;         // per consecutive halving
  double seconds = 0.0;
};

// Raw (unnormalized) gradients and alpha = eta, so the affine form is the
// first-order expansion of the loss after one head-only step.
TaylorFidelity taylor_fidelity(std::size_t fixtures, std::uint64_t seed,
                               std::vector<double> etas = {1e-2, 5e-3, 2.5e-3, 1.25e-3});

struct ForgettingInequality {
  std::size_t instances = 0;
  std::size_t holds = 0;
  std::size_t rejected_candidates = 0;
  double min_margin = 0.0;  // min |l~1 - l~2| - |l1 - l2|
  double seconds = 0.0;
};

// Instances with l(G1) < l(G2), <grad G1, grad d> > 0 and <grad G2, grad d> < 0
// for a single current-task sample d at weight 1.
ForgettingInequality forgetting_inequality(std::size_t instances, std::uint64_t seed, double alpha = 0.01);

struct GradientCheck {
  std::size_t fixtures = 0;
  std::size_t passed = 0;
  double max_relative_error = 0.0;  // max-norm error over max-norm of the reference
  double seconds = 0.0;
};

GradientCheck gradient_check(std::size_t fixtures, std::uint64_t seed, double step = 1e-4,
                             double tolerance = 1e-4);

struct MetricExamples {
  double eer_two_classes = 0.0;  // error rates 0.1 and 0.3
  double a1 = 0.0, a2 = 0.0, a_bar = 0.0;
  double perfect_eer = 0.0, perfect_eo = 0.0, perfect_dp = 0.0;
};

MetricExamples metric_examples();

}  // namespace fcil::verify
