#pragma once

#include "dro/solvers.hpp"

namespace dro {

struct OneDimStats {
    std::int64_t oracle_calls = 0;
};

// Noisy golden-section minimization of a convex B-Lipschitz h on [lo, hi]
// through an oracle G with |G(y) - h(y)| <= tilde_eps: returns y' with
// h(y') - min h <= 4 tilde_eps. A third of the interval is discarded only
// when the comparison margin exceeds 2 tilde_eps.
double one_dim_minimizer(const std::function<double(double)>& oracle, double lo, double hi,
                         double tilde_eps, double lipschitz_B, OneDimStats* stats = nullptr);

struct ConstrainedResult {
    Vec x;
    double nu = 0.0;
    double accepted_value = 0.0;     // G(nu) at the accepted multiplier
    std::int64_t inner_solves = 0;   // regularized-solver invocations
    std::int64_t oracle_queries = 0; // bisection oracle calls
};

struct ConstrainedOptions {
    SolveOptions solve;
    Method inner_method = Method::ball_accel_epochsgd;
    double rep_constant = 16.0;  // replication: ceil(log2(rep_constant * log2(H)))
};

// Lagrange-multiplier reduction of the constrained f-divergence problem to
// regularized solves: each oracle query runs `rep` replicated inner solves at
// accuracy eps/5 and keeps the smallest exact objective value, then a noisy
// one-dimensional search over nu on [0, B_l] locates the multiplier.
ConstrainedResult solve_constrained_fdiv(const ProblemSpec& problem, double eps, Rng& rng,
                                         const ConstrainedOptions& opts = {});

}  // namespace dro
