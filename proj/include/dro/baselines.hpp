#pragma once

#include "dro/problem.hpp"
#include "dro/trace.hpp"

namespace dro {

struct BaselineOptions {
    std::int64_t trace_every = 0;  // 0: automatic (~64 checkpoints)
    const double* reference_optimum = nullptr;  // gap column baseline when set
    double c_eta = 1.0;  // primal-dual step-size constant
};

// Projected subgradient on the raw DRO objective with step R/(G sqrt(t));
// each step is a full metered pass; the averaged iterate is reported.
SolverTrace subgradient_solve(const ProblemSpec& problem, std::int64_t T, Rng& rng,
                              const BaselineOptions& opts = {});
Vec subgradient_solve_point(const ProblemSpec& problem, std::int64_t T, Rng& rng,
                            SolverTrace* trace = nullptr, const BaselineOptions& opts = {});

// Primal-dual stochastic mirror descent with local norms and clipping;
// Euclidean steps on x, entropic steps on the simplex variable. Requires
// bounded losses. Supports the group uncertainty set and the chi-squared
// ball (shrink-toward-uniform Bregman fallback).
struct PrimalDualResult {
    Vec x;
    Vec q;
    SolverTrace trace;
};
PrimalDualResult primal_dual_smd(const ProblemSpec& problem, std::int64_t T, double eta,
                                 Rng& rng, const BaselineOptions& opts = {});
double primal_dual_default_eta(const ProblemSpec& problem, double eps, double c_eta = 1.0);

// Nesterov accelerated gradient descent on the entropy-smoothed objective;
// each iteration is one full value pass plus one full subgradient pass.
struct AgdResult {
    Vec x;
    SolverTrace trace;
};
AgdResult agd_softmax(const ProblemSpec& problem, double eps, std::int64_t T,
                      const BaselineOptions& opts = {});

}  // namespace dro
