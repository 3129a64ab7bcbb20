#pragma once

#include "dro/accel.hpp"
#include "dro/baselines.hpp"

namespace dro {

enum class Method {
    ball_accel_epochsgd,
    ball_accel_vr,
    subgradient,
    primal_dual,
    agd_softmax,
};

Method parse_method(const std::string& name);
std::string method_name(Method m);

struct SolveOptions {
    double c_m = 1.0;
    double c_lambda = 3.0;
    double c_K = 4.0;
    double bisect_lambda_hi_factor = 4.0;
    BrooOptions broo;
    std::int64_t baseline_T = 0;  // 0: derived from eps
    double c_eta = 1.0;
    const double* reference_optimum = nullptr;
};

struct SolveResult {
    Vec x;
    SolverTrace trace;
    OuterDiagnostics diag;  // ball-accel methods only
    EvalCounts consumed;
};

// Shared smoothing context for a regularized solve at accuracy eps.
struct SmoothedObjective {
    double eps = 0.0;
    double eps_prime = 0.0;
    double r_eps = 0.0;
    RegularizedConjugate conj;  // f-divergence problems
};

SmoothedObjective make_smoothed(const ProblemSpec& problem, double eps);

// Ball oracle + exact evaluators for the smoothed objective of `problem`.
RegularizedDriver make_driver(const ProblemSpec& problem, const SmoothedObjective& sm,
                              Method method, const SolveOptions& opts);

// End-to-end solve of the (unconstrained) problem at accuracy eps.
SolveResult solve(const ProblemSpec& problem, Method method, double eps, Rng& rng,
                  const SolveOptions& opts = {});

}  // namespace dro
