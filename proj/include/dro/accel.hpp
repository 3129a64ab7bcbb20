#pragma once

#include "dro/broo.hpp"
#include "dro/trace.hpp"

namespace dro {

// Approximation/stopping parameters of the accelerated proximal point loop.
// Derived from (G, R, r, eps); the c_* knobs are config-exposed.
struct AccelParams {
    double r = 0.0;
    double eps = 0.0;
    double G = 1.0;
    double R = 1.0;
    double c_m = 1.0;
    double c_lambda = 3.0;
    double c_K = 4.0;
    double bisect_lambda_hi_factor = 4.0;  // upper bisection endpoint, c * G / r
    int bisect_retry_budget = 1;

    int m_eps = 1;
    double log_term = 1.0;  // log(G R^2 / (eps r)), floored at 1
    double lambda_m = 0.0;
    double beta = 0.0;   // bias target eps / (120 R)
    double a0 = 0.0;     // A_0 = R / G
    double a_max = 0.0;  // 9 R^2 / eps
    std::int64_t k_max = 1;

    static AccelParams derive(double G, double R, double r, double eps, double c_m = 1.0,
                              double c_lambda = 3.0, double c_K = 4.0);

    double phi(double lambda) const { return lambda * r * r / (900.0 * std::pow(log_term, 3)); }
    double sigma2(double lambda) const {
        return lambda * lambda * r * r / (900.0 * std::pow(log_term, 3));
    }
};

struct OuterDiagnostics {
    std::int64_t iterations = 0;       // outer proximal queries (one per ball center y_k)
    std::int64_t broo_calls = 0;       // every ball-oracle request issued anywhere
    std::int64_t morgrad_calls = 0;    // ball-oracle requests from the gradient estimator
    std::int64_t bisect_probes = 0;    // high-probability probes in the lambda search
    std::int64_t hp_replicas = 0;      // raw replicas behind the probes
    std::int64_t bisect_warnings = 0;  // interval collapses resolved at lambda_m
    double final_A = 0.0;
    bool hit_a_max = false;
};

struct OuterResult {
    Vec x;
    OuterDiagnostics diag;
    SolverTrace trace;
};

struct MorGradResult {
    Vec grad;
    Vec prox_point;  // the delta_0-accurate oracle output, reusable as x_{k+1}
    std::int64_t broo_calls = 0;
};

// Multilevel-debiased Moreau envelope gradient: three oracle calls at
// geometrically refined accuracies; bias <= beta_target, variance <= sigma2.
MorGradResult mor_grad_est(const BrooFn& broo, const Vec& y, double lambda,
                           double beta_target, double sigma2, double G, Rng& rng);

// Best-of-replicas oracle: ceil(log2(1/p)) runs at accuracy delta/sqrt(2),
// winner by exact regularized objective (metered via f_exact).
BrooResult high_prob_broo(const BrooFn& broo,
                          const std::function<double(const Vec&)>& f_exact,
                          const Vec& center, double lambda, double delta, double p, Rng& rng,
                          std::int64_t* replicas_out = nullptr);

struct LambdaBisectionResult {
    double lambda = 0.0;
    std::int64_t probes = 0;
    std::int64_t replicas = 0;
    bool collapsed = false;
};

// Distance-classified geometric bisection for the regularization strength.
// Each probe evaluates the high-probability oracle at the lambda-dependent
// query point y(lambda) built from (x, v, A); accept when the observed prox
// distance falls in [(3/4) r, (7/8) r], return lambda_m when the distance is
// already small there (the lambda < 2 lambda_m case). warm_start seeds the
// first probe.
LambdaBisectionResult lambda_bisection(const BrooFn& broo,
                                       const std::function<double(const Vec&)>& f_exact,
                                       const Vec& x, const Vec& v, double A,
                                       const AccelParams& params, double hp_failure_p,
                                       Rng& rng, double warm_start = 0.0);

// Everything the outer loop needs about the objective family.
struct RegularizedDriver {
    BrooFn broo;
    std::function<double(const Vec&)> f_exact;            // metered, for replica selection
    std::function<double(const Vec&)> f_exact_unmetered;  // measurement only
    double G = 1.0;
    double R = 1.0;
    Domain domain;
    const OracleCounter* counter = nullptr;
};

// Stochastic accelerated proximal point method over ball oracles. Returns a
// point with F(x) - min F <= eps with constant probability.
OuterResult outer_solve(const RegularizedDriver& driver, const AccelParams& params, Rng& rng,
                        const std::function<double(const Vec&)>* gap_probe = nullptr);

}  // namespace dro
