#pragma once

#include <functional>
#include <optional>

#include "dro/estimators.hpp"

namespace dro {

// Ball-regularized oracle query: approximately minimize
// F(x) + (lambda/2)|x - center|^2 over B_radius(center) ∩ X to expected
// excess at most (lambda/2) accuracy^2.
struct BrooRequest {
    Vec center;
    double radius = 0.0;
    double lambda = 0.0;
    double accuracy = 0.0;

    void validate(double G, double lambda_cap_factor) const {
        if (lambda <= 0.0) throw std::invalid_argument("broo: lambda must be > 0");
        if (accuracy <= 0.0) throw std::invalid_argument("broo: accuracy must be > 0");
        if (radius <= 0.0) throw std::invalid_argument("broo: radius must be > 0");
        if (lambda > lambda_cap_factor * G / radius)
            throw std::invalid_argument("broo: lambda exceeds the configured G/r cap");
    }
};

struct BrooResult {
    Vec x;
    std::optional<double> y;  // dual-variable companion (f-divergence oracles)
    std::int64_t inner_iterations = 0;
    EvalCounts consumed;
};

// Type-erased oracle handle consumed by the outer acceleration.
struct BrooFn {
    double radius = 0.0;
    std::function<BrooResult(const Vec& center, double lambda, double delta, Rng& rng)> call;
};

struct BrooOptions {
    double budget_multiplier = 4.0;    // T = mult * G^2 / (lambda delta)^2
    double lambda_cap_factor = 64.0;   // request validation: lambda <= cap * G/r
    double vr_budget_multiplier = 4.0; // C in the accelerated VR budget
    bool vr_momentum = true;           // negative-momentum mixing on epoch outputs
};

// Epoch-doubling projected SGD on the exponentiated group softmax.
BrooResult epoch_sgd_broo(const BrooRequest& req, const LossEnsemble& ens,
                          const GroupWeights& groups, double eps_prime, Rng& rng,
                          const BrooOptions& opts = {});

// Accelerated variance reduction (momentum-wrapped SVRG) under mean-square
// smoothness; refuses when the ensemble carries no finite L.
BrooResult katyusha_broo(const BrooRequest& req, const LossEnsemble& ens,
                         const GroupWeights& groups, double eps_prime, Rng& rng,
                         const BrooOptions& opts = {});

// Dual epoch SGD for the entropy-regularized f-divergence objective.
BrooResult dual_epoch_sgd_broo(const BrooRequest& req, const LossEnsemble& ens,
                               const RegularizedConjugate& conj, double eps_prime, Rng& rng,
                               const BrooOptions& opts = {});

// Restarted accelerated variance reduction with exact dual minimization
// between restarts; requires finite smoothness.
BrooResult restarted_vr_broo(const BrooRequest& req, const LossEnsemble& ens,
                             const RegularizedConjugate& conj, double eps_prime, Rng& rng,
                             const BrooOptions& opts = {});

// Inner accelerated VR pass over the weighted finite sum sum_i pbar_i v_i;
// budget T counts stochastic steps. Exposed for tests.
struct DualIterate {
    Vec x;
    double y = 0.0;
};
DualIterate accelerated_vr_inner(const DualIterate& z0, std::int64_t budget,
                                 const BallContext& ctx, const SamplingDistribution& pbar,
                                 Rng& rng, const BrooOptions& opts = {});

}  // namespace dro
