#pragma once

#include <optional>

#include "dro/problem.hpp"
#include "dro/rng.hpp"
#include "dro/vec.hpp"

namespace dro {

// Randomized level index for multilevel telescoping. success_prob is the
// geometric success parameter: P(J = j) = (1-p_c)^j ... with p_c the
// complement; for the multilevel estimator p = 1 - 1/sqrt(8), support j >= 0.
struct GeometricLevelSampler {
    double success_prob = 1.0 - 1.0 / std::sqrt(8.0);
    std::optional<int> truncation;

    int sample(Rng& rng) const {
        int j = rng.geometric_failures(success_prob);
        if (truncation && j > *truncation) j = *truncation;
        return j;
    }
    // P(J = j) for the untruncated sampler.
    double pmf(int j) const {
        return std::pow(1.0 - success_prob, j) * success_prob;
    }
};

// Discrete sampling distribution with a prefix-sum index.
class SamplingDistribution {
public:
    SamplingDistribution() = default;
    explicit SamplingDistribution(Vec probs);

    std::size_t size() const { return probs_.size(); }
    const Vec& probs() const { return probs_; }
    double prob(std::size_t i) const { return probs_[i]; }
    std::size_t sample(Rng& rng) const;

private:
    Vec probs_;
    Vec cdf_;
};

// Shared per-query state for in-ball estimators: the center, radius
// r_eps = eps'/G, regularization lambda, cached losses at the center and
// (dual case) the optimal dual variable at the center.
struct BallContext {
    const LossEnsemble* ens = nullptr;
    const GroupWeights* groups = nullptr;        // group flavor
    const RegularizedConjugate* conj = nullptr;  // dual flavor

    Vec center;
    double radius = 0.0;
    double eps_prime = 0.0;
    double lambda = 0.0;

    Vec center_group_losses;  // L_i(center), group flavor
    Vec center_loss_values;   // l_j(center), both flavors
    double y_bar = 0.0;       // dual flavor
    double y_tol = 0.0;       // dual flavor

    bool in_ball(std::span<const double> x, double slack = 1e-9) const {
        const double cap = radius * (1.0 + slack) + slack;
        return dist2(x, center) <= cap * cap;
    }
};

// Full metered pass: caches L_i(center) and every touched l_j(center).
BallContext make_group_ball_context(const LossEnsemble& ens, const GroupWeights& groups,
                                    std::span<const double> center, double lambda,
                                    double eps_prime);

// Full metered passes: one for solve_y_star (N values) and the context cache.
BallContext make_dual_ball_context(const LossEnsemble& ens, const RegularizedConjugate& conj,
                                   std::span<const double> center, double lambda,
                                   double eps_prime);

// ---- sampling distributions at the center ----

// p_i ∝ exp(L_i(center)/eps'); metered full pass over the group rows.
SamplingDistribution build_pbar_group(const BallContext& ctx);

// p_i = psi_eps*'(l_i(center) - G y_bar); metered full pass; errors if the
// mass deviates from 1 by more than 10x the y tolerance.
SamplingDistribution build_pbar_dual(const BallContext& ctx);

// Unmetered variant used at variance-reduction reference points.
SamplingDistribution pbar_group_from_values(std::span<const double> group_losses,
                                            double eps_prime);

// ---- group estimators ----

// Unbiased multilevel estimate of
//   gamma_i(x, x_ref) = eps' exp((L_i(x) - L_i(x_ref) + (lambda/2)|x-center|^2)/eps').
// ref_values: per-loss values at x_ref (defaults to the context's center cache).
// Counts one value evaluation per drawn sample.
double mlmc_gamma(std::span<const double> x, std::span<const double> x_ref,
                  std::size_t group_i, const BallContext& ctx, Rng& rng,
                  std::span<const double> ref_values = {}, std::int64_t* samples_out = nullptr);

// Unbiased estimate of grad Gamma_{eps,lambda}(x); draws i ~ pbar, j ~ w_i.
Vec group_grad_estimate(std::span<const double> x, const BallContext& ctx,
                        const SamplingDistribution& pbar, Rng& rng);
void group_grad_estimate_into(std::span<const double> x, const BallContext& ctx,
                              const SamplingDistribution& pbar, Rng& rng, Vec& out,
                              Vec& scratch);

// Reference-point bundle for the reduced-variance group estimator.
struct GroupSvrgReference {
    Vec x_ref;
    Vec full_grad;          // exact grad Gamma_{eps,lambda}(x_ref)
    Vec gammas;             // gamma_i(x_ref, x_ref) per group (all equal)
    Vec loss_values;        // l_j(x_ref)
    std::vector<Vec> loss_subgrads;
    SamplingDistribution sampler;  // p_i(x_ref)
    double pi_factor = 1.0;        // sum e^{L(x_ref)/eps'} / sum e^{L(center)/eps'}
};

// Metered full pass building the reference bundle at x_ref.
GroupSvrgReference make_group_svrg_reference(std::span<const double> x_ref,
                                             const BallContext& ctx);

// Reduced-variance estimator with correction factor pi(x_ref).
Vec group_svrg_estimate(std::span<const double> x, const GroupSvrgReference& ref,
                        const BallContext& ctx, Rng& rng);
void group_svrg_estimate_into(std::span<const double> x, const GroupSvrgReference& ref,
                              const BallContext& ctx, Rng& rng, Vec& out, Vec& scratch);

// Exact grad Gamma_{eps,lambda}(x), metered full pass.
Vec exact_group_gamma_grad(std::span<const double> x, const BallContext& ctx);

// Exact Gamma_{eps,lambda}(x) value, unmetered (diagnostics/tests).
double exact_group_gamma_value_unmetered(std::span<const double> x, const BallContext& ctx);

// ---- dual (f-divergence) estimators ----

struct ContractViolation : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Importance-weighted dual gradient estimate at (x, y); unbiased for
// (grad_x Upsilon_eps, grad_y Upsilon_eps). Errors if the importance ratio
// exceeds e^2 beyond tolerance.
std::pair<Vec, double> dual_grad_estimate(std::span<const double> x, double y,
                                          const BallContext& ctx,
                                          const SamplingDistribution& pbar, Rng& rng);
double dual_grad_estimate_into(std::span<const double> x, double y, const BallContext& ctx,
                               const SamplingDistribution& pbar, Rng& rng, Vec& gx);

struct DualSvrgReference {
    Vec x_ref;
    double y_ref = 0.0;
    Vec full_grad;  // dim+1: grad of Upsilon_{eps,lambda} wrt (x, y) at the reference
    Vec loss_values;
    std::vector<Vec> loss_subgrads;
};

DualSvrgReference make_dual_svrg_reference(std::span<const double> x_ref, double y_ref,
                                           const BallContext& ctx,
                                           const SamplingDistribution& pbar);

// SVRG estimate of grad Upsilon_{eps,lambda}(x, y) as a joint (dim+1) vector;
// index i is drawn ~ pbar by the caller.
Vec dual_svrg_estimate(std::span<const double> x, double y, const DualSvrgReference& ref,
                       std::size_t i, const BallContext& ctx,
                       const SamplingDistribution& pbar);
void dual_svrg_estimate_into(std::span<const double> x, double y,
                             const DualSvrgReference& ref, std::size_t i,
                             const BallContext& ctx, const SamplingDistribution& pbar,
                             Vec& out, Vec& scratch);

// Exact joint gradient of Upsilon_{eps,lambda} at (x, y); metered full pass.
Vec exact_upsilon_grad(std::span<const double> x, double y, const BallContext& ctx,
                       const SamplingDistribution& pbar);

// Exact Upsilon_{eps,lambda}(x,y), unmetered.
double exact_upsilon_value_unmetered(std::span<const double> x, double y,
                                     const BallContext& ctx);

}  // namespace dro
