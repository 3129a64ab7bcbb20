#include <cmath>

#include "dro/broo.hpp"

namespace dro {

namespace {

// Projection onto B_r(center) ∩ X. When x is still inside X, projecting onto
// the oracle ball stays inside X (the segment to the in-domain center does),
// so the two-ball formula is only needed from outside the domain.
void project_feasible(Vec& x, const BallContext& ctx) {
    const Domain& dom = ctx.ens->domain();
    if (dist(x, dom.center) <= dom.radius) {
        project_ball(x, ctx.center, ctx.radius);
        return;
    }
    project_ball_intersection(x, ctx.center, ctx.radius, dom.center, dom.radius);
}

// Contract slack dominates the ball diameter: any feasible point answers the
// query, so return the center without spending the budget.
bool degenerate_accuracy(const BrooRequest& req, double G) {
    return 0.5 * req.lambda * req.accuracy * req.accuracy >=
           G * req.radius + 0.5 * req.lambda * req.radius * req.radius;
}

}  // namespace

BrooResult epoch_sgd_broo(const BrooRequest& req, const LossEnsemble& ens,
                          const GroupWeights& groups, double eps_prime, Rng& rng,
                          const BrooOptions& opts) {
    const double G = ens.lipschitz_G();
    req.validate(G, opts.lambda_cap_factor);
    const EvalCounts start = ens.counts();
    BrooResult res;
    res.x = req.center;

    if (degenerate_accuracy(req, G)) {
        res.consumed = ens.counts() - start;
        return res;
    }

    BallContext ctx = make_group_ball_context(ens, groups, req.center, req.lambda, eps_prime);
    const SamplingDistribution pbar = build_pbar_group(ctx);

    const double lambda = req.lambda, delta = req.accuracy;
    const double T = opts.budget_multiplier * G * G / (lambda * lambda * delta * delta);
    const int epochs = std::max(1, static_cast<int>(std::ceil(std::log2(T / 128.0 + 1.0))));

    Vec x = req.center;
    Vec avg(x.size(), 0.0), g, scratch;
    double gamma = 1.0 / (16.0 * lambda);
    std::int64_t tk = 128;
    for (int k = 1; k <= epochs; ++k) {
        std::fill(avg.begin(), avg.end(), 0.0);
        for (std::int64_t t = 0; t < tk; ++t) {
            group_grad_estimate_into(x, ctx, pbar, rng, g, scratch);
            axpy(-gamma, g, x);
            project_feasible(x, ctx);
            axpy(1.0, x, avg);
            ++res.inner_iterations;
        }
        scale(avg, 1.0 / static_cast<double>(tk));
        x = avg;
        tk *= 2;
        gamma *= 0.5;
    }
    res.x = std::move(x);
    res.consumed = ens.counts() - start;
    return res;
}

BrooResult katyusha_broo(const BrooRequest& req, const LossEnsemble& ens,
                         const GroupWeights& groups, double eps_prime, Rng& rng,
                         const BrooOptions& opts) {
    const double G = ens.lipschitz_G();
    const double L = ens.smoothness_L();
    if (!std::isfinite(L))
        throw std::invalid_argument(
            "katyusha_broo requires finite mean-square smoothness; use epoch_sgd_broo");
    req.validate(G, opts.lambda_cap_factor);
    const EvalCounts start = ens.counts();

    BallContext ctx = make_group_ball_context(ens, groups, req.center, req.lambda, eps_prime);
    const double lambda = req.lambda, delta = req.accuracy;
    const double n = static_cast<double>(ens.n());
    const double ltil = L + lambda + G * G / eps_prime;
    const double eta = 1.0 / (4.0 * (L + lambda + 2.0 * G * G / eps_prime));

    // Total step budget: restart log-factor times the accelerated per-restart cost.
    const double log_factor =
        std::max(1.0, std::log2(std::max(2.0, 2.0 * G * ctx.radius / (lambda * delta * delta))));
    const std::int64_t budget = static_cast<std::int64_t>(
        std::ceil(2.0 * opts.vr_budget_multiplier *
                  (n + std::pow(n, 0.75) * std::sqrt(ltil / lambda)) * log_factor));

    const std::int64_t m = static_cast<std::int64_t>(ens.n());
    const std::int64_t n_epochs = std::max<std::int64_t>(1, (budget + m - 1) / m);
    const double q = std::min(1.0, lambda * eta * static_cast<double>(m));
    const double beta =
        opts.vr_momentum ? std::max(0.0, (1.0 - std::sqrt(q)) / (1.0 + std::sqrt(q))) : 0.0;

    BrooResult res;
    Vec ref_point = req.center;
    Vec wbar_prev = req.center;
    Vec wbar(req.center.size());
    for (std::int64_t s = 0; s < n_epochs; ++s) {
        GroupSvrgReference ref = make_group_svrg_reference(ref_point, ctx);
        Vec w = ref_point, g, scratch;
        std::fill(wbar.begin(), wbar.end(), 0.0);
        for (std::int64_t t = 0; t < m; ++t) {
            group_svrg_estimate_into(w, ref, ctx, rng, g, scratch);
            axpy(-eta, g, w);
            project_feasible(w, ctx);
            axpy(1.0, w, wbar);
            ++res.inner_iterations;
        }
        scale(wbar, 1.0 / static_cast<double>(m));
        if (s + 1 < n_epochs && beta > 0.0) {
            ref_point = wbar;
            axpy(beta, wbar, ref_point);
            axpy(-beta, wbar_prev, ref_point);
            project_feasible(ref_point, ctx);
        } else {
            ref_point = wbar;
        }
        wbar_prev = wbar;
    }
    res.x = wbar;
    res.consumed = ens.counts() - start;
    return res;
}

}  // namespace dro
