#include <cmath>

#include "dro/broo.hpp"

namespace dro {

namespace {

void project_feasible_x(Vec& x, const BallContext& ctx) {
    const Domain& dom = ctx.ens->domain();
    if (dist(x, dom.center) <= dom.radius) {
        project_ball(x, ctx.center, ctx.radius);
        return;
    }
    project_ball_intersection(x, ctx.center, ctx.radius, dom.center, dom.radius);
}

double clamp_y(double y, const BallContext& ctx) {
    return std::clamp(y, ctx.y_bar - ctx.radius, ctx.y_bar + ctx.radius);
}

// Metered exact dual minimization at x (its own full value pass).
double recompute_y(std::span<const double> x, const BallContext& ctx) {
    Vec l(ctx.ens->n());
    for (std::size_t i = 0; i < l.size(); ++i) l[i] = ctx.ens->eval_loss(i, x);
    return ctx.conj->solve_y_star(l, ctx.ens->lipschitz_G(), ctx.y_tol);
}

}  // namespace

BrooResult dual_epoch_sgd_broo(const BrooRequest& req, const LossEnsemble& ens,
                               const RegularizedConjugate& conj, double eps_prime, Rng& rng,
                               const BrooOptions& opts) {
    const double G = ens.lipschitz_G();
    req.validate(G, opts.lambda_cap_factor);
    if (req.accuracy >= req.radius / 2.0)
        throw std::invalid_argument("dual_epoch_sgd_broo: requires accuracy < r/2");
    const EvalCounts start = ens.counts();

    BallContext ctx = make_dual_ball_context(ens, conj, req.center, req.lambda, eps_prime);
    const SamplingDistribution pbar = build_pbar_dual(ctx);

    const double lambda = req.lambda, delta = req.accuracy;
    const double T = opts.budget_multiplier * G * G / (lambda * lambda * delta * delta);
    const int epochs = std::max(1, static_cast<int>(std::ceil(std::log2(T / 128.0 + 1.0))));
    const double t_threshold = std::pow(G, 4) / (lambda * lambda * eps_prime * eps_prime);

    BrooResult res;
    Vec x = req.center;
    double y = ctx.y_bar;
    Vec xavg(x.size()), gx;
    double gamma = 1.0 / (16.0 * lambda);
    std::int64_t tk = 128;
    for (int k = 1; k <= epochs; ++k) {
        std::fill(xavg.begin(), xavg.end(), 0.0);
        double yavg = 0.0;
        for (std::int64_t t = 0; t < tk; ++t) {
            const double gy = dual_grad_estimate_into(x, y, ctx, pbar, rng, gx);
            // Composite step: the (lambda/2)|x - center|^2 term enters the prox.
            const double denom = 1.0 + gamma * lambda;
            for (std::size_t j = 0; j < x.size(); ++j)
                x[j] = (x[j] + gamma * lambda * ctx.center[j] - gamma * gx[j]) / denom;
            project_feasible_x(x, ctx);
            y = clamp_y(y - gamma * gy, ctx);
            axpy(1.0, x, xavg);
            yavg += y;
            ++res.inner_iterations;
        }
        scale(xavg, 1.0 / static_cast<double>(tk));
        x = xavg;
        y = yavg / static_cast<double>(tk);
        if (static_cast<double>(tk) >= t_threshold)
            y = clamp_y(recompute_y(x, ctx), ctx);
        tk *= 2;
        gamma *= 0.5;
    }
    res.x = std::move(x);
    res.y = y;
    res.consumed = ens.counts() - start;
    return res;
}

DualIterate accelerated_vr_inner(const DualIterate& z0, std::int64_t budget,
                                 const BallContext& ctx, const SamplingDistribution& pbar,
                                 Rng& rng, const BrooOptions& opts) {
    const LossEnsemble& ens = *ctx.ens;
    const double G = ens.lipschitz_G();
    const double L = ens.smoothness_L();
    const double lambda = ctx.lambda;
    const double eta = 1.0 / (4.0 * (L + lambda + 2.0 * G * G / ctx.eps_prime));
    const std::size_t d = z0.x.size();
    const std::int64_t n = static_cast<std::int64_t>(ens.n());

    if (budget < n) {
        // Degenerate budget: one full-gradient step, keep the better iterate
        // by exact comparison.
        DualSvrgReference ref = make_dual_svrg_reference(z0.x, z0.y, ctx, pbar);
        Vec g = ref.full_grad;
        DualIterate z1 = z0;
        for (std::size_t k = 0; k < d; ++k) z1.x[k] -= eta * g[k];
        project_feasible_x(z1.x, ctx);
        z1.y = clamp_y(z0.y - eta * g[d], ctx);
        const double v0 = exact_upsilon_value_unmetered(z0.x, z0.y, ctx);
        // Metered comparison passes for both candidates.
        Vec l0(ens.n()), l1(ens.n());
        for (std::size_t i = 0; i < ens.n(); ++i) l0[i] = ens.eval_loss(i, z0.x);
        for (std::size_t i = 0; i < ens.n(); ++i) l1[i] = ens.eval_loss(i, z1.x);
        const double f0 = ctx.conj->upsilon_value(l0, G, z0.y,
                                                  0.5 * lambda * dist2(z0.x, ctx.center));
        const double f1 = ctx.conj->upsilon_value(l1, G, z1.y,
                                                  0.5 * lambda * dist2(z1.x, ctx.center));
        (void)v0;
        return f1 <= f0 ? z1 : z0;
    }

    const std::int64_t n_epochs = std::max<std::int64_t>(1, budget / n);
    const double q = std::min(1.0, lambda * eta * static_cast<double>(n));
    const double beta =
        opts.vr_momentum ? std::max(0.0, (1.0 - std::sqrt(q)) / (1.0 + std::sqrt(q))) : 0.0;

    DualIterate ref_pt = z0;
    DualIterate wbar_prev = z0;
    DualIterate wbar;
    wbar.x.assign(d, 0.0);
    for (std::int64_t s = 0; s < n_epochs; ++s) {
        DualSvrgReference ref = make_dual_svrg_reference(ref_pt.x, ref_pt.y, ctx, pbar);
        DualIterate w = ref_pt;
        std::fill(wbar.x.begin(), wbar.x.end(), 0.0);
        wbar.y = 0.0;
        Vec g, scratch;
        for (std::int64_t t = 0; t < n; ++t) {
            const std::size_t i = pbar.sample(rng);
            dual_svrg_estimate_into(w.x, w.y, ref, i, ctx, pbar, g, scratch);
            for (std::size_t k = 0; k < d; ++k) w.x[k] -= eta * g[k];
            project_feasible_x(w.x, ctx);
            w.y = clamp_y(w.y - eta * g[d], ctx);
            axpy(1.0, w.x, wbar.x);
            wbar.y += w.y;
        }
        scale(wbar.x, 1.0 / static_cast<double>(n));
        wbar.y /= static_cast<double>(n);
        if (s + 1 < n_epochs && beta > 0.0) {
            ref_pt.x = wbar.x;
            axpy(beta, wbar.x, ref_pt.x);
            axpy(-beta, wbar_prev.x, ref_pt.x);
            project_feasible_x(ref_pt.x, ctx);
            ref_pt.y = clamp_y(wbar.y + beta * (wbar.y - wbar_prev.y), ctx);
        } else {
            ref_pt = wbar;
        }
        wbar_prev = wbar;
    }
    return wbar;
}

BrooResult restarted_vr_broo(const BrooRequest& req, const LossEnsemble& ens,
                             const RegularizedConjugate& conj, double eps_prime, Rng& rng,
                             const BrooOptions& opts) {
    const double G = ens.lipschitz_G();
    const double L = ens.smoothness_L();
    if (!std::isfinite(L))
        throw std::invalid_argument("restarted_vr_broo requires L-smooth losses");
    req.validate(G, opts.lambda_cap_factor);
    const EvalCounts start = ens.counts();

    BallContext ctx = make_dual_ball_context(ens, conj, req.center, req.lambda, eps_prime);
    const SamplingDistribution pbar = build_pbar_dual(ctx);

    const double lambda = req.lambda, delta = req.accuracy;
    // Upsilon gap at the center is at most O(G) * r; halve until lambda delta^2 / 2.
    const double gap0 = G * ctx.radius;
    const double ratio = gap0 / (0.5 * lambda * delta * delta);
    const int restarts =
        ratio <= 1.0 ? 0 : std::min(62, static_cast<int>(std::ceil(std::log2(ratio))));

    BrooResult res;
    DualIterate z{req.center, ctx.y_bar};
    if (restarts == 0) {
        res.x = std::move(z.x);
        res.y = z.y;
        res.consumed = ens.counts() - start;
        return res;
    }

    const double n = static_cast<double>(ens.n());
    const double ltil = L + G * G / eps_prime;
    const std::int64_t budget = static_cast<std::int64_t>(std::ceil(
        2.0 * opts.vr_budget_multiplier * (n + std::sqrt(n * ltil / lambda))));

    for (int k = 0; k < restarts; ++k) {
        z = accelerated_vr_inner(z, budget, ctx, pbar, rng, opts);
        z.y = clamp_y(recompute_y(z.x, ctx), ctx);
        res.inner_iterations += budget;
    }
    res.x = std::move(z.x);
    res.y = z.y;
    res.consumed = ens.counts() - start;
    return res;
}

}  // namespace dro
