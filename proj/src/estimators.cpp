#include "dro/estimators.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace dro {

SamplingDistribution::SamplingDistribution(Vec probs) : probs_(std::move(probs)) {
    if (probs_.empty()) throw std::invalid_argument("empty sampling distribution");
    cdf_.resize(probs_.size());
    double s = 0.0;
    for (std::size_t i = 0; i < probs_.size(); ++i) {
        if (probs_[i] < 0.0) throw std::invalid_argument("negative probability");
        s += probs_[i];
        cdf_[i] = s;
    }
    if (std::abs(s - 1.0) > 1e-10)
        throw std::invalid_argument("sampling distribution does not sum to 1");
}

std::size_t SamplingDistribution::sample(Rng& rng) const {
    const double u = rng.uniform() * cdf_.back();
    const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    return std::min<std::size_t>(it - cdf_.begin(), probs_.size() - 1);
}

BallContext make_group_ball_context(const LossEnsemble& ens, const GroupWeights& groups,
                                    std::span<const double> center, double lambda,
                                    double eps_prime) {
    BallContext ctx;
    ctx.ens = &ens;
    ctx.groups = &groups;
    ctx.center.assign(center.begin(), center.end());
    ctx.eps_prime = eps_prime;
    ctx.radius = eps_prime / ens.lipschitz_G();
    ctx.lambda = lambda;
    ctx.center_group_losses.resize(groups.m());
    ctx.center_loss_values.assign(ens.n(), 0.0);
    std::vector<bool> seen(ens.n(), false);
    for (std::size_t i = 0; i < groups.m(); ++i) {
        double s = 0.0;
        for (const auto& [j, w] : groups.row(i)) {
            const double v = ens.eval_loss(j, center);
            s += w * v;
            ctx.center_loss_values[j] = v;
            seen[j] = true;
        }
        ctx.center_group_losses[i] = s;
    }
    // Losses outside every group support never enter the estimators; cache
    // them lazily only if touched (they are not, by construction).
    (void)seen;
    return ctx;
}

BallContext make_dual_ball_context(const LossEnsemble& ens, const RegularizedConjugate& conj,
                                   std::span<const double> center, double lambda,
                                   double eps_prime) {
    BallContext ctx;
    ctx.ens = &ens;
    ctx.conj = &conj;
    ctx.center.assign(center.begin(), center.end());
    ctx.eps_prime = eps_prime;
    ctx.radius = eps_prime / ens.lipschitz_G();
    ctx.lambda = lambda;
    ctx.center_loss_values.resize(ens.n());
    for (std::size_t i = 0; i < ens.n(); ++i)
        ctx.center_loss_values[i] = ens.eval_loss(i, center);
    ctx.y_tol = conj.default_y_tol(ctx.center_loss_values);
    ctx.y_bar = conj.solve_y_star(ctx.center_loss_values, ens.lipschitz_G(), ctx.y_tol);
    return ctx;
}

SamplingDistribution pbar_group_from_values(std::span<const double> group_losses,
                                            double eps_prime) {
    Vec scaled(group_losses.size());
    for (std::size_t i = 0; i < group_losses.size(); ++i)
        scaled[i] = group_losses[i] / eps_prime;
    const double lse = log_sum_exp(scaled);
    Vec p(group_losses.size());
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = std::exp(scaled[i] - lse);
    return SamplingDistribution(std::move(p));
}

SamplingDistribution build_pbar_group(const BallContext& ctx) {
    // Its own metered pass; the context cache is not reused for counting.
    Vec gl(ctx.groups->m());
    for (std::size_t i = 0; i < ctx.groups->m(); ++i)
        gl[i] = group_loss_exact(*ctx.ens, *ctx.groups, i, ctx.center);
    return pbar_group_from_values(gl, ctx.eps_prime);
}

SamplingDistribution build_pbar_dual(const BallContext& ctx) {
    const double G = ctx.ens->lipschitz_G();
    Vec p(ctx.ens->n());
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double l = ctx.ens->eval_loss(i, ctx.center);
        p[i] = ctx.conj->conj_prime(l - G * ctx.y_bar);
        s += p[i];
    }
    if (std::abs(s - 1.0) > 10.0 * std::max(ctx.y_tol, 1e-12))
        throw std::runtime_error("build_pbar_dual: mass deviates from 1; inconsistent y solve");
    for (double& v : p) v /= s;
    return SamplingDistribution(std::move(p));
}

// ---- multilevel gamma estimator ----

namespace {
constexpr double kGeomComplement = 0.35355339059327373;  // 1/sqrt(8)

// Sample-mean exponent (l_S(x) - l_S(ref))/eps' accumulated per half.
struct HalfSums {
    double first = 0.0, second = 0.0;
};
}  // namespace

double mlmc_gamma(std::span<const double> x, std::span<const double> x_ref,
                  std::size_t group_i, const BallContext& ctx, Rng& rng,
                  std::span<const double> ref_values, std::int64_t* samples_out) {
    if (!ctx.in_ball(x))
        throw std::invalid_argument("mlmc_gamma: x outside the estimator ball");
    if (dist(x, x_ref) > 2.0 * ctx.radius * (1.0 + 1e-9) + 1e-12)
        throw std::invalid_argument("mlmc_gamma: |x - x_ref| exceeds 2r");
    if (group_i >= ctx.groups->m()) throw std::out_of_range("mlmc_gamma: group index");

    if (ref_values.empty()) ref_values = ctx.center_loss_values;
    const double ep = ctx.eps_prime;
    const double quad = 0.5 * ctx.lambda * dist2(x, ctx.center) / ep;
    const auto& row = ctx.groups->row(group_i);

    auto draw_exponent = [&](Rng& r) {
        const std::uint32_t j =
            row.size() == 1 ? row[0].first : ctx.groups->sample_member(group_i, r);
        return (ctx.ens->eval_loss(j, x) - ref_values[j]) / ep;
    };

    // Zero-variance collapse for singleton groups: every sample is identical,
    // so every correction difference vanishes identically.
    if (row.size() == 1) {
        if (samples_out) *samples_out += 1;
        return ep * std::exp(draw_exponent(rng) + quad);
    }

    const int J = rng.geometric_failures(1.0 - kGeomComplement);
    const double e1 = draw_exponent(rng);
    double est = ep * std::exp(e1 + quad);
    std::int64_t samples = 1;
    if (J >= 1) {
        const std::int64_t n = std::int64_t{1} << J;
        const std::int64_t half = n / 2;
        double s_first = e1;  // S_1 is shared between the base term and D-hat
        for (std::int64_t k = 1; k < half; ++k) s_first += draw_exponent(rng);
        double s_second = 0.0;
        for (std::int64_t k = 0; k < half; ++k) s_second += draw_exponent(rng);
        samples = n;
        const double m1 = s_first / static_cast<double>(half);
        const double m2 = s_second / static_cast<double>(half);
        const double mfull = 0.5 * (m1 + m2);
        const double dhat =
            ep * (std::exp(mfull + quad) - 0.5 * (std::exp(m1 + quad) + std::exp(m2 + quad)));
        static const std::array<double, 64> kLevelPmf = [] {
            std::array<double, 64> t{};
            double p = 1.0 - kGeomComplement;
            for (int j = 0; j < 64; ++j) {
                t[j] = p;
                p *= kGeomComplement;
            }
            return t;
        }();
        const double pj = J < 64 ? kLevelPmf[J] : std::pow(kGeomComplement, J) * (1.0 - kGeomComplement);
        est += dhat / pj;
    }
    if (samples_out) *samples_out += samples;
    return est;
}

void group_grad_estimate_into(std::span<const double> x, const BallContext& ctx,
                              const SamplingDistribution& pbar, Rng& rng, Vec& out,
                              Vec& scratch) {
    const std::size_t i = pbar.sample(rng);
    const std::uint32_t j = ctx.groups->sample_member(i, rng);
    const double gamma = mlmc_gamma(x, ctx.center, i, ctx, rng);
    ctx.ens->eval_subgrad_into(j, x, scratch);
    const double c = gamma / ctx.eps_prime;
    out.resize(x.size());
    for (std::size_t k = 0; k < x.size(); ++k)
        out[k] = c * (scratch[k] + ctx.lambda * (x[k] - ctx.center[k]));
}

Vec group_grad_estimate(std::span<const double> x, const BallContext& ctx,
                        const SamplingDistribution& pbar, Rng& rng) {
    Vec out, scratch;
    group_grad_estimate_into(x, ctx, pbar, rng, out, scratch);
    return out;
}

GroupSvrgReference make_group_svrg_reference(std::span<const double> x_ref,
                                             const BallContext& ctx) {
    GroupSvrgReference ref;
    ref.x_ref.assign(x_ref.begin(), x_ref.end());
    const auto& g = *ctx.groups;
    const auto& ens = *ctx.ens;
    const std::size_t n = ens.n(), m = g.m(), d = x_ref.size();
    ref.loss_values.assign(n, 0.0);
    ref.loss_subgrads.assign(n, Vec());
    Vec group_losses(m);
    for (std::size_t i = 0; i < m; ++i) {
        double s = 0.0;
        for (const auto& [j, w] : g.row(i)) {
            if (ref.loss_subgrads[j].empty()) {
                ref.loss_values[j] = ens.eval_loss(j, x_ref);
                ens.eval_subgrad_into(j, x_ref, ref.loss_subgrads[j]);
            }
            s += w * ref.loss_values[j];
        }
        group_losses[i] = s;
    }
    ref.sampler = pbar_group_from_values(group_losses, ctx.eps_prime);

    Vec a(m), b(m);
    for (std::size_t i = 0; i < m; ++i) a[i] = group_losses[i] / ctx.eps_prime;
    for (std::size_t i = 0; i < m; ++i) b[i] = ctx.center_group_losses[i] / ctx.eps_prime;
    ref.pi_factor = std::exp(log_sum_exp(a) - log_sum_exp(b));

    const double quad = 0.5 * ctx.lambda * dist2(x_ref, ctx.center) / ctx.eps_prime;
    ref.gammas.assign(m, ctx.eps_prime * std::exp(quad));

    // Exact grad Gamma at the reference (from the cached pass):
    // sum_i pbar_i gamma_i(x_ref) (grad L_i(x_ref) + lambda (x_ref - c)) / eps'.
    ref.full_grad.assign(d, 0.0);
    Vec lse_b(m);
    for (std::size_t i = 0; i < m; ++i)
        lse_b[i] = ctx.center_group_losses[i] / ctx.eps_prime;
    const double lse_center = log_sum_exp(lse_b);
    for (std::size_t i = 0; i < m; ++i) {
        // pbar_i(center) * gamma_i(x_ref, center) / eps' in one exponential.
        const double coef = std::exp(group_losses[i] / ctx.eps_prime + quad - lse_center);
        for (const auto& [j, w] : g.row(i))
            axpy(coef * w, ref.loss_subgrads[j], ref.full_grad);
        for (std::size_t k = 0; k < d; ++k)
            ref.full_grad[k] += coef * ctx.lambda * (x_ref[k] - ctx.center[k]);
    }
    return ref;
}

void group_svrg_estimate_into(std::span<const double> x, const GroupSvrgReference& ref,
                              const BallContext& ctx, Rng& rng, Vec& out, Vec& scratch) {
    const std::size_t i = ref.sampler.sample(rng);
    const std::uint32_t j = ctx.groups->sample_member(i, rng);
    const double gamma_x = mlmc_gamma(x, ref.x_ref, i, ctx, rng, ref.loss_values);
    ctx.ens->eval_subgrad_into(j, x, scratch);
    const double c = ref.pi_factor / ctx.eps_prime;
    const double gamma_ref = ref.gammas[i];
    const auto& gref = ref.loss_subgrads[j];
    out.assign(ref.full_grad.begin(), ref.full_grad.end());
    for (std::size_t k = 0; k < x.size(); ++k) {
        const double lx = scratch[k] + ctx.lambda * (x[k] - ctx.center[k]);
        const double lr = gref[k] + ctx.lambda * (ref.x_ref[k] - ctx.center[k]);
        out[k] += c * (gamma_x * lx - gamma_ref * lr);
    }
}

Vec group_svrg_estimate(std::span<const double> x, const GroupSvrgReference& ref,
                        const BallContext& ctx, Rng& rng) {
    Vec out, scratch;
    group_svrg_estimate_into(x, ref, ctx, rng, out, scratch);
    return out;
}

Vec exact_group_gamma_grad(std::span<const double> x, const BallContext& ctx) {
    const auto& g = *ctx.groups;
    const auto& ens = *ctx.ens;
    const std::size_t m = g.m(), d = x.size();
    const double ep = ctx.eps_prime;
    const double quad = 0.5 * ctx.lambda * dist2(x, ctx.center) / ep;

    Vec group_losses(m);
    std::vector<Vec> group_grads(m, Vec(d, 0.0));
    Vec sg;
    for (std::size_t i = 0; i < m; ++i) {
        double s = 0.0;
        for (const auto& [j, w] : g.row(i)) {
            s += w * ens.eval_loss(j, x);
            ens.eval_subgrad_into(j, x, sg);
            axpy(w, sg, group_grads[i]);
        }
        group_losses[i] = s;
    }
    Vec lse_c(m);
    for (std::size_t i = 0; i < m; ++i) lse_c[i] = ctx.center_group_losses[i] / ep;
    const double lse_center = log_sum_exp(lse_c);

    Vec out(d, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        const double coef = std::exp(group_losses[i] / ep + quad - lse_center);
        axpy(coef, group_grads[i], out);
        for (std::size_t k = 0; k < d; ++k)
            out[k] += coef * ctx.lambda * (x[k] - ctx.center[k]);
    }
    return out;
}

double exact_group_gamma_value_unmetered(std::span<const double> x, const BallContext& ctx) {
    const auto& g = *ctx.groups;
    const std::size_t m = g.m();
    const double ep = ctx.eps_prime;
    Vec a(m), b(m);
    for (std::size_t i = 0; i < m; ++i) {
        double s = 0.0;
        for (const auto& [j, w] : g.row(i)) s += w * ctx.ens->value_unmetered(j, x);
        a[i] = s / ep;
        b[i] = ctx.center_group_losses[i] / ep;
    }
    const double quad = 0.5 * ctx.lambda * dist2(x, ctx.center) / ep;
    return ep * std::exp(log_sum_exp(a) + quad - log_sum_exp(b));
}

// ---- dual estimators ----

namespace {
double log_ratio(const BallContext& ctx, std::size_t i, double loss_x, double y,
                 const SamplingDistribution& pbar) {
    const double G = ctx.ens->lipschitz_G();
    const double lr = ctx.conj->log_conj_prime(loss_x - G * y) - std::log(pbar.prob(i));
    if (lr > 2.0 + 1e-6)
        throw ContractViolation("dual importance ratio above e^2: broken ball precondition");
    return lr;
}
}  // namespace

double dual_grad_estimate_into(std::span<const double> x, double y, const BallContext& ctx,
                               const SamplingDistribution& pbar, Rng& rng, Vec& gx) {
    if (!ctx.in_ball(x))
        throw std::invalid_argument("dual_grad_estimate: x outside the estimator ball");
    if (std::abs(y - ctx.y_bar) > ctx.radius * (1.0 + 1e-9) + 1e-12)
        throw std::invalid_argument("dual_grad_estimate: y outside the dual interval");
    const std::size_t i = pbar.sample(rng);
    const double G = ctx.ens->lipschitz_G();
    const double li = ctx.ens->eval_loss(i, x);
    const double rho = std::exp(log_ratio(ctx, i, li, y, pbar));
    ctx.ens->eval_subgrad_into(i, x, gx);
    scale(gx, rho);
    return G * (1.0 - rho);
}

std::pair<Vec, double> dual_grad_estimate(std::span<const double> x, double y,
                                          const BallContext& ctx,
                                          const SamplingDistribution& pbar, Rng& rng) {
    Vec gx;
    const double gy = dual_grad_estimate_into(x, y, ctx, pbar, rng, gx);
    return {std::move(gx), gy};
}

DualSvrgReference make_dual_svrg_reference(std::span<const double> x_ref, double y_ref,
                                           const BallContext& ctx,
                                           const SamplingDistribution& pbar) {
    DualSvrgReference ref;
    ref.x_ref.assign(x_ref.begin(), x_ref.end());
    ref.y_ref = y_ref;
    const std::size_t n = ctx.ens->n();
    ref.loss_values.resize(n);
    ref.loss_subgrads.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        ref.loss_values[i] = ctx.ens->eval_loss(i, x_ref);
        ctx.ens->eval_subgrad_into(i, x_ref, ref.loss_subgrads[i]);
    }
    const double G = ctx.ens->lipschitz_G();
    const std::size_t d = x_ref.size();
    ref.full_grad.assign(d + 1, 0.0);
    double mass = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double t = ctx.conj->conj_prime(ref.loss_values[i] - G * y_ref);
        mass += t;
        for (std::size_t k = 0; k < d; ++k) ref.full_grad[k] += t * ref.loss_subgrads[i][k];
    }
    for (std::size_t k = 0; k < d; ++k)
        ref.full_grad[k] += ctx.lambda * (x_ref[k] - ctx.center[k]);
    ref.full_grad[d] = G * (1.0 - mass);
    (void)pbar;
    return ref;
}

void dual_svrg_estimate_into(std::span<const double> x, double y,
                             const DualSvrgReference& ref, std::size_t i,
                             const BallContext& ctx, const SamplingDistribution& pbar,
                             Vec& out, Vec& scratch) {
    const double G = ctx.ens->lipschitz_G();
    const std::size_t d = x.size();
    const double li = ctx.ens->eval_loss(i, x);
    const double rho_x = std::exp(log_ratio(ctx, i, li, y, pbar));
    const double rho_r =
        ctx.conj->conj_prime(ref.loss_values[i] - G * ref.y_ref) / pbar.prob(i);
    ctx.ens->eval_subgrad_into(i, x, scratch);
    out.assign(ref.full_grad.begin(), ref.full_grad.end());
    const auto& gr = ref.loss_subgrads[i];
    for (std::size_t k = 0; k < d; ++k) {
        const double vx = rho_x * scratch[k] + ctx.lambda * (x[k] - ctx.center[k]);
        const double vr = rho_r * gr[k] + ctx.lambda * (ref.x_ref[k] - ctx.center[k]);
        out[k] += vx - vr;
    }
    out[d] += G * (1.0 - rho_x) - G * (1.0 - rho_r);
}

Vec dual_svrg_estimate(std::span<const double> x, double y, const DualSvrgReference& ref,
                       std::size_t i, const BallContext& ctx,
                       const SamplingDistribution& pbar) {
    Vec out, scratch;
    dual_svrg_estimate_into(x, y, ref, i, ctx, pbar, out, scratch);
    return out;
}

Vec exact_upsilon_grad(std::span<const double> x, double y, const BallContext& ctx,
                       const SamplingDistribution& pbar) {
    (void)pbar;
    const double G = ctx.ens->lipschitz_G();
    const std::size_t n = ctx.ens->n(), d = x.size();
    Vec out(d + 1, 0.0);
    Vec g;
    double mass = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double li = ctx.ens->eval_loss(i, x);
        const double t = ctx.conj->conj_prime(li - G * y);
        mass += t;
        ctx.ens->eval_subgrad_into(i, x, g);
        for (std::size_t k = 0; k < d; ++k) out[k] += t * g[k];
    }
    for (std::size_t k = 0; k < d; ++k) out[k] += ctx.lambda * (x[k] - ctx.center[k]);
    out[d] = G * (1.0 - mass);
    return out;
}

double exact_upsilon_value_unmetered(std::span<const double> x, double y,
                                     const BallContext& ctx) {
    const std::size_t n = ctx.ens->n();
    Vec l(n);
    for (std::size_t i = 0; i < n; ++i) l[i] = ctx.ens->value_unmetered(i, x);
    const double lt = 0.5 * ctx.lambda * dist2(x, ctx.center);
    return ctx.conj->upsilon_value(l, ctx.ens->lipschitz_G(), y, lt);
}

}  // namespace dro
