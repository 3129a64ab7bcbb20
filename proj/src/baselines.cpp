#include "dro/baselines.hpp"

#include <algorithm>
#include <cmath>

namespace dro {

namespace {

double safe_log_m(std::size_t m) {
    return std::log(static_cast<double>(std::max<std::size_t>(m, 2)));
}

double gap_or_value(const ProblemSpec& p, std::span<const double> x,
                    const BaselineOptions& opts) {
    const double v = raw_objective_unmetered(p, x);
    return opts.reference_optimum ? v - *opts.reference_optimum : v;
}

std::int64_t trace_stride(std::int64_t T, const BaselineOptions& opts) {
    if (opts.trace_every > 0) return opts.trace_every;
    return std::max<std::int64_t>(1, T / 64);
}

// Exact maximizing weights q* of the penalized f-divergence objective at a
// loss-value vector: argmax direction used for the subgradient.
Vec fdiv_best_response(const Divergence& div, std::span<const double> l) {
    const std::size_t N = l.size();
    Vec q(N, 0.0);
    if (div.effectively_zero()) {
        const std::size_t k = std::max_element(l.begin(), l.end()) - l.begin();
        q[k] = 1.0;
        return q;
    }
    if (div.kind == Divergence::Kind::cvar) {
        const double cap = 1.0 / (div.alpha * static_cast<double>(N));
        std::vector<std::size_t> idx(N);
        for (std::size_t i = 0; i < N; ++i) idx[i] = i;
        std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return l[a] > l[b]; });
        double mass = 1.0;
        for (std::size_t i : idx) {
            const double qi = std::min(cap, mass);
            q[i] = qi;
            mass -= qi;
            if (mass <= 0.0) break;
        }
        return q;
    }
    // chi2: q_i = psi*'(l_i - t) at the dual optimum t.
    auto mass_at = [&](double t) {
        double s = 0.0;
        for (double v : l)
            s += std::max(0.0, 1.0 + div.rho * (v - t) / div.nu) / static_cast<double>(N);
        return s;
    };
    double lo = *std::min_element(l.begin(), l.end()) - div.nu / div.rho - 1.0;
    double hi = *std::max_element(l.begin(), l.end()) + div.nu / div.rho + 1.0;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mass_at(mid) > 1.0) lo = mid; else hi = mid;
    }
    const double t = 0.5 * (lo + hi);
    for (std::size_t i = 0; i < N; ++i)
        q[i] = std::max(0.0, 1.0 + div.rho * (l[i] - t) / div.nu) / static_cast<double>(N);
    double s = 0.0;
    for (double v : q) s += v;
    for (double& v : q) v /= s;
    return q;
}

}  // namespace

Vec subgradient_solve_point(const ProblemSpec& problem, std::int64_t T, Rng& rng,
                            SolverTrace* trace, const BaselineOptions& opts) {
    (void)rng;
    const LossEnsemble& ens = problem.ensemble;
    const double G = ens.lipschitz_G(), R = ens.diameter_R();
    const std::int64_t stride = trace_stride(T, opts);

    Vec x = ens.domain().center;
    Vec avg = x;
    Vec g(ens.dim()), sg;
    for (std::int64_t t = 1; t <= T; ++t) {
        std::fill(g.begin(), g.end(), 0.0);
        if (problem.is_group()) {
            const GroupWeights& groups = problem.groups();
            double best = -kInf;
            std::size_t best_i = 0;
            for (std::size_t i = 0; i < groups.m(); ++i) {
                const double v = group_loss_exact(ens, groups, i, x);
                if (v > best) { best = v; best_i = i; }
            }
            for (const auto& [j, w] : groups.row(best_i)) {
                ens.eval_subgrad_into(j, x, sg);
                axpy(w, sg, g);
            }
        } else {
            Vec l(ens.n());
            for (std::size_t i = 0; i < ens.n(); ++i) l[i] = ens.eval_loss(i, x);
            const Vec q = fdiv_best_response(problem.fdiv().divergence, l);
            for (std::size_t i = 0; i < ens.n(); ++i) {
                if (q[i] == 0.0) continue;
                ens.eval_subgrad_into(i, x, sg);
                axpy(q[i], sg, g);
            }
        }
        const double step = R / (G * std::sqrt(static_cast<double>(t)));
        axpy(-step, g, x);
        ens.domain().project(x);
        // Running average over x_1..x_t.
        const double w = 1.0 / static_cast<double>(t + 1);
        for (std::size_t i = 0; i < x.size(); ++i) avg[i] += w * (x[i] - avg[i]);
        if (trace && (t % stride == 0 || t == T))
            trace->add(ens.counter().value_evals(), ens.counter().subgrad_evals(), 0.0,
                       gap_or_value(problem, avg, opts));
    }
    if (trace && T == 0)
        trace->add(ens.counter().value_evals(), ens.counter().subgrad_evals(), 0.0,
                   gap_or_value(problem, avg, opts));
    return avg;
}

SolverTrace subgradient_solve(const ProblemSpec& problem, std::int64_t T, Rng& rng,
                              const BaselineOptions& opts) {
    SolverTrace tr;
    tr.method = "subgradient";
    tr.seed = rng.seed();
    Vec x = subgradient_solve_point(problem, T, rng, &tr, opts);
    tr.final_gap = gap_or_value(problem, x, opts);
    if (tr.rows.empty())
        tr.add(problem.ensemble.counter().value_evals(),
               problem.ensemble.counter().subgrad_evals(), 0.0, tr.final_gap);
    return tr;
}

double primal_dual_default_eta(const ProblemSpec& problem, double eps, double c_eta) {
    const double G = problem.ensemble.lipschitz_G();
    const double R = problem.ensemble.diameter_R();
    const double Bl = problem.ensemble.loss_bound_Bl();
    const std::size_t m = problem.is_group() ? problem.groups().m() : problem.ensemble.n();
    return c_eta * eps * safe_log_m(m) /
           (G * G * R * R + static_cast<double>(m) * Bl * Bl);
}

PrimalDualResult primal_dual_smd(const ProblemSpec& problem, std::int64_t T, double eta,
                                 Rng& rng, const BaselineOptions& opts) {
    const LossEnsemble& ens = problem.ensemble;
    if (!std::isfinite(ens.loss_bound_Bl()))
        throw std::invalid_argument("primal_dual_smd requires bounded losses (finite B_l)");
    const bool group = problem.is_group();
    if (!group) {
        const auto kind = problem.fdiv().divergence.kind;
        if (!(problem.fdiv().divergence.effectively_zero() ||
              kind == Divergence::Kind::chi2))
            throw std::invalid_argument(
                "primal_dual_smd: f-divergence support is limited to the chi2 ball");
    }
    const std::size_t m = group ? problem.groups().m() : ens.n();
    const double R = ens.diameter_R();
    const double logm = safe_log_m(m);
    const double x_scale = eta * R * R / (2.0 * logm);
    const std::int64_t stride = trace_stride(T, opts);

    // chi2 ball: ||q - uniform|| <= sqrt(2 rho / N); entropic update followed
    // by a shrink toward uniform stays on the simplex.
    double chi2_rad = kInf;
    if (!group && problem.fdiv().divergence.kind == Divergence::Kind::chi2 &&
        !problem.fdiv().divergence.effectively_zero())
        chi2_rad = std::sqrt(2.0 * problem.fdiv().divergence.rho / static_cast<double>(m));

    Vec x = ens.domain().center;
    Vec q(m, 1.0 / static_cast<double>(m));
    Vec logq(m, -std::log(static_cast<double>(m)));
    Vec xavg = x, qavg = q;
    Vec sg;

    PrimalDualResult res;
    res.trace.method = "primal-dual";
    res.trace.seed = rng.seed();

    auto project_u = [&](Vec& qq, Vec& lq) {
        if (!std::isfinite(chi2_rad)) return;
        const double u = 1.0 / static_cast<double>(m);
        double d2 = 0.0;
        for (double v : qq) d2 += (v - u) * (v - u);
        const double d = std::sqrt(d2);
        if (d <= chi2_rad) return;
        const double t = chi2_rad / d;
        for (std::size_t i = 0; i < m; ++i) {
            qq[i] = u + t * (qq[i] - u);
            lq[i] = std::log(std::max(qq[i], 1e-300));
        }
    };

    for (std::int64_t t = 1; t <= T; ++t) {
        // x estimator: i ~ q, j ~ w_i, one subgradient.
        std::size_t i_x;
        {
            const double u = rng.uniform();
            double acc = 0.0;
            i_x = m - 1;
            for (std::size_t i = 0; i < m; ++i) {
                acc += q[i];
                if (u < acc) { i_x = i; break; }
            }
        }
        const std::uint32_t j_x =
            group ? problem.groups().sample_member(i_x, rng) : static_cast<std::uint32_t>(i_x);
        ens.eval_subgrad_into(j_x, x, sg);
        // q estimator: i ~ Unif, one value, scaled basis vector.
        const std::size_t i_q = rng.uniform_index(m);
        const std::uint32_t j_q =
            group ? problem.groups().sample_member(i_q, rng) : static_cast<std::uint32_t>(i_q);
        const double gq =
            static_cast<double>(m) * ens.eval_loss(j_q, x);

        axpy(-x_scale, sg, x);
        ens.domain().project(x);
        const double upd = std::clamp(eta * gq, -1.0, 1.0);
        logq[i_q] += upd;
        const double lse = log_sum_exp(logq);
        for (std::size_t i = 0; i < m; ++i) {
            logq[i] -= lse;
            q[i] = std::exp(logq[i]);
        }
        project_u(q, logq);

        const double w = 1.0 / static_cast<double>(t + 1);
        for (std::size_t i = 0; i < x.size(); ++i) xavg[i] += w * (x[i] - xavg[i]);
        for (std::size_t i = 0; i < m; ++i) qavg[i] += w * (q[i] - qavg[i]);
        if (t % stride == 0 || t == T)
            res.trace.add(ens.counter().value_evals(), ens.counter().subgrad_evals(), 0.0,
                          gap_or_value(problem, xavg, opts));
    }
    res.x = std::move(xavg);
    res.q = std::move(qavg);
    res.trace.final_gap = gap_or_value(problem, res.x, opts);
    return res;
}

AgdResult agd_softmax(const ProblemSpec& problem, double eps, std::int64_t T,
                      const BaselineOptions& opts) {
    const LossEnsemble& ens = problem.ensemble;
    const double G = ens.lipschitz_G();
    const double ep = problem.eps_prime(eps);
    const double L = std::isfinite(ens.smoothness_L()) ? ens.smoothness_L() : 0.0;
    const double ltil = L + G * G / ep;
    const std::int64_t stride = trace_stride(T, opts);

    // Smoothed objective and its full gradient.
    RegularizedConjugate rc;
    if (!problem.is_group())
        rc = RegularizedConjugate(problem.fdiv().divergence, ep);

    auto smoothed_grad = [&](const Vec& w, Vec& g) {
        std::fill(g.begin(), g.end(), 0.0);
        Vec sg;
        if (problem.is_group()) {
            const GroupWeights& groups = problem.groups();
            Vec gl(groups.m());
            for (std::size_t i = 0; i < groups.m(); ++i)
                gl[i] = group_loss_exact(ens, groups, i, w);
            Vec scaled(gl.size());
            for (std::size_t i = 0; i < gl.size(); ++i) scaled[i] = gl[i] / ep;
            const double lse = log_sum_exp(scaled);
            for (std::size_t i = 0; i < groups.m(); ++i) {
                const double p = std::exp(scaled[i] - lse);
                for (const auto& [j, wt] : groups.row(i)) {
                    ens.eval_subgrad_into(j, w, sg);
                    axpy(p * wt, sg, g);
                }
            }
            return ep * lse;
        }
        Vec l(ens.n());
        for (std::size_t i = 0; i < ens.n(); ++i) l[i] = ens.eval_loss(i, w);
        const double y = rc.solve_y_star(l, G);
        for (std::size_t i = 0; i < ens.n(); ++i) {
            const double p = rc.conj_prime(l[i] - G * y);
            ens.eval_subgrad_into(i, w, sg);
            axpy(p, sg, g);
        }
        return rc.upsilon_value(l, G, y, 0.0);
    };
    auto smoothed_value_unmetered = [&](const Vec& w) {
        if (problem.is_group())
            return group_softmax_objective_unmetered(ens, problem.groups(), w, ep);
        return dro_objective_fdiv_smoothed_unmetered(ens, rc, w);
    };

    AgdResult res;
    res.trace.method = "agd-softmax";
    Vec x = ens.domain().center, xprev = x, w = x, g(ens.dim());
    Vec best = x;
    double best_val = smoothed_value_unmetered(x);
    for (std::int64_t t = 1; t <= T; ++t) {
        smoothed_grad(w, g);
        Vec xnext = w;
        axpy(-1.0 / ltil, g, xnext);
        ens.domain().project(xnext);
        const double theta = static_cast<double>(t - 1) / static_cast<double>(t + 2);
        w = xnext;
        for (std::size_t i = 0; i < w.size(); ++i) w[i] += theta * (xnext[i] - xprev[i]);
        ens.domain().project(w);
        xprev = x;
        x = std::move(xnext);
        const double val = smoothed_value_unmetered(x);
        if (val < best_val) { best_val = val; best = x; }
        if (t % stride == 0 || t == T)
            res.trace.add(ens.counter().value_evals(), ens.counter().subgrad_evals(), 0.0,
                          gap_or_value(problem, best, opts));
    }
    res.x = std::move(best);
    res.trace.final_gap = gap_or_value(problem, res.x, opts);
    if (res.trace.rows.empty())
        res.trace.add(ens.counter().value_evals(), ens.counter().subgrad_evals(), 0.0,
                      res.trace.final_gap);
    return res;
}

}  // namespace dro
