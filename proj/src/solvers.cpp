#include "dro/solvers.hpp"

#include <cmath>

namespace dro {

Method parse_method(const std::string& name) {
    if (name == "ball-accel-epochsgd") return Method::ball_accel_epochsgd;
    if (name == "ball-accel-vr") return Method::ball_accel_vr;
    if (name == "subgradient") return Method::subgradient;
    if (name == "primal-dual") return Method::primal_dual;
    if (name == "agd-softmax") return Method::agd_softmax;
    throw std::invalid_argument("unknown method: " + name);
}

std::string method_name(Method m) {
    switch (m) {
        case Method::ball_accel_epochsgd: return "ball-accel-epochsgd";
        case Method::ball_accel_vr: return "ball-accel-vr";
        case Method::subgradient: return "subgradient";
        case Method::primal_dual: return "primal-dual";
        case Method::agd_softmax: return "agd-softmax";
    }
    return "?";
}

SmoothedObjective make_smoothed(const ProblemSpec& problem, double eps) {
    SmoothedObjective sm;
    sm.eps = eps;
    sm.eps_prime = problem.eps_prime(eps);
    sm.r_eps = sm.eps_prime / problem.ensemble.lipschitz_G();
    if (!problem.is_group())
        sm.conj = RegularizedConjugate(problem.fdiv().divergence, sm.eps_prime);
    return sm;
}

RegularizedDriver make_driver(const ProblemSpec& problem, const SmoothedObjective& sm,
                              Method method, const SolveOptions& opts) {
    const LossEnsemble& ens = problem.ensemble;
    RegularizedDriver d;
    d.G = ens.lipschitz_G();
    d.R = ens.diameter_R();
    d.domain = ens.domain();
    d.counter = &ens.counter();
    d.broo.radius = sm.r_eps;

    const bool vr = method == Method::ball_accel_vr;
    if (vr && !std::isfinite(ens.smoothness_L()))
        throw std::invalid_argument("ball-accel-vr requires a finite smoothness constant L");

    if (problem.is_group()) {
        const GroupWeights& groups = problem.groups();
        const double ep = sm.eps_prime;
        const BrooOptions bo = opts.broo;
        if (vr) {
            d.broo.call = [&ens, &groups, ep, bo](const Vec& c, double lambda, double delta,
                                                  Rng& rng) {
                BrooRequest req{c, ep / ens.lipschitz_G(), lambda, delta};
                return katyusha_broo(req, ens, groups, ep, rng, bo);
            };
        } else {
            d.broo.call = [&ens, &groups, ep, bo](const Vec& c, double lambda, double delta,
                                                  Rng& rng) {
                BrooRequest req{c, ep / ens.lipschitz_G(), lambda, delta};
                return epoch_sgd_broo(req, ens, groups, ep, rng, bo);
            };
        }
        d.f_exact = [&ens, &groups, ep](const Vec& x) {
            return group_softmax_objective(ens, groups, x, ep);
        };
        d.f_exact_unmetered = [&ens, &groups, ep](const Vec& x) {
            return group_softmax_objective_unmetered(ens, groups, x, ep);
        };
    } else {
        const RegularizedConjugate& rc = sm.conj;
        const double ep = sm.eps_prime;
        const BrooOptions bo = opts.broo;
        if (vr) {
            d.broo.call = [&ens, &rc, ep, bo](const Vec& c, double lambda, double delta,
                                              Rng& rng) {
                BrooRequest req{c, ep / ens.lipschitz_G(), lambda, delta};
                return restarted_vr_broo(req, ens, rc, ep, rng, bo);
            };
        } else {
            d.broo.call = [&ens, &rc, ep, bo](const Vec& c, double lambda, double delta,
                                              Rng& rng) {
                BrooRequest req{c, ep / ens.lipschitz_G(), lambda, delta};
                return dual_epoch_sgd_broo(req, ens, rc, ep, rng, bo);
            };
        }
        d.f_exact = [&ens, &rc](const Vec& x) {
            return dro_objective_fdiv_smoothed(ens, rc, x);
        };
        d.f_exact_unmetered = [&ens, &rc](const Vec& x) {
            return dro_objective_fdiv_smoothed_unmetered(ens, rc, x);
        };
    }
    return d;
}

SolveResult solve(const ProblemSpec& problem, Method method, double eps, Rng& rng,
                  const SolveOptions& opts) {
    problem.validate();
    const LossEnsemble& ens = problem.ensemble;
    const EvalCounts start = ens.counts();
    SolveResult res;
    BaselineOptions bopts;
    bopts.reference_optimum = opts.reference_optimum;
    bopts.c_eta = opts.c_eta;

    switch (method) {
        case Method::ball_accel_epochsgd:
        case Method::ball_accel_vr: {
            SmoothedObjective sm = make_smoothed(problem, eps);
            RegularizedDriver driver = make_driver(problem, sm, method, opts);
            // Outer target eps/2 on the smoothed objective gives eps on the raw one.
            AccelParams params = AccelParams::derive(driver.G, driver.R, sm.r_eps, eps / 2.0,
                                                     opts.c_m, opts.c_lambda, opts.c_K);
            params.bisect_lambda_hi_factor = opts.bisect_lambda_hi_factor;
            std::function<double(const Vec&)> probe = [&](const Vec& x) {
                const double v = raw_objective_unmetered(problem, x);
                return opts.reference_optimum ? v - *opts.reference_optimum : v;
            };
            OuterResult outer = outer_solve(driver, params, rng, &probe);
            res.x = std::move(outer.x);
            res.diag = outer.diag;
            res.trace = std::move(outer.trace);
            res.trace.method = method_name(method);
            break;
        }
        case Method::subgradient: {
            const double G = ens.lipschitz_G(), R = ens.diameter_R();
            const std::int64_t T =
                opts.baseline_T > 0
                    ? opts.baseline_T
                    : static_cast<std::int64_t>(std::ceil(4.0 * G * G * R * R / (eps * eps)));
            res.trace.method = method_name(method);
            res.trace.seed = rng.seed();
            res.x = subgradient_solve_point(problem, T, rng, &res.trace, bopts);
            res.trace.final_gap = res.trace.rows.empty() ? 0.0 : res.trace.rows.back().gap_estimate;
            break;
        }
        case Method::primal_dual: {
            const std::size_t m = problem.is_group() ? problem.groups().m() : ens.n();
            const double G = ens.lipschitz_G(), R = ens.diameter_R();
            const double Bl = ens.loss_bound_Bl();
            const std::int64_t T =
                opts.baseline_T > 0
                    ? opts.baseline_T
                    : static_cast<std::int64_t>(
                          std::ceil((G * G * R * R + Bl * Bl * static_cast<double>(m) *
                                                         std::log(static_cast<double>(
                                                             std::max<std::size_t>(m, 2)))) /
                                    (eps * eps)));
            const double eta = primal_dual_default_eta(problem, eps, opts.c_eta);
            PrimalDualResult pd = primal_dual_smd(problem, T, eta, rng, bopts);
            res.x = std::move(pd.x);
            res.trace = std::move(pd.trace);
            break;
        }
        case Method::agd_softmax: {
            const double G = ens.lipschitz_G(), R = ens.diameter_R();
            const double ep = problem.eps_prime(eps);
            const double L = std::isfinite(ens.smoothness_L()) ? ens.smoothness_L() : 0.0;
            const std::int64_t T =
                opts.baseline_T > 0
                    ? opts.baseline_T
                    : static_cast<std::int64_t>(
                          std::ceil(4.0 * std::sqrt((L + G * G / ep) * R * R / eps)));
            AgdResult ag = agd_softmax(problem, eps, T, bopts);
            res.x = std::move(ag.x);
            res.trace = std::move(ag.trace);
            break;
        }
    }
    res.consumed = ens.counts() - start;
    return res;
}

}  // namespace dro
