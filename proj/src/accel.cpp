#include "dro/accel.hpp"

#include <cmath>

namespace dro {

AccelParams AccelParams::derive(double G, double R, double r, double eps, double c_m,
                                double c_lambda, double c_K) {
    if (r <= 0.0 || eps <= 0.0 || G <= 0.0 || R <= 0.0)
        throw std::invalid_argument("accel params: positive G, R, r, eps required");
    AccelParams p;
    p.G = G;
    p.R = R;
    p.r = r;
    p.eps = eps;
    p.c_m = c_m;
    p.c_lambda = c_lambda;
    p.c_K = c_K;
    p.log_term = std::max(1.0, std::log(G * R * R / (eps * r)));
    p.m_eps = std::max(1, static_cast<int>(std::ceil(c_m * p.log_term)));
    p.lambda_m = c_lambda * static_cast<double>(p.m_eps) * static_cast<double>(p.m_eps) * eps /
                 (std::pow(r, 4.0 / 3.0) * std::pow(R, 2.0 / 3.0));
    p.beta = eps / (120.0 * R);
    p.a0 = R / G;
    p.a_max = 9.0 * R * R / eps;
    if (p.lambda_m < 1.0 / p.a_max)
        throw std::invalid_argument("accel params: lambda_m below 1/A_max");
    p.k_max = std::max<std::int64_t>(
        1, static_cast<std::int64_t>(std::ceil(c_K * std::pow(R / r, 2.0 / 3.0) *
                                               static_cast<double>(p.m_eps))));
    return p;
}

namespace {

// Momentum coefficient consistent with the recursion A+ = A + a = lambda a^2.
double coef_a(double lambda, double A) {
    return (1.0 + std::sqrt(1.0 + 4.0 * lambda * A)) / (2.0 * lambda);
}

Vec query_point(const Vec& x, const Vec& v, double A, double a) {
    const double Ap = A + a;
    Vec y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = (A * x[i] + a * v[i]) / Ap;
    return y;
}

}  // namespace

BrooResult high_prob_broo(const BrooFn& broo,
                          const std::function<double(const Vec&)>& f_exact,
                          const Vec& center, double lambda, double delta, double p, Rng& rng,
                          std::int64_t* replicas_out) {
    if (p <= 0.0 || p >= 1.0) throw std::invalid_argument("high_prob_broo: p in (0,1)");
    const int n = std::max(1, static_cast<int>(std::ceil(std::log2(1.0 / p))));
    if (replicas_out) *replicas_out += n;
    const double delta_rep = delta / std::sqrt(2.0);
    BrooResult best;
    double best_val = 0.0;
    for (int i = 0; i < n; ++i) {
        BrooResult cand = broo.call(center, lambda, delta_rep, rng);
        const double val = f_exact(cand.x) + 0.5 * lambda * dist2(cand.x, center);
        if (i == 0 || val < best_val) {
            best_val = val;
            best = std::move(cand);
        }
    }
    return best;
}

MorGradResult mor_grad_est(const BrooFn& broo, const Vec& y, double lambda,
                           double beta_target, double sigma2, double G, Rng& rng) {
    if (beta_target <= 0.0 || sigma2 <= 0.0)
        throw std::invalid_argument("mor_grad_est: beta, sigma^2 must be > 0");
    const double t_max =
        2.0 * G * G / (lambda * lambda * std::min(beta_target * beta_target, 0.5 * sigma2));
    const double t0 = 14.0 * G * G * std::max(1.0, std::log(t_max)) / sigma2;
    const double delta0 = G / (lambda * std::sqrt(t0));

    MorGradResult out;
    BrooResult x0 = broo.call(y, lambda, delta0, rng);
    out.broo_calls = 1;
    Vec xhat = x0.x;

    const int J = rng.geometric_half_trials();
    if (std::pow(2.0, J) <= t_max) {
        const double dJ = G / (lambda * std::sqrt(std::pow(2.0, J) * t0));
        const double dJm1 = G / (lambda * std::sqrt(std::pow(2.0, J - 1) * t0));
        BrooResult xj = broo.call(y, lambda, dJ, rng);
        BrooResult xjm1 = broo.call(y, lambda, dJm1, rng);
        out.broo_calls += 2;
        const double w = std::pow(2.0, J);
        for (std::size_t k = 0; k < xhat.size(); ++k)
            xhat[k] += w * (xj.x[k] - xjm1.x[k]);
    }
    out.grad.resize(y.size());
    for (std::size_t k = 0; k < y.size(); ++k) out.grad[k] = lambda * (y[k] - xhat[k]);
    out.prox_point = std::move(x0.x);
    return out;
}

LambdaBisectionResult lambda_bisection(const BrooFn& broo,
                                       const std::function<double(const Vec&)>& f_exact,
                                       const Vec& x, const Vec& v, double A,
                                       const AccelParams& params, double hp_failure_p,
                                       Rng& rng, double warm_start) {
    const double r = params.r;
    const double accept_lo = 0.75 * r, accept_hi = 0.875 * r;
    const double delta = r / 30.0;
    LambdaBisectionResult res;

    // Probe: prox distance at the lambda-dependent query point.
    auto probe = [&](double lambda) {
        ++res.probes;
        const Vec y = query_point(x, v, A, coef_a(lambda, A));
        BrooResult out = high_prob_broo(broo, f_exact, y, lambda, delta, hp_failure_p, rng,
                                        &res.replicas);
        return dist(out.x, y);
    };

    double lo = params.lambda_m;
    double hi = std::max(2.0 * lo, params.bisect_lambda_hi_factor * params.G / r);
    int budget = params.m_eps + 2;

    // Warm start from the previous iteration's lambda: accept in one probe
    // when it still classifies, otherwise it seeds the interval.
    bool lo_checked = false;
    if (warm_start > lo * (1.0 + 1e-12) && warm_start < hi) {
        const double d0 = probe(warm_start);
        --budget;
        if (d0 >= accept_lo && d0 <= accept_hi) {
            res.lambda = warm_start;
            return res;
        }
        if (d0 < accept_lo) hi = warm_start; else { lo = warm_start; lo_checked = true; }
    }

    if (!lo_checked) {
        const double dlo = probe(lo);
        --budget;
        if (dlo <= accept_hi) {
            // Acceptable band, or already deep inside: lambda_m < 2 lambda_m.
            res.lambda = lo;
            return res;
        }
    }

    while (budget-- > 0 && hi / lo > 1.0 + 1e-6) {
        const double mid = std::sqrt(lo * hi);
        const double d = probe(mid);
        if (d >= accept_lo && d <= accept_hi) {
            res.lambda = mid;
            return res;
        }
        if (d > accept_hi) lo = mid; else hi = mid;
    }
    res.collapsed = true;
    res.lambda = params.lambda_m;
    return res;
}

OuterResult outer_solve(const RegularizedDriver& driver, const AccelParams& params, Rng& rng,
                        const std::function<double(const Vec&)>* gap_probe) {
    OuterResult out;
    const double hp_p =
        1.0 / (6.0 * static_cast<double>(params.k_max) * static_cast<double>(params.m_eps));

    Vec x = driver.domain.center;
    Vec v = x;
    double A = params.a0;
    double lambda_prev = 0.0;
    out.trace.method = "ball-accel";

    auto record = [&](const Vec& cand) {
        if (!gap_probe) return;
        out.trace.add(driver.counter->value_evals(), driver.counter->subgrad_evals(), 0.0,
                      (*gap_probe)(cand));
    };

    record(x);
    for (std::int64_t k = 0; k < params.k_max; ++k) {
        LambdaBisectionResult bis = lambda_bisection(driver.broo, driver.f_exact, x, v, A,
                                                     params, hp_p, rng, lambda_prev);
        const double lambda = bis.lambda;
        lambda_prev = lambda;
        out.diag.bisect_probes += bis.probes;
        out.diag.hp_replicas += bis.replicas;
        out.diag.broo_calls += bis.replicas;
        if (bis.collapsed) ++out.diag.bisect_warnings;

        const double a = coef_a(lambda, A);
        const double A_next = A + a;
        const Vec y = query_point(x, v, A, a);

        MorGradResult mg = mor_grad_est(driver.broo, y, lambda, params.beta,
                                        params.sigma2(lambda), params.G, rng);
        out.diag.morgrad_calls += mg.broo_calls;
        out.diag.broo_calls += mg.broo_calls;

        // The delta_0-accurate oracle output doubles as the proximal step.
        x = mg.prox_point;
        axpy(-0.5 * a, mg.grad, v);
        driver.domain.project(v);
        A = A_next;
        ++out.diag.iterations;
        record(x);

        if (A >= params.a_max) {
            out.diag.hit_a_max = true;
            break;
        }
    }
    out.diag.final_A = A;
    out.x = std::move(x);
    if (gap_probe && !out.trace.rows.empty())
        out.trace.final_gap = out.trace.rows.back().gap_estimate;
    return out;
}

}  // namespace dro
