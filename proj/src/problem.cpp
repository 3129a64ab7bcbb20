#include "dro/problem.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace dro {

LossEnsemble LossEnsemble::with_analytic_constants(std::vector<Loss> losses, Domain domain) {
    if (losses.empty()) throw std::invalid_argument("ensemble needs at least one loss");
    double G = 0.0, L = 0.0, Bl = 0.0;
    for (const Loss& l : losses) {
        if (l.a.size() != domain.center.size())
            throw std::invalid_argument("loss dimension mismatch");
        G = std::max(G, l.lipschitz());
        L = std::max(L, l.smoothness());
        Bl = std::max(Bl, l.bound(domain.center, domain.radius));
    }
    const double R = 2.0 * domain.radius;
    return LossEnsemble(std::move(losses), std::move(domain), G, R, L, Bl);
}

void LossEnsemble::check_query(std::size_t i, std::span<const double> x) const {
    if (i >= losses_.size()) throw std::out_of_range("loss index out of range");
    if (x.size() != dim()) throw std::invalid_argument("point dimension mismatch");
    if (!domain_.contains(x)) throw std::domain_error("query point outside the domain ball");
}

double LossEnsemble::eval_loss(std::size_t i, std::span<const double> x) const {
    check_query(i, x);
    counter_.add_value();
    return losses_[i].value(x);
}

void LossEnsemble::eval_subgrad_into(std::size_t i, std::span<const double> x, Vec& g) const {
    check_query(i, x);
    counter_.add_subgrad();
    losses_[i].subgrad_into(x, g);
}

GroupWeights::GroupWeights(std::size_t n, std::vector<Row> rows) : n_(n), rows_(std::move(rows)) {
    if (rows_.empty()) throw std::invalid_argument("group weights need at least one row");
    prefix_.resize(rows_.size());
    for (std::size_t i = 0; i < rows_.size(); ++i) {
        const Row& r = rows_[i];
        if (r.empty()) throw std::invalid_argument("empty group row");
        double s = 0.0;
        prefix_[i].reserve(r.size());
        for (const auto& [j, w] : r) {
            if (j >= n_) throw std::out_of_range("group member index out of range");
            if (w < 0.0) throw std::invalid_argument("negative group weight");
            s += w;
            prefix_[i].push_back(s);
        }
        if (std::abs(s - 1.0) > 1e-12)
            throw std::invalid_argument("group row does not sum to 1");
        if (r.size() > 1) all_singleton_ = false;
    }
}

std::uint32_t GroupWeights::sample_member(std::size_t i, Rng& rng) const {
    const Row& r = rows_[i];
    if (r.size() == 1) return r[0].first;
    const auto& pref = prefix_[i];
    const double u = rng.uniform() * pref.back();
    const auto it = std::upper_bound(pref.begin(), pref.end(), u);
    const std::size_t k = std::min<std::size_t>(it - pref.begin(), r.size() - 1);
    return r[k].first;
}

double ProblemSpec::eps_prime(double eps) const {
    const std::size_t m = is_group() ? groups().m() : ensemble.n();
    return eps / (2.0 * std::log(static_cast<double>(std::max<std::size_t>(m, 2))));
}

void ProblemSpec::validate() const {
    if (target_eps <= 0.0) throw std::invalid_argument("target_eps must be > 0");
    if (is_group()) {
        if (groups().n() != ensemble.n())
            throw std::invalid_argument("group weights sized for a different ensemble");
    } else {
        if (fdiv().divergence.n != ensemble.n())
            throw std::invalid_argument("divergence sized for a different ensemble");
    }
}

// ---- exact objectives ----

double group_loss_exact(const LossEnsemble& ens, const GroupWeights& g, std::size_t i,
                        std::span<const double> x) {
    double s = 0.0;
    for (const auto& [j, w] : g.row(i)) s += w * ens.eval_loss(j, x);
    return s;
}

namespace {

double group_max(const LossEnsemble& ens, const GroupWeights& g, std::span<const double> x,
                 bool metered) {
    double best = -kInf;
    for (std::size_t i = 0; i < g.m(); ++i) {
        double s = 0.0;
        for (const auto& [j, w] : g.row(i))
            s += w * (metered ? ens.eval_loss(j, x) : ens.value_unmetered(j, x));
        best = std::max(best, s);
    }
    return best;
}

double group_softmax(const LossEnsemble& ens, const GroupWeights& g, std::span<const double> x,
                     double eps_prime, bool metered) {
    Vec scaled(g.m());
    for (std::size_t i = 0; i < g.m(); ++i) {
        double s = 0.0;
        for (const auto& [j, w] : g.row(i))
            s += w * (metered ? ens.eval_loss(j, x) : ens.value_unmetered(j, x));
        scaled[i] = s / eps_prime;
    }
    return eps_prime * log_sum_exp(scaled);
}

// Exact penalized objective from a loss-value vector, by divergence kind.
double fdiv_from_values(const Divergence& div, std::span<const double> l) {
    const std::size_t N = l.size();
    if (div.effectively_zero()) return *std::max_element(l.begin(), l.end());
    if (div.kind == Divergence::Kind::cvar) {
        // Greedy fill of the box-capped simplex from the largest losses.
        const double cap = 1.0 / (div.alpha * static_cast<double>(N));
        Vec sorted(l.begin(), l.end());
        std::sort(sorted.begin(), sorted.end(), std::greater<>());
        double mass = 1.0, s = 0.0;
        for (double v : sorted) {
            const double q = std::min(cap, mass);
            s += q * v;
            mass -= q;
            if (mass <= 0.0) break;
        }
        return s;
    }
    // chi2 / custom: dual bisection on sum psi*'(l_i - t) = 1 over t (G = 1
    // scaling is immaterial for the value).
    auto mass_at = [&](double t) {
        double s = 0.0;
        for (double v : l) {
            // psi*'(v) for chi2: max(0, (1 + rho v / nu)) / N.
            if (div.kind == Divergence::Kind::chi2) {
                s += std::max(0.0, (1.0 + div.rho * (v - t) / div.nu)) /
                     static_cast<double>(N);
            } else {
                // custom: numeric argmax of v t' - psi(t') via derivative root;
                // fall back to a fine scan of the t' domain.
                const double vv = v - t;
                double best = 0.0, bestval = -kInf;
                const double hi = std::min(div.dom_upper(), 4.0);
                for (int k = 0; k <= 4000; ++k) {
                    const double tt = hi * k / 4000.0;
                    const double val = vv * tt - div.psi(tt);
                    if (val > bestval) { bestval = val; best = tt; }
                }
                s += best;
            }
        }
        return s;
    };
    double lmin = *std::min_element(l.begin(), l.end());
    double lmax = *std::max_element(l.begin(), l.end());
    const double slack = div.nu / std::max(div.rho, 1e-12) + 1.0;
    double lo = lmin - slack, hi = lmax + slack;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mass_at(mid) > 1.0) lo = mid; else hi = mid;
    }
    const double t = 0.5 * (lo + hi);
    // Value = sum psi*(l_i - t) + t with psi*(v) per kind.
    double s = t;
    for (double v : l) {
        const double vv = v - t;
        if (div.kind == Divergence::Kind::chi2) {
            const double N_ = static_cast<double>(N);
            if (vv >= -div.nu / div.rho)
                s += vv / N_ + div.rho * vv * vv / (2.0 * div.nu * N_);
            else
                s += -div.nu / (2.0 * div.rho * N_);
        } else {
            const double hi2 = std::min(div.dom_upper(), 4.0);
            double bestval = -kInf;
            for (int k = 0; k <= 4000; ++k) {
                const double tt = hi2 * k / 4000.0;
                bestval = std::max(bestval, vv * tt - div.psi(tt));
            }
            s += bestval;
        }
    }
    return s;
}

}  // namespace

double dro_objective_group(const LossEnsemble& ens, const GroupWeights& g,
                           std::span<const double> x) {
    return group_max(ens, g, x, true);
}

double dro_objective_group_unmetered(const LossEnsemble& ens, const GroupWeights& g,
                                     std::span<const double> x) {
    return group_max(ens, g, x, false);
}

double group_softmax_objective(const LossEnsemble& ens, const GroupWeights& g,
                               std::span<const double> x, double eps_prime) {
    return group_softmax(ens, g, x, eps_prime, true);
}

double group_softmax_objective_unmetered(const LossEnsemble& ens, const GroupWeights& g,
                                         std::span<const double> x, double eps_prime) {
    return group_softmax(ens, g, x, eps_prime, false);
}

double fdiv_objective_from_values(const Divergence& div, std::span<const double> losses) {
    return fdiv_from_values(div, losses);
}

double dro_objective_fdiv(const LossEnsemble& ens, const Divergence& div,
                          std::span<const double> x) {
    Vec l(ens.n());
    for (std::size_t i = 0; i < ens.n(); ++i) l[i] = ens.eval_loss(i, x);
    return fdiv_from_values(div, l);
}

double dro_objective_fdiv_unmetered(const LossEnsemble& ens, const Divergence& div,
                                    std::span<const double> x) {
    Vec l(ens.n());
    for (std::size_t i = 0; i < ens.n(); ++i) l[i] = ens.value_unmetered(i, x);
    return fdiv_from_values(div, l);
}

double dro_objective_fdiv_smoothed(const LossEnsemble& ens, const RegularizedConjugate& rc,
                                   std::span<const double> x) {
    Vec l(ens.n());
    for (std::size_t i = 0; i < ens.n(); ++i) l[i] = ens.eval_loss(i, x);
    const double G = ens.lipschitz_G();
    const double y = rc.solve_y_star(l, G);
    return rc.upsilon_value(l, G, y, 0.0);
}

double dro_objective_fdiv_smoothed_unmetered(const LossEnsemble& ens,
                                             const RegularizedConjugate& rc,
                                             std::span<const double> x) {
    Vec l(ens.n());
    for (std::size_t i = 0; i < ens.n(); ++i) l[i] = ens.value_unmetered(i, x);
    const double G = ens.lipschitz_G();
    const double y = rc.solve_y_star(l, G);
    return rc.upsilon_value(l, G, y, 0.0);
}

double raw_objective_unmetered(const ProblemSpec& p, std::span<const double> x) {
    if (p.is_group()) return dro_objective_group_unmetered(p.ensemble, p.groups(), x);
    return dro_objective_fdiv_unmetered(p.ensemble, p.fdiv().divergence, x);
}

}  // namespace dro
