#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>

#include "dro/vec.hpp"

namespace dro {

// Divergence penalty psi(t) = (nu/N) f(N t) for a convex f with f(1) = 0.
// Built-in kinds: zero (f = 0), cvar (f = indicator{s <= 1/alpha}),
// chi2 (f(s) = (s-1)^2 / (2 rho)); `custom` supplies f callbacks directly.
struct Divergence {
    enum class Kind { zero, cvar, chi2, custom };

    Kind kind = Kind::zero;
    std::size_t n = 1;     // number of losses (enters the (nu/N) f(N t) scaling)
    double nu = 0.0;       // Lagrange multiplier; nu = 0 collapses to kind zero
    double alpha = 0.5;    // cvar level
    double rho = 1.0;      // chi2 ball size
    double f_bound = 1.0;  // B_f >= 1

    // custom kind: f, f', f'' and sup dom(f)
    std::function<double(double)> custom_f, custom_f1, custom_f2;
    double custom_dom_upper = kInfDom();

    static constexpr double kInfDom() { return 1e300; }

    bool effectively_zero() const { return kind == Kind::zero || nu <= 0.0; }

    // sup of dom(psi) in t-space.
    double dom_upper() const {
        if (effectively_zero()) return kInfDom();
        switch (kind) {
            case Kind::cvar: return 1.0 / (alpha * static_cast<double>(n));
            case Kind::custom: return custom_dom_upper / static_cast<double>(n);
            default: return kInfDom();
        }
    }

    double psi(double t) const;
    double psi_prime(double t) const;
    double psi_second(double t) const;

    // "zero" | "cvar:alpha=..." | "chi2:rho=..."
    static Divergence parse(const std::string& s, std::size_t n, double nu);
    std::string to_string() const;

    void validate() const;
};

struct ConjugateSolveError : std::runtime_error {
    double bracket_lo, bracket_hi;
    ConjugateSolveError(const std::string& what, double lo, double hi)
        : std::runtime_error(what), bracket_lo(lo), bracket_hi(hi) {}
};

// Entropy-regularized conjugate machinery for psi_eps(t) = psi(t) + eps' t log t:
// conj(v) = psi_eps^*(v), conj_prime(v) = argmax_t { v t - psi_eps(t) } and the
// exact one-dimensional minimization of Upsilon over the dual variable y.
// All exponentials run through log-space differences.
class RegularizedConjugate {
public:
    RegularizedConjugate() = default;
    RegularizedConjugate(Divergence div, double eps_prime, double newton_tol = 1e-12,
                         int max_iter = 200)
        : div_(std::move(div)), eps_prime_(eps_prime), newton_tol_(newton_tol),
          max_iter_(max_iter) {}

    const Divergence& divergence() const { return div_; }
    double eps_prime() const { return eps_prime_; }

    double conj(double v) const;
    double conj_prime(double v) const { return std::exp(log_conj_prime(v)); }
    double log_conj_prime(double v) const;

    // y* with |sum_i conj_prime(l_i - G y*) - 1| <= y_tol. Safeguarded Newton
    // on the strictly decreasing mass; bracket [min l/G - w, max l/G + w] with
    // w = (eps'/G)(1 + log N + log(1/y_tol)), widened once on failure. An
    // optional hint warm-starts the search.
    double solve_y_star(std::span<const double> loss_values, double scale_G) const;
    double solve_y_star(std::span<const double> loss_values, double scale_G, double y_tol,
                        const double* hint = nullptr) const;

    double default_y_tol(std::span<const double> loss_values) const;

    // sum_i conj(l_i - G y) + G y + lambda_term
    double upsilon_value(std::span<const double> loss_values, double scale_G, double y,
                         double lambda_term) const;

    // sum_i conj_prime(l_i - G y)
    double prob_mass(std::span<const double> loss_values, double scale_G, double y) const;

private:
    // log t*(v) where t*(v) solves psi'(t) + eps'(1 + log t) = v on (0, dom_upper],
    // clamped at the domain boundary.
    double solve_log_tstar(double v) const;

    Divergence div_;
    double eps_prime_ = 1.0;
    double newton_tol_ = 1e-12;
    int max_iter_ = 200;
};

}  // namespace dro
