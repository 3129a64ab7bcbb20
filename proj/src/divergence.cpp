#include "dro/divergence.hpp"

#include <cmath>
#include <sstream>

namespace dro {

double Divergence::psi(double t) const {
    if (t < 0.0) return kInfDom();
    if (effectively_zero()) return 0.0;
    const double N = static_cast<double>(n);
    switch (kind) {
        case Kind::cvar:
            return t <= dom_upper() * (1.0 + 1e-15) ? 0.0 : kInfDom();
        case Kind::chi2: {
            const double s = N * t - 1.0;
            return nu / N * s * s / (2.0 * rho);
        }
        case Kind::custom:
            return nu / N * custom_f(N * t);
        default:
            return 0.0;
    }
}

double Divergence::psi_prime(double t) const {
    if (effectively_zero()) return 0.0;
    const double N = static_cast<double>(n);
    switch (kind) {
        case Kind::cvar: return 0.0;  // interior of the clamped domain
        case Kind::chi2: return nu / rho * (N * t - 1.0);
        case Kind::custom: return nu * custom_f1(N * t);
        default: return 0.0;
    }
}

double Divergence::psi_second(double t) const {
    if (effectively_zero()) return 0.0;
    const double N = static_cast<double>(n);
    switch (kind) {
        case Kind::cvar: return 0.0;
        case Kind::chi2: return nu * N / rho;
        case Kind::custom: return nu * N * custom_f2(N * t);
        default: return 0.0;
    }
}

Divergence Divergence::parse(const std::string& s, std::size_t n, double nu) {
    Divergence d;
    d.n = n;
    d.nu = nu;
    if (s == "zero") {
        d.kind = Kind::zero;
        return d;
    }
    const auto colon = s.find(':');
    const std::string name = s.substr(0, colon);
    double param = 0.0;
    bool have_param = false;
    if (colon != std::string::npos) {
        const auto eq = s.find('=', colon);
        if (eq == std::string::npos)
            throw std::invalid_argument("divergence spec missing '=': " + s);
        param = std::stod(s.substr(eq + 1));
        have_param = true;
    }
    if (name == "cvar") {
        if (!have_param) throw std::invalid_argument("cvar requires alpha");
        d.kind = Kind::cvar;
        d.alpha = param;
    } else if (name == "chi2") {
        if (!have_param) throw std::invalid_argument("chi2 requires rho");
        d.kind = Kind::chi2;
        d.rho = param;
        d.f_bound = std::max(1.0, (static_cast<double>(n) - 1.0) *
                                      (static_cast<double>(n) - 1.0) / (2.0 * param));
    } else {
        throw std::invalid_argument("unknown divergence: " + s);
    }
    d.validate();
    return d;
}

std::string Divergence::to_string() const {
    std::ostringstream os;
    switch (kind) {
        case Kind::zero: os << "zero"; break;
        case Kind::cvar: os << "cvar:alpha=" << alpha; break;
        case Kind::chi2: os << "chi2:rho=" << rho; break;
        case Kind::custom: os << "custom"; break;
    }
    return os.str();
}

void Divergence::validate() const {
    if (nu < 0.0) throw std::invalid_argument("divergence: nu must be >= 0");
    if (f_bound < 1.0) throw std::invalid_argument("divergence: B_f must be >= 1");
    if (kind == Kind::cvar && (alpha <= 0.0 || alpha > 1.0))
        throw std::invalid_argument("divergence: cvar alpha must be in (0, 1]");
    if (kind == Kind::chi2 && rho <= 0.0)
        throw std::invalid_argument("divergence: chi2 rho must be > 0");
    if (kind == Kind::custom && (!custom_f || !custom_f1 || !custom_f2))
        throw std::invalid_argument("divergence: custom kind needs f, f', f''");
    // f(1) = 0 translated to psi(1/N) = 0.
    if (n > 0 && std::abs(psi(1.0 / static_cast<double>(n))) > 1e-12)
        throw std::invalid_argument("divergence: psi(1/N) must vanish (f(1) = 0)");
}

// ---- RegularizedConjugate ----

double RegularizedConjugate::solve_log_tstar(double v) const {
    const double ep = eps_prime_;
    // Entropy-only stationarity: log t = v/ep - 1.
    const double log_ent = v / ep - 1.0;
    const double u = div_.dom_upper();
    const double log_u = std::log(u);
    if (div_.effectively_zero()) return std::min(log_ent, log_u);
    if (div_.kind == Divergence::Kind::cvar) return std::min(log_ent, log_u);

    // General case: increasing h(s) = psi'(e^s) + ep (1 + s) - v, root in s.
    auto h = [&](double s) { return div_.psi_prime(std::exp(s)) + ep * (1.0 + s) - v; };
    if (h(log_u) <= 0.0) return log_u;  // boundary maximizer

    // Bracket: entropy solution overshoots when psi' >= 0 there; expand downward
    // from it, and upward from a very negative start if needed.
    double hi = std::min(log_ent, log_u);
    double lo = hi;
    if (h(hi) < 0.0) {
        // psi' < 0 left of 1/N can push the root above the entropy solution.
        double step = 1.0;
        while (h(hi) < 0.0) {
            lo = hi;
            hi = std::min(hi + step, log_u);
            step *= 2.0;
            if (step > 1e6) throw ConjugateSolveError("conjugate bracket expansion failed", lo, hi);
        }
    } else {
        double step = 1.0;
        while (h(lo) > 0.0) {
            hi = lo;
            lo -= step;
            step *= 2.0;
            if (lo < -750.0) return lo;  // t* below double range: treat as ~0
        }
    }

    // Guarded Newton on s with bisection fallback.
    double s = 0.5 * (lo + hi);
    for (int it = 0; it < max_iter_; ++it) {
        const double t = std::exp(s);
        const double g = div_.psi_prime(t) + ep * (1.0 + s) - v;
        if (g > 0.0) hi = s; else lo = s;
        const double dg = div_.psi_second(t) * t + ep;
        double snew = s - g / dg;
        if (!(snew > lo && snew < hi)) snew = 0.5 * (lo + hi);
        const double move = std::abs(snew - s);
        s = snew;
        if (move <= newton_tol_ * (1.0 + std::abs(s)) || hi - lo <= newton_tol_)
            return s;
    }
    throw ConjugateSolveError("conjugate Newton did not converge", lo, hi);
}

double RegularizedConjugate::log_conj_prime(double v) const { return solve_log_tstar(v); }

double RegularizedConjugate::conj(double v) const {
    const double log_t = solve_log_tstar(v);
    const double t = std::exp(log_t);
    // Unclamped entropy stationarity (psi = 0 locally): v t - eps' t log t
    // simplifies to eps' t, which stays well defined when t overflows.
    if (div_.effectively_zero() ||
        (div_.kind == Divergence::Kind::cvar && log_t < std::log(div_.dom_upper()) - 1e-12))
        return eps_prime_ * t;
    return v * t - div_.psi(t) - eps_prime_ * t * log_t;
}

double RegularizedConjugate::prob_mass(std::span<const double> loss_values, double G,
                                       double y) const {
    double s = 0.0;
    for (double l : loss_values) s += conj_prime(l - G * y);
    return s;
}

double RegularizedConjugate::default_y_tol(std::span<const double> loss_values) const {
    double m = 0.0;
    for (double l : loss_values) m = std::max(m, std::abs(l));
    return 1e-10 * (1.0 + m);
}

double RegularizedConjugate::solve_y_star(std::span<const double> loss_values,
                                          double G) const {
    return solve_y_star(loss_values, G, default_y_tol(loss_values));
}

double RegularizedConjugate::solve_y_star(std::span<const double> loss_values, double G,
                                          double y_tol, const double* hint) const {
    if (loss_values.empty()) throw std::invalid_argument("solve_y_star: empty losses");
    const double N = static_cast<double>(loss_values.size());
    const double ep = eps_prime_;

    if (div_.effectively_zero()) {
        // Closed form: G y* = eps' (log sum e^{l_i/eps'} - 1).
        Vec scaled(loss_values.size());
        for (std::size_t i = 0; i < loss_values.size(); ++i) scaled[i] = loss_values[i] / ep;
        return ep * (log_sum_exp(scaled) - 1.0) / G;
    }

    double lmin = loss_values[0], lmax = loss_values[0];
    for (double l : loss_values) {
        lmin = std::min(lmin, l);
        lmax = std::max(lmax, l);
    }
    double width = ep / G * (1.0 + std::log(N) + std::log(1.0 / y_tol));

    // phi(y) = sum_i conj_prime(l_i - G y) - 1 with slope for Newton steps.
    // Terms clamped at the domain boundary have zero slope; log-space
    // exponentials keep the far bracket ends finite.
    const double log_u = std::log(div_.dom_upper());
    auto phi_slope = [&](double y, double* slope) {
        double s = 0.0, ds = 0.0;
        for (double l : loss_values) {
            const double v = l - G * y;
            const double lt = log_conj_prime(v);
            const double t = lt > 690.0 ? 1e300 : std::exp(lt);
            s += t;
            if (slope && lt < log_u - 1e-12) ds += -G * t / (div_.psi_second(t) * t + ep);
        }
        if (slope) *slope = ds;
        return s - 1.0;
    };

    for (int attempt = 0; attempt < 2; ++attempt) {
        double lo = lmin / G - width;
        double hi = lmax / G + width;
        double plo = phi_slope(lo, nullptr), phi_hi = phi_slope(hi, nullptr);
        if (std::abs(plo) <= y_tol) return lo;
        if (std::abs(phi_hi) <= y_tol) return hi;
        if (plo > 0.0 && phi_hi < 0.0) {
            double y = hint && *hint > lo && *hint < hi ? *hint : 0.5 * (lo + hi);
            for (int it = 0; it < 240; ++it) {
                double slope;
                const double pm = phi_slope(y, &slope);
                if (std::abs(pm) <= y_tol) return y;
                if (pm > 0.0) lo = y; else hi = y;
                // Newton on even rounds, bisection on odd rounds: quadratic
                // convergence near the root with a guaranteed bracket shrink.
                double ynew = 0.5 * (lo + hi);
                if (it % 2 == 0 && slope < 0.0) {
                    const double cand = y - pm / slope;
                    if (cand > lo && cand < hi) ynew = cand;
                }
                y = ynew;
                if (hi - lo <= 1e-16 * (1.0 + std::abs(hi))) return 0.5 * (lo + hi);
            }
            return 0.5 * (lo + hi);
        }
        width *= 2.0;  // widen once, then error
    }
    throw ConjugateSolveError("solve_y_star: bracket failure", lmin / G - width,
                              lmax / G + width);
}

double RegularizedConjugate::upsilon_value(std::span<const double> loss_values, double G,
                                           double y, double lambda_term) const {
    double s = 0.0;
    for (double l : loss_values) s += conj(l - G * y);
    return s + G * y + lambda_term;
}

}  // namespace dro
