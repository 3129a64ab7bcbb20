#pragma once

// Test-only independent oracles: exhaustive grids, dense recomputation,
// finite differences and Monte-Carlo summaries. These deliberately avoid the
// library's estimator code paths.

#include <cmath>
#include <functional>
#include <vector>

#include "dro/problem.hpp"

namespace dro::test {

// Exhaustive minimization over a 2-D disk grid (optionally intersected with a
// second disk), step = radius / steps_per_radius.
inline double grid_min_disk_2d(const std::function<double(const Vec&)>& f, const Vec& center,
                               double radius, int steps_per_radius,
                               const Vec* clip_center = nullptr, double clip_radius = 0.0,
                               Vec* argmin = nullptr) {
    const double h = radius / steps_per_radius;
    double best = kInf;
    Vec x(2), bx(2);
    for (int i = -steps_per_radius; i <= steps_per_radius; ++i) {
        for (int j = -steps_per_radius; j <= steps_per_radius; ++j) {
            const double dx = i * h, dy = j * h;
            if (dx * dx + dy * dy > radius * radius * (1 + 1e-12)) continue;
            x[0] = center[0] + dx;
            x[1] = center[1] + dy;
            if (clip_center && dist(x, *clip_center) > clip_radius) continue;
            const double v = f(x);
            if (v < best) {
                best = v;
                bx = x;
            }
        }
    }
    if (argmin) *argmin = bx;
    return best;
}

// max over the simplex grid of q1 + q2 + q3 = 1 of q.l - sum psi(q_i).
inline double simplex_grid_max_3(const std::function<double(const Vec&)>& objective,
                                 int steps) {
    double best = -kInf;
    Vec q(3);
    for (int i = 0; i <= steps; ++i) {
        for (int j = 0; j <= steps - i; ++j) {
            q[0] = static_cast<double>(i) / steps;
            q[1] = static_cast<double>(j) / steps;
            q[2] = 1.0 - q[0] - q[1];
            if (q[2] < -1e-12) continue;
            if (q[2] < 0.0) q[2] = 0.0;
            best = std::max(best, objective(q));
        }
    }
    return best;
}

// Penalized f-divergence primal value on the 3-simplex grid.
inline double fdiv_simplex_grid_value(const Divergence& div, const Vec& losses, int steps) {
    return simplex_grid_max_3(
        [&](const Vec& q) {
            double s = 0.0;
            for (int i = 0; i < 3; ++i) {
                const double p = div.psi(q[i]);
                if (p >= Divergence::kInfDom()) return -kInf;
                s += q[i] * losses[i] - p;
            }
            return s;
        },
        steps);
}

// Constrained f-divergence value (D_f ball of size 1) on the 3-simplex grid.
inline double fdiv_constrained_simplex_value(const Divergence& div, const Vec& losses,
                                             int steps) {
    const double N = 3.0;
    return simplex_grid_max_3(
        [&](const Vec& q) {
            double d = 0.0;
            for (int i = 0; i < 3; ++i) {
                double f;
                switch (div.kind) {
                    case Divergence::Kind::cvar:
                        f = N * q[i] <= 1.0 / div.alpha + 1e-12 ? 0.0 : kInf;
                        break;
                    case Divergence::Kind::chi2: {
                        const double s = N * q[i] - 1.0;
                        f = s * s / (2.0 * div.rho);
                        break;
                    }
                    default:
                        f = 0.0;
                }
                d += f / N;
            }
            if (d > 1.0 + 1e-12) return -kInf;
            double s = 0.0;
            for (int i = 0; i < 3; ++i) s += q[i] * losses[i];
            return s;
        },
        steps);
}

// Welford mean/variance accumulator.
struct MeanVar {
    std::int64_t n = 0;
    double mean = 0.0, m2 = 0.0;
    void add(double x) {
        ++n;
        const double d = x - mean;
        mean += d / static_cast<double>(n);
        m2 += d * (x - mean);
    }
    double variance() const { return n > 1 ? m2 / static_cast<double>(n - 1) : 0.0; }
    double se() const { return std::sqrt(variance() / static_cast<double>(n)); }
};

// Componentwise Monte-Carlo summary of a vector estimator.
struct VecMeanVar {
    std::vector<MeanVar> comp;
    void add(const Vec& v) {
        if (comp.empty()) comp.resize(v.size());
        for (std::size_t i = 0; i < v.size(); ++i) comp[i].add(v[i]);
    }
    bool within_se(const Vec& target, double sigmas) const {
        for (std::size_t i = 0; i < comp.size(); ++i) {
            const double se = comp[i].se();
            if (std::abs(comp[i].mean - target[i]) > sigmas * std::max(se, 1e-14)) return false;
        }
        return true;
    }
};

// Central finite differences of a scalar function of (x, y).
inline Vec central_diff_xy(const std::function<double(const Vec&, double)>& f, const Vec& x,
                           double y, double h) {
    Vec g(x.size() + 1);
    Vec xp = x, xm = x;
    for (std::size_t i = 0; i < x.size(); ++i) {
        xp[i] = x[i] + h;
        xm[i] = x[i] - h;
        g[i] = (f(xp, y) - f(xm, y)) / (2.0 * h);
        xp[i] = x[i];
        xm[i] = x[i];
    }
    g[x.size()] = (f(x, y + h) - f(x, y - h)) / (2.0 * h);
    return g;
}

// Two-sample Kolmogorov-Smirnov distance and the alpha=0.1 threshold.
inline double ks_distance(std::vector<double> a, std::vector<double> b) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    double d = 0.0;
    std::size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        if (a[i] <= b[j]) ++i; else ++j;
        const double fa = static_cast<double>(i) / a.size();
        const double fb = static_cast<double>(j) / b.size();
        d = std::max(d, std::abs(fa - fb));
    }
    return d;
}
inline double ks_threshold_10(std::size_t n, std::size_t m) {
    return 1.22 * std::sqrt((static_cast<double>(n) + m) / (static_cast<double>(n) * m));
}

// Random point in the ball of radius r about c.
inline Vec random_in_ball(Rng& rng, const Vec& c, double r) {
    Vec x(c.size());
    double n2 = 0.0;
    for (double& v : x) {
        v = rng.normal();
        n2 += v * v;
    }
    const double u = std::pow(rng.uniform_pos(), 1.0 / c.size());
    const double s = r * u / std::sqrt(n2);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = c[i] + s * x[i];
    return x;
}

}  // namespace dro::test
