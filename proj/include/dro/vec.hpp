#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace dro {

using Vec = std::vector<double>;

inline double dot(std::span<const double> a, std::span<const double> b) {
    assert(a.size() == b.size());
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm2(std::span<const double> a) { return dot(a, a); }

inline double norm(std::span<const double> a) { return std::sqrt(norm2(a)); }

inline double dist2(std::span<const double> a, std::span<const double> b) {
    assert(a.size() == b.size());
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

inline double dist(std::span<const double> a, std::span<const double> b) {
    return std::sqrt(dist2(a, b));
}

// y += alpha * x
inline void axpy(double alpha, std::span<const double> x, Vec& y) {
    assert(x.size() == y.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

inline void scale(Vec& x, double alpha) {
    for (double& v : x) v *= alpha;
}

inline Vec sub(std::span<const double> a, std::span<const double> b) {
    Vec r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] - b[i];
    return r;
}

inline Vec add(std::span<const double> a, std::span<const double> b) {
    Vec r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] + b[i];
    return r;
}

// In-place Euclidean projection onto the ball B_r(c).
inline void project_ball(Vec& x, std::span<const double> c, double r) {
    const double d = dist(x, c);
    if (d <= r) return;
    const double t = r / d;
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = c[i] + t * (x[i] - c[i]);
}

// Euclidean projection onto B_r1(c1) ∩ B_r2(c2). Requires a nonempty
// intersection. If neither single-ball projection is feasible, the optimum
// lies on both boundaries: it is found in closed form on the intersection
// sphere (a (d-2)-sphere inside the hyperplane orthogonal to c2-c1).
inline void project_ball_intersection(Vec& x, std::span<const double> c1, double r1,
                                      std::span<const double> c2, double r2) {
    const double d12 = dist(c1, c2);
    if (d12 > r1 + r2 + 1e-12 * (r1 + r2 + 1.0))
        throw std::invalid_argument("project_ball_intersection: empty intersection");

    Vec cand = x;
    project_ball(cand, c1, r1);
    if (dist(cand, c2) <= r2 * (1.0 + 1e-12)) { x = std::move(cand); return; }
    cand = x;
    project_ball(cand, c2, r2);
    if (dist(cand, c1) <= r1 * (1.0 + 1e-12)) { x = std::move(cand); return; }

    // Both constraints active. Hyperplane offset t along u = (c2-c1)/d12,
    // sphere radius rho about q = c1 + t*u.
    const double t = (d12 * d12 + r1 * r1 - r2 * r2) / (2.0 * d12);
    const double rho2 = r1 * r1 - t * t;
    const double rho = rho2 > 0.0 ? std::sqrt(rho2) : 0.0;
    const std::size_t n = x.size();
    Vec u(n), q(n);
    for (std::size_t i = 0; i < n; ++i) {
        u[i] = (c2[i] - c1[i]) / d12;
        q[i] = c1[i] + t * u[i];
    }
    // Component of x - q orthogonal to u.
    Vec w = sub(x, q);
    const double wu = dot(w, u);
    axpy(-wu, u, w);
    const double wn = norm(w);
    if (wn < 1e-300) {
        // Degenerate: x on the c1-c2 axis; any direction orthogonal to u works.
        Vec e(n, 0.0);
        std::size_t k = 0;
        for (std::size_t i = 1; i < n; ++i)
            if (std::abs(u[i]) < std::abs(u[k])) k = i;
        e[k] = 1.0;
        const double eu = dot(e, u);
        axpy(-eu, u, e);
        const double en = norm(e);
        for (std::size_t i = 0; i < n; ++i) x[i] = q[i] + rho * e[i] / en;
        return;
    }
    for (std::size_t i = 0; i < n; ++i) x[i] = q[i] + rho * w[i] / wn;
}

// log(sum_i exp(v_i)), shift-stabilized.
inline double log_sum_exp(std::span<const double> v) {
    assert(!v.empty());
    const double m = *std::max_element(v.begin(), v.end());
    if (!std::isfinite(m)) return m;
    double s = 0.0;
    for (double x : v) s += std::exp(x - m);
    return m + std::log(s);
}

}  // namespace dro
