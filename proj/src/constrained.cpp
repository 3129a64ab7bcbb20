#include "dro/constrained.hpp"

#include <cmath>
#include <map>

namespace dro {

double one_dim_minimizer(const std::function<double(double)>& oracle, double lo, double hi,
                         double tilde_eps, double lipschitz_B, OneDimStats* stats) {
    if (hi < lo) std::swap(lo, hi);
    constexpr double kInvPhi = 0.6180339887498949;
    std::map<double, double> seen;
    auto query = [&](double y) {
        auto it = seen.find(y);
        if (it != seen.end()) return it->second;
        const double v = oracle(y);
        if (stats) ++stats->oracle_calls;
        seen.emplace(y, v);
        return v;
    };

    const double floor_width = lipschitz_B > 0.0 ? tilde_eps / lipschitz_B : 0.0;
    double a = lo, b = hi;
    double y1 = b - kInvPhi * (b - a);
    double y2 = a + kInvPhi * (b - a);
    double f1 = query(y1), f2 = query(y2);
    const int max_rounds =
        64 + static_cast<int>(std::ceil(std::log(std::max(
                                            (b - a) * std::max(lipschitz_B, 1.0) /
                                                std::max(tilde_eps, 1e-300),
                                            2.0)) /
                                        std::log(1.0 / kInvPhi)));
    for (int round = 0; round < max_rounds && b - a > floor_width; ++round) {
        if (f1 <= f2 - 2.0 * tilde_eps) {
            b = y2;
            y2 = y1;
            f2 = f1;
            y1 = b - kInvPhi * (b - a);
            f1 = query(y1);
        } else if (f2 <= f1 - 2.0 * tilde_eps) {
            a = y1;
            y1 = y2;
            f1 = f2;
            y2 = a + kInvPhi * (b - a);
            f2 = query(y2);
        } else {
            break;  // comparison margin too small: both probes are near-minimal
        }
    }
    if (b - a <= floor_width && b - a < hi - lo) return 0.5 * (a + b);
    double best_y = y1, best_v = f1;
    for (const auto& [y, v] : seen)
        if (v < best_v) { best_v = v; best_y = y; }
    return best_y;
}

ConstrainedResult solve_constrained_fdiv(const ProblemSpec& problem, double eps, Rng& rng,
                                         const ConstrainedOptions& opts) {
    if (problem.is_group())
        throw std::invalid_argument("constrained driver applies to f-divergence problems");
    const LossEnsemble& ens = problem.ensemble;
    const double Bl = ens.loss_bound_Bl();
    const Divergence& base_div = problem.fdiv().divergence;
    const double Bf = base_div.f_bound;
    if (!std::isfinite(Bl) || !std::isfinite(Bf))
        throw std::invalid_argument("constrained driver requires bounded losses and f");

    const double H = std::max(2.0, Bf * Bl / eps);
    const int rep = std::max(
        1, static_cast<int>(std::ceil(std::log2(opts.rep_constant * std::log2(H)))));
    const double tilde_eps = eps / 5.0;

    ConstrainedResult res;
    double best_val = kInf;

    auto oracle = [&](double nu) {
        ProblemSpec sub;
        sub.ensemble = problem.ensemble;  // shares no counter with the caller's run
        FdivVariant fv = problem.fdiv();
        fv.divergence.nu = nu;
        fv.constrained = false;
        sub.variant = fv;
        sub.target_eps = tilde_eps;

        double val = kInf;
        Vec best_x;
        for (int r = 0; r < rep; ++r) {
            Rng sub_rng = rng.fork("constrained-solve");
            SolveResult sr = solve(sub, opts.inner_method, tilde_eps, sub_rng, opts.solve);
            ++res.inner_solves;
            // Exact metered evaluation of the penalized objective at the
            // candidate: an upper bound on h(nu) with probability 1.
            const double v =
                dro_objective_fdiv(sub.ensemble, fv.divergence, sr.x) + nu;
            if (v < val) {
                val = v;
                best_x = std::move(sr.x);
            }
        }
        if (val < best_val) {
            best_val = val;
            res.x = best_x;
            res.nu = nu;
        }
        return val;
    };

    OneDimStats stats;
    const double nu_star = one_dim_minimizer(oracle, 0.0, Bl, tilde_eps, Bf, &stats);
    res.oracle_queries = stats.oracle_calls;
    (void)nu_star;  // the accepted point is the best value seen across queries
    res.accepted_value = best_val;
    return res;
}

}  // namespace dro
