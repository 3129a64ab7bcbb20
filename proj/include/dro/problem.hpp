#pragma once

#include <atomic>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "dro/divergence.hpp"
#include "dro/rng.hpp"
#include "dro/vec.hpp"

namespace dro {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Evaluation meter. Incremented exactly once per oracle call; relaxed atomics
// so concurrent pure-function evaluation stays well defined.
class OracleCounter {
public:
    OracleCounter() = default;
    OracleCounter(const OracleCounter& o)
        : value_(o.value_.load(std::memory_order_relaxed)),
          subgrad_(o.subgrad_.load(std::memory_order_relaxed)) {}
    OracleCounter& operator=(const OracleCounter& o) {
        value_.store(o.value_.load(std::memory_order_relaxed), std::memory_order_relaxed);
        subgrad_.store(o.subgrad_.load(std::memory_order_relaxed), std::memory_order_relaxed);
        return *this;
    }

    void add_value(std::int64_t k = 1) { value_.fetch_add(k, std::memory_order_relaxed); }
    void add_subgrad(std::int64_t k = 1) { subgrad_.fetch_add(k, std::memory_order_relaxed); }

    std::int64_t value_evals() const { return value_.load(std::memory_order_relaxed); }
    std::int64_t subgrad_evals() const { return subgrad_.load(std::memory_order_relaxed); }
    std::int64_t total() const { return value_evals() + subgrad_evals(); }

private:
    std::atomic<std::int64_t> value_{0};
    std::atomic<std::int64_t> subgrad_{0};
};

struct EvalCounts {
    std::int64_t value_evals = 0;
    std::int64_t subgrad_evals = 0;
    std::int64_t total() const { return value_evals + subgrad_evals; }
    EvalCounts operator-(const EvalCounts& o) const {
        return {value_evals - o.value_evals, subgrad_evals - o.subgrad_evals};
    }
    EvalCounts& operator+=(const EvalCounts& o) {
        value_evals += o.value_evals;
        subgrad_evals += o.subgrad_evals;
        return *this;
    }
};

enum class LossFamily { linear, hinge, huber };

// One convex loss on R^d: linear a'x+b, hinge max(0, a'x+b), or a Huber
// smoothing of |a'x+b| with transition width delta.
struct Loss {
    LossFamily family = LossFamily::linear;
    Vec a;
    double b = 0.0;
    double delta = 1.0;  // huber only

    double value(std::span<const double> x) const {
        const double s = dot(a, x) + b;
        switch (family) {
            case LossFamily::linear: return s;
            case LossFamily::hinge: return s > 0.0 ? s : 0.0;
            case LossFamily::huber: {
                const double z = std::abs(s);
                return z <= delta ? 0.5 * s * s / delta : z - 0.5 * delta;
            }
        }
        return 0.0;
    }

    void subgrad_into(std::span<const double> x, Vec& g) const {
        const double s = dot(a, x) + b;
        double c = 1.0;
        switch (family) {
            case LossFamily::linear: break;
            case LossFamily::hinge: c = s > 0.0 ? 1.0 : 0.0; break;
            case LossFamily::huber: c = std::clamp(s / delta, -1.0, 1.0); break;
        }
        g.resize(a.size());
        for (std::size_t i = 0; i < a.size(); ++i) g[i] = c * a[i];
    }

    // Analytic constants over a ball of radius rad around center.
    double lipschitz() const { return norm(a); }
    double smoothness() const {
        switch (family) {
            case LossFamily::linear: return 0.0;
            case LossFamily::hinge: return kInf;
            case LossFamily::huber: return norm2(a) / delta;
        }
        return kInf;
    }
    double bound(std::span<const double> center, double rad) const {
        const double m = std::abs(dot(a, center) + b) + norm(a) * rad;
        return m;  // valid for all three families (|value| <= |s|)
    }
};

// The feasible set X: Euclidean ball of radius R/2 about `center`.
struct Domain {
    Vec center;
    double radius = 1.0;

    bool contains(std::span<const double> x, double tol = 1e-9) const {
        const double cap = radius * (1.0 + tol) + tol;
        return dist2(x, center) <= cap * cap;
    }
    void project(Vec& x) const { project_ball(x, center, radius); }
};

// N convex loss oracles behind an evaluation meter, with the instance
// constants G (Lipschitz), R (domain diameter), L (mean-square smoothness,
// +inf if none) and B_l (uniform loss bound, +inf if none).
class LossEnsemble {
public:
    LossEnsemble() = default;
    LossEnsemble(std::vector<Loss> losses, Domain domain, double G, double R, double L,
                 double Bl)
        : losses_(std::move(losses)), domain_(std::move(domain)), lipschitz_G_(G),
          diameter_R_(R), smoothness_L_(L), loss_bound_Bl_(Bl) {}

    static LossEnsemble with_analytic_constants(std::vector<Loss> losses, Domain domain);

    std::size_t n() const { return losses_.size(); }
    std::size_t dim() const { return domain_.center.size(); }
    const Domain& domain() const { return domain_; }
    double lipschitz_G() const { return lipschitz_G_; }
    double diameter_R() const { return diameter_R_; }
    double smoothness_L() const { return smoothness_L_; }
    double loss_bound_Bl() const { return loss_bound_Bl_; }
    const std::vector<Loss>& losses() const { return losses_; }

    // Metered oracles.
    double eval_loss(std::size_t i, std::span<const double> x) const;
    void eval_subgrad_into(std::size_t i, std::span<const double> x, Vec& g) const;
    Vec eval_subgrad(std::size_t i, std::span<const double> x) const {
        Vec g;
        eval_subgrad_into(i, x, g);
        return g;
    }

    // Unmetered access, for measurement/reporting code only.
    double value_unmetered(std::size_t i, std::span<const double> x) const {
        return losses_[i].value(x);
    }

    const OracleCounter& counter() const { return counter_; }
    EvalCounts counts() const { return {counter_.value_evals(), counter_.subgrad_evals()}; }

private:
    void check_query(std::size_t i, std::span<const double> x) const;

    std::vector<Loss> losses_;
    Domain domain_;
    double lipschitz_G_ = 1.0;
    double diameter_R_ = 1.0;
    double smoothness_L_ = kInf;
    double loss_bound_Bl_ = kInf;
    mutable OracleCounter counter_;
};

// M row-stochastic sparse weight vectors over [N].
class GroupWeights {
public:
    using Row = std::vector<std::pair<std::uint32_t, double>>;

    GroupWeights() = default;
    GroupWeights(std::size_t n, std::vector<Row> rows);

    std::size_t m() const { return rows_.size(); }
    std::size_t n() const { return n_; }
    const Row& row(std::size_t i) const { return rows_[i]; }
    bool all_singleton() const { return all_singleton_; }

    // Draw j ~ w_i by prefix-sum inversion.
    std::uint32_t sample_member(std::size_t i, Rng& rng) const;

private:
    std::size_t n_ = 0;
    std::vector<Row> rows_;
    std::vector<std::vector<double>> prefix_;
    bool all_singleton_ = true;
};

struct GroupVariant {
    GroupWeights groups;
};

struct FdivVariant {
    Divergence divergence;
    bool constrained = false;
};

struct ProblemSpec {
    LossEnsemble ensemble;
    std::variant<GroupVariant, FdivVariant> variant;
    double target_eps = 0.1;

    bool is_group() const { return std::holds_alternative<GroupVariant>(variant); }
    const GroupWeights& groups() const { return std::get<GroupVariant>(variant).groups; }
    const FdivVariant& fdiv() const { return std::get<FdivVariant>(variant); }

    // Smoothing scale: eps / (2 log M) for groups, eps / (2 log N) otherwise,
    // with the count floored at 2 to stay finite.
    double eps_prime(double eps) const;
    double ball_radius(double eps) const { return eps_prime(eps) / ensemble.lipschitz_G(); }

    void validate() const;
};

// ---- exact (full-pass) objective evaluation ----

// Sum_j w_ij l_j(x); one metered value evaluation per nonzero weight.
double group_loss_exact(const LossEnsemble& ens, const GroupWeights& g, std::size_t i,
                        std::span<const double> x);

// max_i of the group losses, full pass.
double dro_objective_group(const LossEnsemble& ens, const GroupWeights& g,
                           std::span<const double> x);

// Group softmax eps' * log sum_i exp(L_i(x)/eps'), full pass.
double group_softmax_objective(const LossEnsemble& ens, const GroupWeights& g,
                               std::span<const double> x, double eps_prime);

// Penalized f-divergence objective max_{q in simplex} { q'l(x) - sum psi(q_i) },
// via the dual in y. Exact closed/bisection forms per divergence kind.
double dro_objective_fdiv(const LossEnsemble& ens, const Divergence& div,
                          std::span<const double> x);

// Entropy-smoothed version min_y Upsilon_eps(x, y), full pass.
double dro_objective_fdiv_smoothed(const LossEnsemble& ens, const RegularizedConjugate& rc,
                                   std::span<const double> x);

// Exact penalized objective given precomputed loss values (no metering).
double fdiv_objective_from_values(const Divergence& div, std::span<const double> losses);

// Unmetered counterparts used by measurement-only code paths.
double dro_objective_group_unmetered(const LossEnsemble& ens, const GroupWeights& g,
                                     std::span<const double> x);
double group_softmax_objective_unmetered(const LossEnsemble& ens, const GroupWeights& g,
                                         std::span<const double> x, double eps_prime);
double dro_objective_fdiv_unmetered(const LossEnsemble& ens, const Divergence& div,
                                    std::span<const double> x);
double dro_objective_fdiv_smoothed_unmetered(const LossEnsemble& ens,
                                             const RegularizedConjugate& rc,
                                             std::span<const double> x);

// Raw DRO objective of the problem (group max or penalized f-div), unmetered.
double raw_objective_unmetered(const ProblemSpec& p, std::span<const double> x);

}  // namespace dro
