#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "dro/problem.hpp"
#include "oracles.hpp"

using namespace dro;

namespace {

LossEnsemble two_loss_ensemble() {
    // l_0 = <0, x>, l_1 = |x_1| smoothed? No: hinge pair gives |x_1| via max of +-x1.
    std::vector<Loss> losses;
    losses.push_back({LossFamily::linear, {0.0, 0.0}, 0.0, 1.0});
    losses.push_back({LossFamily::hinge, {1.0, 0.0}, 0.0, 1.0});
    return LossEnsemble::with_analytic_constants(std::move(losses), {{0.0, 0.0}, 1.0});
}

ProblemSpec random_group_problem(Rng& rng, std::size_t n, std::size_t m, std::size_t dim) {
    std::vector<Loss> losses;
    for (std::size_t i = 0; i < n; ++i) {
        Vec a(dim);
        for (double& v : a) v = rng.uniform(-1.0, 1.0);
        losses.push_back({LossFamily::linear, a, rng.uniform(-0.3, 0.3), 1.0});
    }
    ProblemSpec p;
    p.ensemble = LossEnsemble::with_analytic_constants(std::move(losses), {Vec(dim, 0.0), 1.0});
    std::vector<GroupWeights::Row> rows(m);
    for (std::size_t i = 0; i < m; ++i) {
        GroupWeights::Row row;
        double s = 0.0;
        const std::size_t k = 1 + rng.uniform_index(3);
        for (std::size_t t = 0; t < k; ++t) {
            row.emplace_back(static_cast<std::uint32_t>(rng.uniform_index(n)),
                             0.25 + rng.uniform());
            s += row.back().second;
        }
        long double acc = 0.0L;
        for (auto& [j, w] : row) {
            w /= s;
            acc += w;
        }
        row.back().second += 1.0 - static_cast<double>(acc);
        rows[i] = std::move(row);
    }
    p.variant = GroupVariant{GroupWeights(n, std::move(rows))};
    p.target_eps = 0.1;
    return p;
}

}  // namespace

TEST_CASE("eval_loss values and counting contract") {
    LossEnsemble ens = two_loss_ensemble();
    Vec x{0.3, -0.2};
    CHECK(ens.eval_loss(0, x) == doctest::Approx(0.0));
    CHECK(ens.eval_loss(1, x) == doctest::Approx(0.3));
    const auto before = ens.counter().value_evals();
    ens.eval_loss(0, x);
    ens.eval_loss(1, x);
    CHECK(ens.counter().value_evals() == before + 2);
}

TEST_CASE("eval_loss rejects bad queries before counting") {
    LossEnsemble ens = two_loss_ensemble();
    Vec outside{5.0, 0.0};
    CHECK_THROWS_AS(ens.eval_loss(0, outside), std::domain_error);
    CHECK_THROWS_AS(ens.eval_loss(7, Vec{0.0, 0.0}), std::out_of_range);
    CHECK(ens.counter().value_evals() == 0);
}

TEST_CASE("value/subgradient pair counts as two") {
    LossEnsemble ens = two_loss_ensemble();
    Vec x{0.1, 0.0};
    ens.eval_loss(1, x);
    ens.eval_subgrad(1, x);
    CHECK(ens.counter().value_evals() == 1);
    CHECK(ens.counter().subgrad_evals() == 1);
    CHECK(ens.counter().total() == 2);
}

TEST_CASE("group_loss_exact: singleton, uniform pair, dense cross-check") {
    Rng rng(7);
    ProblemSpec p = random_group_problem(rng, 6, 3, 2);
    const LossEnsemble& ens = p.ensemble;

    GroupWeights singleton(2, {{{1u, 1.0}}});
    LossEnsemble two = two_loss_ensemble();
    Vec x{0.4, 0.1};
    CHECK(group_loss_exact(two, singleton, 0, x) ==
          doctest::Approx(two.value_unmetered(1, x)));

    // Uniform pair with values 1 and 3 averages to 2.
    std::vector<Loss> pair;
    pair.push_back({LossFamily::linear, {0.0}, 1.0, 1.0});
    pair.push_back({LossFamily::linear, {0.0}, 3.0, 1.0});
    LossEnsemble consts =
        LossEnsemble::with_analytic_constants(std::move(pair), {{0.0}, 1.0});
    GroupWeights uniform(2, {{{0u, 0.5}, {1u, 0.5}}});
    CHECK(group_loss_exact(consts, uniform, 0, Vec{0.0}) == doctest::Approx(2.0));

    // Random sparse rows match a dense dot product.
    for (int trial = 0; trial < 20; ++trial) {
        Vec pt = test::random_in_ball(rng, Vec{0.0, 0.0}, 0.9);
        for (std::size_t i = 0; i < p.groups().m(); ++i) {
            Vec dense(ens.n(), 0.0);
            for (const auto& [j, w] : p.groups().row(i)) dense[j] += w;
            double expect = 0.0;
            for (std::size_t j = 0; j < ens.n(); ++j)
                expect += dense[j] * ens.value_unmetered(j, pt);
            CHECK(group_loss_exact(ens, p.groups(), i, pt) ==
                  doctest::Approx(expect).epsilon(1e-12));
        }
    }
}

TEST_CASE("dro_objective_group: degenerate and brute-force checks") {
    // M = 1 equals the single group loss.
    std::vector<Loss> one;
    one.push_back({LossFamily::linear, {1.0, 0.0}, 0.0, 1.0});
    LossEnsemble ens = LossEnsemble::with_analytic_constants(std::move(one), {{0.0, 0.0}, 1.0});
    GroupWeights g1(1, {{{0u, 1.0}}});
    Vec x{0.2, 0.0};
    CHECK(dro_objective_group(ens, g1, x) ==
          doctest::Approx(group_loss_exact(ens, g1, 0, x)));

    // Two constant groups 0.2 / 0.7.
    std::vector<Loss> consts;
    consts.push_back({LossFamily::linear, {0.0}, 0.2, 1.0});
    consts.push_back({LossFamily::linear, {0.0}, 0.7, 1.0});
    LossEnsemble cens =
        LossEnsemble::with_analytic_constants(std::move(consts), {{0.0}, 1.0});
    GroupWeights g2(2, {{{0u, 1.0}}, {{1u, 1.0}}});
    CHECK(dro_objective_group(cens, g2, Vec{0.0}) == doctest::Approx(0.7));

    // Random instance vs direct enumeration.
    Rng rng(11);
    ProblemSpec p = random_group_problem(rng, 5, 4, 2);
    for (int t = 0; t < 10; ++t) {
        Vec pt = test::random_in_ball(rng, Vec{0.0, 0.0}, 0.9);
        double best = -kInf;
        for (std::size_t i = 0; i < p.groups().m(); ++i)
            best = std::max(best,
                            group_loss_exact(p.ensemble, p.groups(), i, pt));
        CHECK(dro_objective_group(p.ensemble, p.groups(), pt) == doctest::Approx(best));
    }
}

TEST_CASE("dro_objective_fdiv: softmax consistency, N=1, cvar vs simplex grid") {
    Rng rng(3);
    // psi = 0 with entropy: the smoothed dual value equals the softmax.
    std::vector<Loss> losses;
    for (int i = 0; i < 4; ++i) {
        Vec a{rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
        losses.push_back({LossFamily::linear, a, rng.uniform(-0.2, 0.2), 1.0});
    }
    LossEnsemble ens =
        LossEnsemble::with_analytic_constants(std::move(losses), {{0.0, 0.0}, 1.0});
    const double ep = 0.05;
    RegularizedConjugate rc(Divergence{.kind = Divergence::Kind::zero, .n = 4}, ep);
    for (int t = 0; t < 10; ++t) {
        Vec x = test::random_in_ball(rng, Vec{0.0, 0.0}, 0.9);
        Vec scaled(ens.n());
        for (std::size_t i = 0; i < ens.n(); ++i) scaled[i] = ens.value_unmetered(i, x) / ep;
        const double softmax = ep * log_sum_exp(scaled);
        CHECK(dro_objective_fdiv_smoothed_unmetered(ens, rc, x) ==
              doctest::Approx(softmax).epsilon(1e-9));
    }

    // N = 1: the simplex is a point; penalized value is l_1 - psi(1).
    std::vector<Loss> single;
    single.push_back({LossFamily::linear, {1.0}, 0.1, 1.0});
    LossEnsemble sens =
        LossEnsemble::with_analytic_constants(std::move(single), {{0.0}, 1.0});
    Divergence dz{.kind = Divergence::Kind::zero, .n = 1};
    CHECK(dro_objective_fdiv_unmetered(sens, dz, Vec{0.3}) == doctest::Approx(0.4));

    // CVaR on N = 3 random losses vs the simplex grid.
    std::vector<Loss> three;
    for (int i = 0; i < 3; ++i) {
        Vec a{rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
        three.push_back({LossFamily::linear, a, rng.uniform(0.0, 0.4), 1.0});
    }
    LossEnsemble tens =
        LossEnsemble::with_analytic_constants(std::move(three), {{0.0, 0.0}, 1.0});
    Divergence cvar = Divergence::parse("cvar:alpha=0.5", 3, 1.0);
    for (int t = 0; t < 5; ++t) {
        Vec x = test::random_in_ball(rng, Vec{0.0, 0.0}, 0.9);
        Vec l(3);
        for (int i = 0; i < 3; ++i) l[i] = tens.value_unmetered(i, x);
        const double grid = test::fdiv_simplex_grid_value(cvar, l, 600);
        CHECK(std::abs(dro_objective_fdiv_unmetered(tens, cvar, x) - grid) < 1e-3);
    }
}

TEST_CASE("counting exactness: replay yields identical counts") {
    Rng rng(21);
    ProblemSpec p1 = random_group_problem(rng, 5, 3, 2);
    Rng rng2(21);
    ProblemSpec p2 = random_group_problem(rng2, 5, 3, 2);
    Rng ra(5), rb(5);
    for (int t = 0; t < 50; ++t) {
        Vec xa = test::random_in_ball(ra, Vec{0.0, 0.0}, 0.9);
        Vec xb = test::random_in_ball(rb, Vec{0.0, 0.0}, 0.9);
        dro_objective_group(p1.ensemble, p1.groups(), xa);
        dro_objective_group(p2.ensemble, p2.groups(), xb);
    }
    CHECK(p1.ensemble.counter().value_evals() == p2.ensemble.counter().value_evals());
    CHECK(p1.ensemble.counter().subgrad_evals() == p2.ensemble.counter().subgrad_evals());
}

TEST_CASE("entropy sandwich for psi = 0 smoothing") {
    Rng rng(13);
    std::vector<Loss> losses;
    const std::size_t n = 6;
    for (std::size_t i = 0; i < n; ++i) {
        Vec a{rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
        losses.push_back({LossFamily::linear, a, rng.uniform(-0.2, 0.2), 1.0});
    }
    LossEnsemble ens =
        LossEnsemble::with_analytic_constants(std::move(losses), {{0.0, 0.0}, 1.0});
    const double ep = 0.02;
    RegularizedConjugate rc(Divergence{.kind = Divergence::Kind::zero, .n = n}, ep);
    for (int t = 0; t < 40; ++t) {
        Vec x = test::random_in_ball(rng, Vec{0.0, 0.0}, 0.95);
        double mx = -kInf;
        for (std::size_t i = 0; i < n; ++i) mx = std::max(mx, ens.value_unmetered(i, x));
        const double sm = dro_objective_fdiv_smoothed_unmetered(ens, rc, x);
        CHECK(sm >= mx - 1e-9);
        CHECK(sm <= mx + ep * std::log(static_cast<double>(n)) + 1e-9);
    }
}

TEST_CASE("group objective convexity probes") {
    Rng rng(17);
    ProblemSpec p = random_group_problem(rng, 6, 3, 2);
    for (int t = 0; t < 200; ++t) {
        Vec x = test::random_in_ball(rng, Vec{0.0, 0.0}, 0.9);
        Vec y = test::random_in_ball(rng, Vec{0.0, 0.0}, 0.9);
        const double th = rng.uniform();
        Vec z(2);
        for (int i = 0; i < 2; ++i) z[i] = th * x[i] + (1.0 - th) * y[i];
        const double fz = dro_objective_group_unmetered(p.ensemble, p.groups(), z);
        const double fx = dro_objective_group_unmetered(p.ensemble, p.groups(), x);
        const double fy = dro_objective_group_unmetered(p.ensemble, p.groups(), y);
        CHECK(fz <= th * fx + (1.0 - th) * fy + 1e-9);
    }
}

TEST_CASE("ball intersection projection is an actual projection") {
    Rng rng(29);
    for (int t = 0; t < 200; ++t) {
        Vec c1{rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5)};
        Vec c2{rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5)};
        const double r1 = 0.3 + 0.5 * rng.uniform();
        double r2 = 0.3 + 0.5 * rng.uniform();
        if (dist(c1, c2) > r1 + r2) r2 = dist(c1, c2) - r1 + 0.05;
        Vec z{rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0)};
        Vec proj = z;
        project_ball_intersection(proj, c1, r1, c2, r2);
        CHECK(dist(proj, c1) <= r1 * (1 + 1e-9) + 1e-9);
        CHECK(dist(proj, c2) <= r2 * (1 + 1e-9) + 1e-9);
        // No grid point of the intersection is closer to z.
        const double dz = dist(proj, z);
        for (int i = 0; i < 400; ++i) {
            Vec w = test::random_in_ball(rng, c1, r1);
            if (dist(w, c2) > r2) continue;
            CHECK(dist(w, z) >= dz - 1e-7);
        }
    }
}
