#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "sfe/equilibrium.hpp"
#include "sfe/market.hpp"
#include "sfe/rng.hpp"
#include "support/oracles.hpp"

using namespace sfe;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

GameInstance make_game(std::vector<double> beta, double demand, double fuel_price,
                       double alpha_bar = 200.0) {
    GameInstance g;
    g.config.n_suppliers = static_cast<int>(beta.size());
    g.config.beta = std::move(beta);
    g.config.p_min.assign(g.config.beta.size(), 0.0);
    g.config.p_max.assign(g.config.beta.size(), kInf);
    g.config.alpha_bar = alpha_bar;
    g.demand = demand;
    g.fuel_price = fuel_price;
    for (int i = 0; i < g.config.n_suppliers; ++i) g.marginal_set.push_back(i);
    return g;
}

GameInstance random_game(Rng& rng) {
    const int n = 2 + static_cast<int>(rng.next_below(5));
    std::vector<double> beta;
    for (int i = 0; i < n; ++i) beta.push_back(rng.uniform(0.05, 0.5));
    return make_game(std::move(beta), rng.uniform(10.0, 200.0), rng.uniform(5.0, 40.0));
}

// Solves the stacked first-order conditions as a linear system; valid only for
// interior equilibria, used as an independent oracle.
BidVector interior_equilibrium_by_linear_solve(const std::vector<CostParams>& thetas,
                                               const GameInstance& inst) {
    const int n = inst.config.n_suppliers;
    BetaHat bh = make_beta_hat(inst.config, inst.marginal_set);
    std::vector<double> a(static_cast<std::size_t>(n) * n, 0.0);
    std::vector<double> b(n, 0.0);
    for (int i = 0; i < n; ++i) {
        const double bhat = bh.beta_hat[i];
        a[i * n + i] = bhat * bhat - 1.0;
        for (int k = 0; k < n; ++k)
            if (k != i) a[i * n + k] = bhat / (inst.config.beta[k] * bh.inv_beta_sum);
        b[i] = -bhat * inst.demand / bh.inv_beta_sum -
               (1.0 - bhat) * thetas[i].intercept(inst.fuel_price);
    }
    return sfe::testing::solve_dense(std::move(a), std::move(b));
}

const std::vector<CostParams> kTwoSupplierCosts = {{7.0, 0.7}, {5.0, 0.9}};

}  // namespace

TEST_CASE("profit matches hand evaluation on the three-supplier market") {
    GameInstance g = make_game({0.10, 0.12, 0.14}, 75.0, 20.0);
    BidVector bids = {7.0, 6.0, 5.0};
    // Exact rational: ((969-2247)*2200 - 0.05*2200^2*107/107)/107^2 = -3053600/11449.
    CHECK(profit({7.0, 0.7}, bids, g, 0) ==
          doctest::Approx(-3053600.0 / 11449.0).epsilon(1e-12));

    CHECK_THROWS_AS(profit({7.0, 0.7}, bids, g, 3), std::domain_error);
    g.marginal_set = {0, 2};
    CHECK_THROWS_AS(profit({7.0, 0.7}, bids, g, 1), std::domain_error);
}

TEST_CASE("zero dispatch earns zero profit") {
    GameInstance g = make_game({0.10, 0.14}, 50.0, 20.0);
    // alpha_0 chosen so the clearing price equals the bid: P_0 = 0.
    BidVector bids = {12.0, 5.0};
    CHECK(profit({3.0, 0.1}, bids, g, 0) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("hessian is the frozen constant and strictly negative in competition") {
    GameInstance g = make_game({0.10, 0.12, 0.14}, 75.0, 20.0);
    CHECK(profit_hessian(g, 0) == doctest::Approx(-96850.0 / 11449.0).epsilon(1e-12));

    Rng rng(555);
    for (int trial = 0; trial < 100; ++trial) {
        GameInstance r = random_game(rng);
        for (int i : r.marginal_set) CHECK(profit_hessian(r, i) < 0.0);
    }

    GameInstance mono = make_game({0.2}, 30.0, 10.0);
    CHECK(profit_hessian(mono, 0) == doctest::Approx(0.0));
}

TEST_CASE("analytic gradient matches central finite differences") {
    Rng rng(20240817);
    for (int trial = 0; trial < 1000; ++trial) {
        GameInstance g = random_game(rng);
        const int n = g.config.n_suppliers;
        BidVector bids;
        for (int i = 0; i < n; ++i) bids.push_back(rng.uniform(0.0, 50.0));
        CostParams theta{rng.uniform(0.0, 10.0), rng.uniform(0.0, 1.0)};
        const int i = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(n)));

        const double analytic = profit_gradient(theta, bids, g, i);
        auto slice = [&](double a) {
            BidVector p = bids;
            p[i] = a;
            return profit(theta, p, g, i);
        };
        const double numeric = sfe::testing::central_difference(slice, bids[i], 1e-5);
        CHECK(std::fabs(analytic - numeric) <= 1e-6 * std::max(1.0, std::fabs(analytic)));
    }
}

TEST_CASE("gradient is affine in the cost parameters") {
    Rng rng(31337);
    for (int trial = 0; trial < 200; ++trial) {
        GameInstance g = random_game(rng);
        const int n = g.config.n_suppliers;
        BidVector bids;
        for (int i = 0; i < n; ++i) bids.push_back(rng.uniform(0.0, 50.0));
        const int i = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(n)));
        const double theta1 = rng.uniform(0.0, 10.0);
        const double theta2 = rng.uniform(0.0, 1.0);

        BetaHat bh = make_beta_hat(g.config, g.marginal_set);
        const double bhat = bh.beta_hat[static_cast<std::size_t>(i)];
        const double slope = (1.0 - bhat) / g.config.beta[i];

        const double base = profit_gradient({0.0, 0.0}, bids, g, i);
        const double shifted = profit_gradient({theta1, theta2}, bids, g, i);
        CHECK(shifted - base ==
              doctest::Approx(theta1 * slope + theta2 * g.fuel_price * slope).epsilon(1e-9));
    }
}

TEST_CASE("hessian matches second central differences of profit") {
    Rng rng(9090);
    for (int trial = 0; trial < 100; ++trial) {
        GameInstance g = random_game(rng);
        const int n = g.config.n_suppliers;
        BidVector bids;
        for (int i = 0; i < n; ++i) bids.push_back(rng.uniform(0.0, 50.0));
        CostParams theta{rng.uniform(0.0, 10.0), rng.uniform(0.0, 1.0)};
        const int i = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(n)));

        auto slice = [&](double a) {
            BidVector p = bids;
            p[i] = a;
            return profit(theta, p, g, i);
        };
        const double analytic = profit_hessian(g, i);
        const double numeric = sfe::testing::second_central_difference(slice, bids[i], 1e-3);
        CHECK(numeric == doctest::Approx(analytic).epsilon(1e-5));
    }
}

TEST_CASE("best response zeroes the gradient and wins a dense grid search") {
    Rng rng(777);
    for (int trial = 0; trial < 20; ++trial) {
        GameInstance g = random_game(rng);
        const int n = g.config.n_suppliers;
        BidVector bids;
        for (int i = 0; i < n; ++i) bids.push_back(rng.uniform(0.0, 50.0));
        CostParams theta{rng.uniform(0.0, 10.0), rng.uniform(0.0, 1.0)};
        const int i = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(n)));

        const double star = best_response(theta, bids, g, i);
        BidVector at_star = bids;
        at_star[i] = star;
        if (star > 0.0 && star < g.config.alpha_bar)
            CHECK(std::fabs(profit_gradient(theta, at_star, g, i)) <= 1e-9);

        auto slice = [&](double a) {
            BidVector p = bids;
            p[i] = a;
            return profit(theta, p, g, i);
        };
        const double grid_best =
            sfe::testing::grid_argmax(slice, 0.0, g.config.alpha_bar, 0.01);
        CHECK(std::fabs(star - grid_best) <= 0.01 + 1e-9);
    }
}

TEST_CASE("best response clamps at the cap and a monopolist bids the cap") {
    GameInstance g = make_game({0.10, 0.14}, 75.0, 20.0);
    BidVector bids = {7.0, 5.0};
    CHECK(best_response({1e6, 1e6}, bids, g, 0) == 200.0);

    GameInstance mono = make_game({0.2}, 30.0, 10.0);
    CHECK(best_response({3.0, 0.5}, {4.0}, mono, 0) == 200.0);
}

TEST_CASE("symmetric suppliers reach a symmetric equilibrium") {
    GameInstance g = make_game({0.12, 0.12, 0.12, 0.12}, 100.0, 15.0);
    std::vector<CostParams> thetas(4, CostParams{6.0, 0.8});
    BidVector alpha = nash_equilibrium(thetas, g);
    for (int i = 1; i < 4; ++i)
        CHECK(alpha[i] == doctest::Approx(alpha[0]).epsilon(1e-8));
    for (int i = 0; i < 4; ++i)
        CHECK(std::fabs(best_response(thetas[i], alpha, g, i) - alpha[i]) <= 1e-8);
}

TEST_CASE("equilibrium is independent of the starting point") {
    Rng rng(13579);
    for (int trial = 0; trial < 20; ++trial) {
        GameInstance g = random_game(rng);
        const int n = g.config.n_suppliers;
        std::vector<CostParams> thetas;
        for (int i = 0; i < n; ++i)
            thetas.push_back({rng.uniform(2.0, 9.0), rng.uniform(0.3, 1.0)});

        BidVector from_zero = nash_equilibrium(thetas, g, BidVector(n, 0.0));
        BidVector from_cap = nash_equilibrium(thetas, g, BidVector(n, g.config.alpha_bar));
        for (int i = 0; i < n; ++i)
            CHECK(std::fabs(from_zero[i] - from_cap[i]) <= 1e-6);
    }
}

TEST_CASE("two-supplier equilibrium matches the direct linear solve and frozen values") {
    GameInstance g = make_game({0.10, 0.14}, 75.0, 20.0);
    BidVector alpha = nash_equilibrium(kTwoSupplierCosts, g);
    BidVector direct = interior_equilibrium_by_linear_solve(kTwoSupplierCosts, g);

    for (int i = 0; i < 2; ++i) CHECK(std::fabs(alpha[i] - direct[i]) <= 1e-8);
    CHECK(alpha[0] == doctest::Approx(161.0 / 6.0).epsilon(1e-9));
    CHECK(alpha[1] == doctest::Approx(79.0 / 3.0).epsilon(1e-9));

    MarginalClearing mc = marginal_clearing(g.config, alpha, g.marginal_set, g.demand);
    CHECK(mc.price == doctest::Approx(31.0).epsilon(1e-9));
}

TEST_CASE("no profitable unilateral deviation at equilibrium") {
    Rng rng(11223);
    for (int trial = 0; trial < 10; ++trial) {
        GameInstance g = random_game(rng);
        const int n = g.config.n_suppliers;
        std::vector<CostParams> thetas;
        for (int i = 0; i < n; ++i)
            thetas.push_back({rng.uniform(2.0, 9.0), rng.uniform(0.3, 1.0)});
        BidVector alpha = nash_equilibrium(thetas, g);

        for (int i = 0; i < n; ++i) {
            const double base = profit(thetas[i], alpha, g, i);
            for (double delta : {0.01, 0.1, 0.5, 1.0}) {
                for (double sign : {-1.0, 1.0}) {
                    BidVector dev = alpha;
                    dev[i] = std::clamp(alpha[i] + sign * delta, 0.0, g.config.alpha_bar);
                    CHECK(base >= profit(thetas[i], dev, g, i) - 1e-6);
                }
            }
        }
    }
}

TEST_CASE("two-supplier equilibrium totals match the hand-solved instances") {
    struct Case {
        double demand, fuel_price, total_profit;
    };
    // Closed-form solutions of the stacked first-order conditions.
    const Case cases[] = {
        {45.0, 8.0, 181.75},
        {75.0, 20.0, 518.75},
        {110.0, 35.0, 1150.0 + 47.0 / 48.0},
    };
    for (const Case& c : cases) {
        GameInstance g = make_game({0.10, 0.14}, c.demand, c.fuel_price);
        BidVector alpha = nash_equilibrium(kTwoSupplierCosts, g);
        double total = 0.0;
        for (int i = 0; i < 2; ++i) total += profit(kTwoSupplierCosts[i], alpha, g, i);
        CHECK(total == doctest::Approx(c.total_profit).epsilon(1e-7));
    }
}

TEST_CASE("nash iteration reports failure with its last iterate") {
    GameInstance g = make_game({0.10, 0.14}, 75.0, 20.0);
    NashOptions opts;
    opts.max_rounds = 0;
    try {
        nash_equilibrium(kTwoSupplierCosts, g, BidVector{0.0, 0.0}, opts);
        FAIL("expected ConvergenceError");
    } catch (const ConvergenceError& e) {
        CHECK(e.last_iterate.size() == 2);
        CHECK(e.residual > 0.0);
    }

    CHECK_THROWS_AS(nash_equilibrium({{7.0, 0.7}}, g), std::invalid_argument);
    GameInstance mono = make_game({0.2}, 30.0, 10.0);
    CHECK_THROWS_AS(nash_equilibrium({{7.0, 0.7}}, mono), std::invalid_argument);
}
