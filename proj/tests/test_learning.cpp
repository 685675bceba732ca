#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "sfe/equilibrium.hpp"
#include "sfe/errors.hpp"
#include "sfe/learning.hpp"
#include "sfe/market.hpp"
#include "sfe/rng.hpp"
#include "support/oracles.hpp"

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

sfe::MarketConfig three_supplier_config() {
    sfe::MarketConfig config;
    config.n_suppliers = 3;
    config.beta = {0.10, 0.12, 0.14};
    config.p_min = {0.0, 0.0, 0.0};
    config.p_max = {kInf, kInf, kInf};
    config.alpha_bar = 200.0;
    return config;
}

const std::vector<sfe::CostParams> kThreeSupplierCosts = {
    {7.0, 0.7}, {6.0, 0.8}, {5.0, 0.9}};

std::vector<sfe::Observation> equilibrium_dataset(const sfe::MarketConfig& config,
                                                  const std::vector<sfe::CostParams>& thetas,
                                                  double noise, std::uint64_t noise_seed) {
    std::vector<sfe::Observation> dataset;
    const std::vector<double> demands = {55.0, 65.0, 75.0, 85.0, 95.0, 105.0};
    const std::vector<double> fuels = {12.0, 22.0};
    sfe::Rng rng(noise_seed);
    for (double q : demands) {
        for (double xi : fuels) {
            sfe::GameInstance inst;
            inst.config = config;
            inst.demand = q;
            inst.fuel_price = xi;
            for (int i = 0; i < config.n_suppliers; ++i) inst.marginal_set.push_back(i);
            sfe::BidVector bids =
                sfe::nash_equilibrium(thetas, inst, sfe::NashOptions{1e-12, 20000});
            if (noise > 0.0)
                for (double& bid : bids)
                    bid = std::clamp(bid * (1.0 + rng.uniform(-noise, noise)), 0.0,
                                     config.alpha_bar);
            sfe::Observation obs;
            obs.demand = q;
            obs.fuel_price = xi;
            obs.bids = bids;
            obs.marginal_set = inst.marginal_set;
            dataset.push_back(std::move(obs));
        }
    }
    return dataset;
}

bool records_equal_ignoring_time(const sfe::IterationRecord& a, const sfe::IterationRecord& b) {
    auto same_double = [](double x, double y) {
        return (std::isnan(x) && std::isnan(y)) || x == y;
    };
    if (a.iter != b.iter || a.success != b.success) return false;
    if (!same_double(a.z, b.z) || !same_double(a.discrepancy, b.discrepancy)) return false;
    if (a.mape.has_value() != b.mape.has_value()) return false;
    if (a.mape && *a.mape != *b.mape) return false;
    if (a.train_indices != b.train_indices || a.error != b.error) return false;
    if (a.thetas.size() != b.thetas.size()) return false;
    for (std::size_t i = 0; i < a.thetas.size(); ++i)
        if (a.thetas[i].theta1 != b.thetas[i].theta1 || a.thetas[i].theta2 != b.thetas[i].theta2)
            return false;
    return true;
}

}  // namespace

TEST_CASE("discrepancy follows its definition") {
    const std::vector<sfe::BidVector> a = {{10.0, 20.0}};
    CHECK(sfe::discrepancy(a, a, 2) == 0.0);

    const std::vector<sfe::BidVector> b = {{11.0, 19.0}};
    CHECK(sfe::discrepancy(a, b, 2) == doctest::Approx(1.0).epsilon(1e-14));

    const std::vector<sfe::BidVector> many_true = {{1.0, 2.0}, {3.0, 4.0}, {5.0, 9.0}};
    const std::vector<sfe::BidVector> many_hat = {{1.5, 2.0}, {3.0, 3.0}, {6.0, 9.5}};
    const double d = sfe::discrepancy(many_true, many_hat, 2);
    std::vector<sfe::BidVector> perm_true = {many_true[2], many_true[0], many_true[1]};
    std::vector<sfe::BidVector> perm_hat = {many_hat[2], many_hat[0], many_hat[1]};
    CHECK(sfe::discrepancy(perm_true, perm_hat, 2) == doctest::Approx(d).epsilon(1e-14));

    CHECK_THROWS_AS((void)sfe::discrepancy(a, many_hat, 2), std::domain_error);
    CHECK_THROWS_AS((void)sfe::discrepancy({}, {}, 2), std::domain_error);
    CHECK_THROWS_AS((void)sfe::discrepancy({{1.0}}, {{1.0, 2.0}}, 2), std::domain_error);
}

TEST_CASE("mape follows its definition") {
    const std::vector<sfe::CostParams> truth = {{10.0, 1.0}};
    CHECK(sfe::mape(truth, truth) == 0.0);
    CHECK(sfe::mape(truth, {{11.0, 0.9}}) == doctest::Approx(10.0).epsilon(1e-14));

    // Doubling every error doubles the MAPE.
    const std::vector<sfe::CostParams> t2 = {{8.0, 0.5}, {4.0, 2.0}};
    const std::vector<sfe::CostParams> h1 = {{8.4, 0.45}, {4.2, 2.2}};
    std::vector<sfe::CostParams> h2 = t2;
    for (std::size_t i = 0; i < t2.size(); ++i) {
        h2[i].theta1 = t2[i].theta1 + 2.0 * (h1[i].theta1 - t2[i].theta1);
        h2[i].theta2 = t2[i].theta2 + 2.0 * (h1[i].theta2 - t2[i].theta2);
    }
    CHECK(sfe::mape(t2, h2) == doctest::Approx(2.0 * sfe::mape(t2, h1)).epsilon(1e-12));

    CHECK_THROWS_AS((void)sfe::mape({{0.0, 1.0}}, {{1.0, 1.0}}), std::domain_error);
    CHECK_THROWS_AS((void)sfe::mape(truth, t2), std::domain_error);
}

TEST_CASE("eta bound matches hand-computed binomial tails") {
    // N=1, M=3, delta=0.5: (1 + 3 + 3) / 8.
    CHECK(sfe::eta_bound(3, 0.5, 1) == doctest::Approx(0.875).epsilon(1e-12));

    // Tiny delta concentrates all mass below 2N.
    CHECK(sfe::eta_bound(50, 1e-12, 2) == doctest::Approx(1.0).epsilon(1e-9));

    // Exact complement for N=3, M=9, delta=0.2: 1 - P(7) - P(8) - P(9).
    const double p7 = 36.0 * std::pow(0.2, 7) * std::pow(0.8, 2);
    const double p8 = 9.0 * std::pow(0.2, 8) * 0.8;
    const double p9 = std::pow(0.2, 9);
    CHECK(sfe::eta_bound(9, 0.2, 3) == doctest::Approx(1.0 - p7 - p8 - p9).epsilon(1e-12));

    // Non-increasing in the training size over a grid.
    double prev = 1.0;
    for (int m_t = 5; m_t <= 80; ++m_t) {
        const double eta = sfe::eta_bound(m_t, 0.2, 2);
        CHECK(eta > 0.0);
        CHECK(eta <= 1.0);
        CHECK(eta <= prev + 1e-12);
        prev = eta;
    }

    CHECK_THROWS_AS((void)sfe::eta_bound(4, 0.5, 2), std::domain_error);
    CHECK_THROWS_AS((void)sfe::eta_bound(10, 0.0, 2), std::domain_error);
    CHECK_THROWS_AS((void)sfe::eta_bound(10, 1.0, 2), std::domain_error);
}

TEST_CASE("termination bound rounds the log ratio up") {
    CHECK(sfe::termination_bound(0.5, 0.5) == 1);
    CHECK(sfe::termination_bound(0.9, 0.01) == 44);
    for (int k = 1; k <= 20; ++k)
        CHECK(sfe::termination_bound(0.8, std::pow(0.8, k)) == k);
    CHECK_THROWS_AS((void)sfe::termination_bound(1.0, 0.5), std::domain_error);
    CHECK_THROWS_AS((void)sfe::termination_bound(0.5, 0.0), std::domain_error);
}

TEST_CASE("monotonicity constants match the frozen three-supplier market") {
    const sfe::MarketConfig config = three_supplier_config();
    const sfe::MonotonicityConstants mc =
        sfe::monotonicity_constants(config, {0, 1, 2});
    // Per-supplier ratios (1 - beta_hat^2)/beta: 96850/11449, 85200/11449,
    // 527450/80143; the minimum is supplier 2's.
    CHECK(mc.gamma == doctest::Approx(527450.0 / 80143.0).epsilon(1e-12));

    sfe::MarketConfig sym;
    sym.n_suppliers = 3;
    sym.beta = {0.12, 0.12, 0.12};
    sym.p_min = {0.0, 0.0, 0.0};
    sym.p_max = {kInf, kInf, kInf};
    sym.alpha_bar = 200.0;
    const sfe::BetaHat bh = sfe::make_beta_hat(sym, {0, 1, 2});
    const double expect = (1.0 - bh.beta_hat[0] * bh.beta_hat[0]) / 0.12;
    CHECK(sfe::monotonicity_constants(sym, {0, 1, 2}).gamma ==
          doctest::Approx(expect).epsilon(1e-12));

    CHECK_THROWS_AS((void)sfe::monotonicity_constants(config, {1}), std::domain_error);

    // tau scales with the square root of eps_bar.
    const double tau1 = mc.tau_threshold(1e-6, 3);
    const double tau4 = mc.tau_threshold(4e-6, 3);
    CHECK(tau4 == doctest::Approx(2.0 * tau1).epsilon(1e-12));
    CHECK(tau1 == doctest::Approx(std::sqrt(1e-6 / (3.0 * mc.gamma))).epsilon(1e-12));
    CHECK_THROWS_AS((void)mc.tau_threshold(0.0, 3), std::domain_error);
}

TEST_CASE("stacked negative gradient is strongly monotone with rivals fixed") {
    sfe::Rng rng(0x600df00d2024ULL);
    for (int trial = 0; trial < 1000; ++trial) {
        const int n = 2 + static_cast<int>(rng.next_below(4));
        sfe::MarketConfig config;
        config.n_suppliers = n;
        config.alpha_bar = 200.0;
        for (int i = 0; i < n; ++i) {
            config.beta.push_back(rng.uniform(0.05, 0.5));
            config.p_min.push_back(0.0);
            config.p_max.push_back(kInf);
        }
        std::vector<int> members(n);
        for (int i = 0; i < n; ++i) members[i] = i;

        sfe::GameInstance inst;
        inst.config = config;
        inst.demand = rng.uniform(30.0, 120.0);
        inst.fuel_price = rng.uniform(5.0, 30.0);
        inst.marginal_set = members;

        std::vector<sfe::CostParams> thetas;
        for (int i = 0; i < n; ++i)
            thetas.push_back({rng.uniform(3.0, 9.0), rng.uniform(0.4, 1.2)});

        sfe::BidVector reference, a1, a2;
        for (int i = 0; i < n; ++i) {
            reference.push_back(rng.uniform(0.0, 60.0));
            a1.push_back(rng.uniform(0.0, 60.0));
            a2.push_back(rng.uniform(0.0, 60.0));
        }

        // f_i(alpha) = -d phi_i / d alpha_i at (alpha_i, reference rivals).
        auto stacked = [&](const sfe::BidVector& alpha) {
            std::vector<double> out(n);
            for (int i = 0; i < n; ++i) {
                sfe::BidVector profile = reference;
                profile[i] = alpha[i];
                out[i] = -sfe::profit_gradient(thetas[i], profile, inst, i);
            }
            return out;
        };

        const std::vector<double> f1 = stacked(a1);
        const std::vector<double> f2 = stacked(a2);
        const double gamma = sfe::monotonicity_constants(config, members).gamma;
        double inner = 0.0;
        double norm2 = 0.0;
        for (int i = 0; i < n; ++i) {
            inner += (f1[i] - f2[i]) * (a1[i] - a2[i]);
            norm2 += (a1[i] - a2[i]) * (a1[i] - a2[i]);
        }
        CHECK(inner >= gamma * norm2 * (1.0 - 1e-9) - 1e-9);
    }
}

TEST_CASE("random search recovers clean data within two iterations") {
    const sfe::MarketConfig config = three_supplier_config();
    const std::vector<sfe::Observation> dataset =
        equilibrium_dataset(config, kThreeSupplierCosts, 0.0, 0);

    sfe::SearchConfig sc;
    sc.train_fraction = 0.75;
    sc.tolerance = 1e-3;
    sc.max_iter = 50;
    sc.master_seed = 42;

    const sfe::SearchResult result =
        sfe::random_search(dataset, config, sc, kThreeSupplierCosts);
    CHECK(result.iterations_run <= 2);
    CHECK(result.best_discrepancy < 1e-3);
    REQUIRE(!result.log.empty());
    const sfe::IterationRecord& last = result.log.back();
    REQUIRE(last.success);
    REQUIRE(last.mape.has_value());
    CHECK(*last.mape < 1e-4);

    // Best tracking: the reported best is the minimum over successful rows.
    double best = std::numeric_limits<double>::infinity();
    for (const auto& rec : result.log)
        if (rec.success) best = std::min(best, rec.discrepancy);
    CHECK(result.best_discrepancy == best);
}

TEST_CASE("identical master seeds reproduce the search exactly") {
    const sfe::MarketConfig config = three_supplier_config();
    const std::vector<sfe::Observation> dataset =
        equilibrium_dataset(config, kThreeSupplierCosts, 0.03, 0xc0ffee11ULL);

    sfe::SearchConfig sc;
    sc.train_fraction = 0.7;
    sc.tolerance = 1e-9;  // unreachable on noisy data: all iterations run
    sc.max_iter = 12;
    sc.master_seed = 20240823;

    const sfe::SearchResult a = sfe::random_search(dataset, config, sc, kThreeSupplierCosts);
    const sfe::SearchResult b = sfe::random_search(dataset, config, sc, kThreeSupplierCosts);
    REQUIRE(a.log.size() == b.log.size());
    CHECK(a.iterations_run == b.iterations_run);
    CHECK(a.best_discrepancy == b.best_discrepancy);
    for (std::size_t k = 0; k < a.log.size(); ++k)
        CHECK(records_equal_ignoring_time(a.log[k], b.log[k]));

    // Parallel evaluation must be indistinguishable from sequential.
    const sfe::SearchResult c =
        sfe::random_search(dataset, config, sc, kThreeSupplierCosts, {}, 3);
    REQUIRE(c.log.size() == a.log.size());
    CHECK(c.best_discrepancy == a.best_discrepancy);
    for (std::size_t k = 0; k < a.log.size(); ++k)
        CHECK(records_equal_ignoring_time(a.log[k], c.log[k]));

    // The split of iteration k is a pure function of (master_seed, k).
    const int m = static_cast<int>(dataset.size());
    const int m_t = static_cast<int>(std::floor(m * sc.train_fraction));
    for (const auto& rec : a.log) {
        sfe::Rng rng(sfe::Rng::derive(sc.master_seed, static_cast<std::uint64_t>(rec.iter)));
        CHECK(rec.train_indices == rng.sample_without_replacement(m, m_t));
    }
}

TEST_CASE("failed splits are logged, skipped, and counted") {
    sfe::MarketConfig config = three_supplier_config();
    // Two fuel-price levels only: any training half drawn from a single level
    // is unidentifiable and must fail, while mixed splits succeed.
    std::vector<sfe::Observation> dataset;
    const std::vector<double> fuels = {10.0, 10.0, 20.0, 20.0};
    for (std::size_t j = 0; j < fuels.size(); ++j) {
        sfe::GameInstance inst;
        inst.config = config;
        inst.demand = 60.0 + 10.0 * static_cast<double>(j);
        inst.fuel_price = fuels[j];
        inst.marginal_set = {0, 1, 2};
        sfe::Observation obs;
        obs.demand = inst.demand;
        obs.fuel_price = inst.fuel_price;
        obs.bids = sfe::nash_equilibrium(kThreeSupplierCosts, inst,
                                         sfe::NashOptions{1e-12, 20000});
        obs.marginal_set = inst.marginal_set;
        dataset.push_back(std::move(obs));
    }

    sfe::SearchConfig sc;
    sc.train_fraction = 0.5;  // m_t = 2
    sc.tolerance = 1e-12;
    sc.max_iter = 16;
    sc.master_seed = 7;

    const sfe::SearchResult result = sfe::random_search(dataset, config, sc);
    CHECK(result.iterations_run == sc.max_iter);
    bool any_failure = false;
    bool any_success = false;
    for (const auto& rec : result.log) {
        if (rec.success) {
            any_success = true;
        } else {
            any_failure = true;
            CHECK(!rec.error.empty());
            CHECK(std::isnan(rec.discrepancy));
        }
    }
    CHECK(any_failure);
    CHECK(any_success);

    // All-identical fuel prices: every split fails and the failure log is
    // carried out in the exception.
    for (auto& obs : dataset) obs.fuel_price = 10.0;
    try {
        (void)sfe::random_search(dataset, config, sc);
        FAIL("expected EstimationError");
    } catch (const sfe::EstimationError& err) {
        CHECK(err.failures.size() == static_cast<std::size_t>(sc.max_iter));
    }
}

TEST_CASE("empirical termination stays within the Theorem 2 budget") {
    const sfe::MarketConfig config = three_supplier_config();
    const std::vector<sfe::Observation> dataset =
        equilibrium_dataset(config, kThreeSupplierCosts, 0.0, 0);
    const int m = static_cast<int>(dataset.size());
    const int m_t = static_cast<int>(std::floor(m * 0.75));

    const sfe::TheoryBounds tb =
        sfe::compute_theory_bounds(config, {0, 1, 2}, m_t, 0.2, 0.05, 1e-9);
    REQUIRE(tb.eta > 0.0);
    REQUIRE(tb.eta < 1.0);
    REQUIRE(tb.termination_T >= 1);

    sfe::SearchConfig sc;
    sc.train_fraction = 0.75;
    sc.tolerance = tb.tau_threshold;
    sc.max_iter = 3;

    int exceeded = 0;
    const int repetitions = 100;
    for (int seed = 1; seed <= repetitions; ++seed) {
        sc.master_seed = static_cast<std::uint64_t>(seed);
        const sfe::SearchResult result = sfe::random_search(dataset, config, sc);
        const bool terminated_by_tau = result.best_discrepancy < sc.tolerance;
        if (!terminated_by_tau || result.iterations_run > tb.termination_T) exceeded += 1;
    }
    const double fraction = static_cast<double>(exceeded) / repetitions;
    const double p = std::pow(tb.eta, static_cast<double>(
                                          std::min<long long>(tb.termination_T, 1000000)));
    const double sigma = std::sqrt(std::max(p * (1.0 - p), 1e-12) / repetitions);
    CHECK(fraction <= p + 3.0 * sigma);
}

TEST_CASE("larger discrepancy goes with smaller validation profit") {
    const sfe::MarketConfig config = three_supplier_config();
    const std::vector<sfe::Observation> dataset =
        equilibrium_dataset(config, kThreeSupplierCosts, 0.05, 0x5ca1ab1e77ULL);

    sfe::SearchConfig sc;
    sc.train_fraction = 0.7;
    sc.tolerance = 1e-9;
    sc.max_iter = 30;
    sc.master_seed = 3141592;

    const sfe::SearchResult result = sfe::random_search(dataset, config, sc);

    sfe::GameInstance inst;
    inst.config = config;
    inst.demand = 75.0;
    inst.fuel_price = 20.0;
    inst.marginal_set = {0, 1, 2};

    std::vector<double> ds, profits;
    for (const auto& rec : result.log) {
        if (!rec.success) continue;
        const sfe::BidVector bids = sfe::nash_equilibrium(rec.thetas, inst);
        double total = 0.0;
        for (int i = 0; i < 3; ++i)
            total += sfe::profit(kThreeSupplierCosts[i], bids, inst, i);
        ds.push_back(rec.discrepancy);
        profits.push_back(total);
    }
    REQUIRE(ds.size() >= 10);
    CHECK(sfe::testing::spearman(ds, profits) < 0.0);
}

TEST_CASE("search configuration is validated") {
    const sfe::MarketConfig config = three_supplier_config();
    const std::vector<sfe::Observation> dataset =
        equilibrium_dataset(config, kThreeSupplierCosts, 0.0, 0);

    sfe::SearchConfig sc;
    sc.train_fraction = 1.5;
    CHECK_THROWS_AS((void)sfe::random_search(dataset, config, sc), std::invalid_argument);
    sc.train_fraction = 0.75;
    sc.tolerance = 0.0;
    CHECK_THROWS_AS((void)sfe::random_search(dataset, config, sc), std::invalid_argument);
    sc.tolerance = 1e-3;
    sc.max_iter = 0;
    CHECK_THROWS_AS((void)sfe::random_search(dataset, config, sc), std::invalid_argument);
    sc.max_iter = 5;
    CHECK_THROWS_AS((void)sfe::random_search({dataset[0]}, config, sc), std::invalid_argument);
    sc.train_fraction = 1e-3;  // floor(12 * 0.001) = 0 training samples
    CHECK_THROWS_AS((void)sfe::random_search(dataset, config, sc), std::invalid_argument);
}
