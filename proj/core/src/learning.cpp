#include "sfe/learning.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <future>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "sfe/errors.hpp"
#include "sfe/rng.hpp"

namespace sfe {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double log_choose(int m, int i) {
    return std::lgamma(m + 1.0) - std::lgamma(i + 1.0) - std::lgamma(m - i + 1.0);
}

double log_add_exp(double a, double b) {
    if (a == -std::numeric_limits<double>::infinity()) return b;
    if (b == -std::numeric_limits<double>::infinity()) return a;
    const double hi = std::max(a, b);
    return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

// One search iteration; a pure function of (master_seed, iter) apart from the
// wall-clock field, so iterations can run concurrently in any order.
IterationRecord run_iteration(int iter, const std::vector<Observation>& dataset,
                              const MarketConfig& config, const SearchConfig& sc,
                              const std::optional<std::vector<CostParams>>& truth,
                              const InverseOptions& inverse_options) {
    const auto start = std::chrono::steady_clock::now();
    IterationRecord rec;
    rec.iter = iter;
    rec.z = kNaN;
    rec.discrepancy = kNaN;

    const int m = static_cast<int>(dataset.size());
    const int m_t = static_cast<int>(std::floor(m * sc.train_fraction));
    Rng rng(Rng::derive(sc.master_seed, static_cast<std::uint64_t>(iter)));
    rec.train_indices = rng.sample_without_replacement(m, m_t);

    try {
        std::vector<Observation> training;
        training.reserve(m_t);
        std::vector<char> in_train(m, 0);
        for (int j : rec.train_indices) {
            training.push_back(dataset[j]);
            in_train[j] = 1;
        }

        const CostEstimate est = estimate_costs(training, config, inverse_options);

        std::vector<BidVector> observed;
        std::vector<BidVector> computed;
        for (int j = 0; j < m; ++j) {
            if (in_train[j]) continue;
            const Observation& obs = dataset[j];
            GameInstance inst;
            inst.config = config;
            inst.demand = obs.demand;
            inst.fuel_price = obs.fuel_price;
            inst.marginal_set = obs.marginal_set;
            BidVector bids = nash_equilibrium(est.thetas, inst);
            // Suppliers outside the marginal set are not predicted by the
            // model; score only the members.
            BidVector merged = obs.bids;
            for (int i : obs.marginal_set) merged[i] = bids[i];
            observed.push_back(obs.bids);
            computed.push_back(std::move(merged));
        }

        rec.discrepancy = discrepancy(observed, computed, config.n_suppliers);
        rec.z = est.z;
        rec.thetas = est.thetas;
        if (truth) rec.mape = mape(*truth, est.thetas);
        rec.success = true;
    } catch (const std::exception& err) {
        rec.success = false;
        rec.error = err.what();
    }

    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return rec;
}

}  // namespace

void SearchConfig::validate() const {
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw std::invalid_argument("SearchConfig: train_fraction must lie in (0, 1)");
    if (!(tolerance > 0.0)) throw std::invalid_argument("SearchConfig: tolerance must be > 0");
    if (max_iter < 1) throw std::invalid_argument("SearchConfig: max_iter must be >= 1");
}

double discrepancy(const std::vector<BidVector>& true_bids,
                   const std::vector<BidVector>& computed_bids, int n) {
    if (true_bids.size() != computed_bids.size() || true_bids.empty())
        throw std::domain_error("discrepancy: bid lists must be nonempty and of equal length");
    if (n < 1) throw std::domain_error("discrepancy: supplier count must be positive");
    double total = 0.0;
    for (std::size_t j = 0; j < true_bids.size(); ++j) {
        if (true_bids[j].size() != computed_bids[j].size())
            throw std::domain_error("discrepancy: bid vectors must have equal dimension");
        double l1 = 0.0;
        for (std::size_t i = 0; i < true_bids[j].size(); ++i)
            l1 += std::fabs(true_bids[j][i] - computed_bids[j][i]);
        total += l1 / n;
    }
    return total / static_cast<double>(true_bids.size());
}

double mape(const std::vector<CostParams>& theta_true, const std::vector<CostParams>& theta_hat) {
    if (theta_true.size() != theta_hat.size() || theta_true.empty())
        throw std::domain_error("mape: parameter lists must be nonempty and of equal length");
    double total = 0.0;
    for (std::size_t i = 0; i < theta_true.size(); ++i) {
        if (theta_true[i].theta1 == 0.0 || theta_true[i].theta2 == 0.0)
            throw std::domain_error("mape: true parameters must be nonzero");
        total += std::fabs((theta_true[i].theta1 - theta_hat[i].theta1) / theta_true[i].theta1);
        total += std::fabs((theta_true[i].theta2 - theta_hat[i].theta2) / theta_true[i].theta2);
    }
    return 100.0 * total / (2.0 * static_cast<double>(theta_true.size()));
}

SearchResult random_search(const std::vector<Observation>& dataset, const MarketConfig& config,
                           const SearchConfig& sc,
                           const std::optional<std::vector<CostParams>>& truth,
                           const InverseOptions& inverse_options, int workers) {
    sc.validate();
    config.validate();
    if (dataset.size() < 2)
        throw std::invalid_argument("random_search: need at least two observations");
    if (truth && truth->size() != static_cast<std::size_t>(config.n_suppliers))
        throw std::invalid_argument("random_search: truth size mismatch");
    if (workers < 1) throw std::invalid_argument("random_search: workers must be >= 1");
    const int m = static_cast<int>(dataset.size());
    const int m_t = static_cast<int>(std::floor(m * sc.train_fraction));
    if (m_t < 1 || m_t >= m)
        throw std::invalid_argument(
            "random_search: train_fraction leaves an empty training or validation set");

    SearchResult result;
    result.best_discrepancy = std::numeric_limits<double>::infinity();
    bool have_best = false;
    bool stopped = false;

    for (int base = 0; base < sc.max_iter && !stopped; base += workers) {
        const int chunk = std::min(workers, sc.max_iter - base);
        std::vector<IterationRecord> records;
        records.reserve(chunk);
        if (chunk == 1) {
            records.push_back(
                run_iteration(base, dataset, config, sc, truth, inverse_options));
        } else {
            std::vector<std::future<IterationRecord>> futures;
            futures.reserve(chunk);
            for (int offset = 0; offset < chunk; ++offset)
                futures.push_back(std::async(std::launch::async, run_iteration, base + offset,
                                             std::cref(dataset), std::cref(config), std::cref(sc),
                                             std::cref(truth), std::cref(inverse_options)));
            for (auto& f : futures) records.push_back(f.get());
        }
        // Consume strictly in iteration order so speculative results beyond a
        // stopping iteration are discarded, matching the sequential run.
        for (IterationRecord& rec : records) {
            const bool success = rec.success;
            const double d = rec.discrepancy;
            result.log.push_back(std::move(rec));
            result.iterations_run += 1;
            if (!success) continue;
            if (!have_best || d < result.best_discrepancy) {
                have_best = true;
                result.best_discrepancy = d;
                result.best_thetas = result.log.back().thetas;
            }
            if (d < sc.tolerance) {
                stopped = true;
                break;
            }
        }
    }

    if (!have_best) {
        std::vector<std::string> failures;
        for (const IterationRecord& rec : result.log) failures.push_back(rec.error);
        throw EstimationError("random_search: every iteration failed", std::move(failures));
    }
    return result;
}

double eta_bound(int m_t, double delta, int n) {
    if (n < 1) throw std::domain_error("eta_bound: supplier count must be positive");
    if (m_t <= 2 * n)
        throw std::domain_error("eta_bound: m_t must exceed 2n for a nonvacuous bound");
    if (!(delta > 0.0 && delta < 1.0))
        throw std::domain_error("eta_bound: delta must lie in (0, 1)");
    const double log_d = std::log(delta);
    const double log_1d = std::log1p(-delta);
    double acc = -std::numeric_limits<double>::infinity();
    for (int i = 0; i <= 2 * n; ++i)
        acc = log_add_exp(acc, log_choose(m_t, i) + i * log_d + (m_t - i) * log_1d);
    return std::min(std::exp(acc), 1.0);
}

long long termination_bound(double eta, double epsilon) {
    if (!(eta > 0.0 && eta < 1.0))
        throw std::domain_error("termination_bound: eta must lie in (0, 1)");
    if (!(epsilon > 0.0 && epsilon < 1.0))
        throw std::domain_error("termination_bound: epsilon must lie in (0, 1)");
    // The tiny backoff keeps epsilon = eta^k landing exactly on k despite
    // floating-point rounding of the logarithm ratio.
    const double ratio = std::log(epsilon) / std::log(eta);
    const double t = std::ceil(ratio - 1e-9);
    if (t >= static_cast<double>(std::numeric_limits<long long>::max()))
        return std::numeric_limits<long long>::max();
    return std::max(1LL, static_cast<long long>(t));
}

double MonotonicityConstants::tau_threshold(double eps_bar, int n) const {
    if (!(eps_bar > 0.0))
        throw std::domain_error("tau_threshold: eps_bar must be positive");
    if (n < 1) throw std::domain_error("tau_threshold: supplier count must be positive");
    return std::sqrt(eps_bar / (n * gamma));
}

MonotonicityConstants monotonicity_constants(const MarketConfig& config,
                                             const std::vector<int>& marginal_set) {
    config.validate();
    if (marginal_set.size() < 2)
        throw std::domain_error(
            "monotonicity_constants: at least two marginal suppliers required");
    const BetaHat bh = make_beta_hat(config, marginal_set);
    MonotonicityConstants mc;
    mc.gamma = std::numeric_limits<double>::infinity();
    for (std::size_t pos = 0; pos < bh.members.size(); ++pos) {
        const double bhat = bh.beta_hat[pos];
        const double ratio = (1.0 - bhat * bhat) / config.beta[bh.members[pos]];
        mc.gamma = std::min(mc.gamma, ratio);
    }
    return mc;
}

TheoryBounds compute_theory_bounds(const MarketConfig& config,
                                   const std::vector<int>& marginal_set, int m_t, double delta,
                                   double epsilon, double eps_bar) {
    TheoryBounds tb;
    const MonotonicityConstants mc = monotonicity_constants(config, marginal_set);
    tb.gamma = mc.gamma;
    tb.tau_threshold = mc.tau_threshold(eps_bar, config.n_suppliers);
    tb.eta = eta_bound(m_t, delta, config.n_suppliers);
    tb.termination_T = termination_bound(tb.eta, epsilon);
    return tb;
}

}  // namespace sfe
