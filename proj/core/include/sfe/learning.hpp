#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sfe/equilibrium.hpp"
#include "sfe/inverse.hpp"
#include "sfe/market.hpp"

namespace sfe {

// Inputs of the random-search estimator: per-iteration train/validation split
// fraction, the discrepancy level that stops the search, an iteration cap, and
// the seed that makes every iteration reproducible.
struct SearchConfig {
    double train_fraction = 0.75;  // p in (0, 1)
    double tolerance = 1e-3;       // tau > 0
    int max_iter = 100;
    std::uint64_t master_seed = 0;

    void validate() const;
};

// One iteration of the search. Failed iterations (e.g. an unidentifiable
// split) keep success=false, carry the error text, and leave the metric
// fields NaN. `seconds` is wall-clock time and is exempt from the determinism
// contract; everything else is a pure function of (master_seed, iter).
struct IterationRecord {
    int iter = 0;
    bool success = false;
    double z = 0.0;
    double discrepancy = 0.0;
    std::optional<double> mape;
    double seconds = 0.0;
    std::vector<int> train_indices;
    std::vector<CostParams> thetas;
    std::string error;
};

struct SearchResult {
    std::vector<CostParams> best_thetas;
    double best_discrepancy = 0.0;
    int iterations_run = 0;
    std::vector<IterationRecord> log;
};

// d = (sum_j ||alpha^j - alpha_hat^j||_1 / n) / M_v.
double discrepancy(const std::vector<BidVector>& true_bids,
                   const std::vector<BidVector>& computed_bids, int n);

// Mean absolute percentage error over all 2N cost components, in percent.
double mape(const std::vector<CostParams>& theta_true,
            const std::vector<CostParams>& theta_hat);

// Random search over the optimal-solution set: each iteration draws a fresh
// train/validation split, estimates costs on the training part, recomputes
// equilibrium bids on the validation part, and scores the discrepancy against
// the observed bids. Stops once d < tolerance or after max_iter iterations
// and returns the best iterate. When `truth` is given, per-iteration MAPE is
// logged. `workers` > 1 evaluates iterations concurrently with results
// identical to the sequential order.
SearchResult random_search(const std::vector<Observation>& dataset, const MarketConfig& config,
                           const SearchConfig& sc,
                           const std::optional<std::vector<CostParams>>& truth = std::nullopt,
                           const InverseOptions& inverse_options = {}, int workers = 1);

// eta = sum_{i=0}^{2n} C(m_t, i) delta^i (1-delta)^{m_t-i}, evaluated in
// log-space; requires m_t > 2n for a nonvacuous bound.
double eta_bound(int m_t, double delta, int n);

// T = ceil(log(epsilon) / log(eta)); iterations needed so that the failure
// probability drops below epsilon.
long long termination_bound(double eta, double epsilon);

// gamma = min_i (1 - beta_hat_i^2) / beta_i over the marginal set; the
// strong-monotonicity modulus of the stacked negative profit gradient with
// rival bids held fixed.
struct MonotonicityConstants {
    double gamma = 0.0;

    double tau_threshold(double eps_bar, int n) const;  // sqrt(eps_bar / (n * gamma))
};

MonotonicityConstants monotonicity_constants(const MarketConfig& config,
                                             const std::vector<int>& marginal_set);

struct TheoryBounds {
    double eta = 0.0;
    double gamma = 0.0;
    double tau_threshold = 0.0;
    long long termination_T = 0;
};

// Bundles the Theorem-1/2 quantities for a given market and experiment size.
TheoryBounds compute_theory_bounds(const MarketConfig& config,
                                   const std::vector<int>& marginal_set, int m_t, double delta,
                                   double epsilon, double eps_bar);

}  // namespace sfe
