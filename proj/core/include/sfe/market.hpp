#pragma once

#include <vector>

namespace sfe {

/// Per-supplier bid intercepts alpha ($/MWh); slopes live in MarketConfig.
using BidVector = std::vector<double>;

/// Public game data: bid slopes, capacity bounds, and the intercept cap.
struct MarketConfig {
    int n_suppliers = 0;
    std::vector<double> beta;   // $/MWh per MW, strictly positive
    std::vector<double> p_min;  // MW
    std::vector<double> p_max;  // MW, may be +inf
    double alpha_bar = 0.0;     // $/MWh cap on bid intercepts

    /// Throws std::invalid_argument if any structural invariant is broken.
    void validate() const;

    double total_p_min() const;
    double total_p_max() const;
};

/// Result of clearing: uniform price, dispatch, and the partition of
/// suppliers into marginal / at-capacity / at-minimum sets.
struct ClearingOutcome {
    double price = 0.0;                 // R, $/MWh
    std::vector<double> dispatch;       // per supplier, MW
    std::vector<int> marginal_set;      // sorted supplier indices
    std::vector<int> at_max_set;
    std::vector<int> at_min_set;
    double effective_demand = 0.0;      // Q seen by the marginal group
    bool clamped = false;               // demand hit an exact extreme
};

/// Disjoint supplier groups each clearing at its own uniform price.
struct IslandPartition {
    std::vector<std::vector<int>> islands;
    std::vector<double> island_demand;  // residual demand per island, MW

    void validate(const MarketConfig& config) const;
};

/// Normalized inverse slopes over a marginal group:
/// beta_hat[i] = (1/beta_i) / sum_l (1/beta_l).
/// For groups of two or more, every entry lies strictly in (0,1) and the
/// entries sum to one.
struct BetaHat {
    std::vector<int> members;       // sorted supplier indices
    std::vector<double> beta_hat;   // aligned with members
    double inv_beta_sum = 0.0;      // sum of 1/beta over members
};

BetaHat make_beta_hat(const MarketConfig& config, const std::vector<int>& members);

struct MarginalClearing {
    double price = 0.0;
    std::vector<double> dispatch;  // aligned with the member list passed in
};

/// Clears the uncapacitated sub-market formed by `members`:
///   R = (Q + sum alpha_i/beta_i) / sum (1/beta_i),  P_i = (R - alpha_i)/beta_i.
/// Dispatch sums to `effective_demand` exactly up to floating tolerance.
/// Throws std::domain_error if `members` is empty.
MarginalClearing marginal_clearing(const MarketConfig& config, const BidVector& bids,
                                   const std::vector<int>& members, double effective_demand);

/// Clears the full market with capacity bounds: finds the consistent
/// partition into marginal / at-max / at-min suppliers and prices the
/// marginal group. Throws std::domain_error when q_forecast lies outside
/// [sum p_min, sum p_max].
ClearingOutcome clear_market(const MarketConfig& config, const BidVector& bids,
                             double q_forecast);

/// Clears each island independently. One island holding all suppliers
/// reproduces clear_market.
std::vector<ClearingOutcome> clear_islands(const MarketConfig& config, const BidVector& bids,
                                           const IslandPartition& partition);

}  // namespace sfe
