#pragma once

#include <cstdint>
#include <vector>

#include "sfe/equilibrium.hpp"
#include "sfe/inverse.hpp"
#include "sfe/market.hpp"

namespace sfe {

// Intervals the demand and fuel-price scenarios are drawn from.
struct ScenarioRanges {
    double demand_lo = 50.0;
    double demand_hi = 100.0;
    double fuel_lo = 10.0;
    double fuel_hi = 30.0;

    void validate() const;
};

struct GroundTruth {
    std::vector<CostParams> thetas;
    MarketConfig config;
};

enum class NoiseDistribution {
    Uniform,            // u ~ Uniform(-nu, nu)
    TruncatedGaussian,  // u ~ Normal(0, (nu/2)^2) truncated to [-nu, nu]
};

// Benchmark market: theta1 equispaced 7 down to 5, theta2 equispaced 0.7 up
// to 0.9, c2 equispaced 0.05 up to 0.07 with beta = 2*c2, alpha_bar = 200,
// no capacity limits.
GroundTruth generate_market(int n);

// Draws m scenarios uniformly from the ranges, computes exact equilibrium
// bids, perturbs each bid by a factor (1+u) with |u| <= noise_level, clamps
// to [0, alpha_bar], and marks every supplier marginal. Price and dispatch
// are filled in from the marginal-clearing identity on the noisy bids.
// Scenario draws depend only on (seed); the noise of observation j only on
// (seed, j), so datasets with equal seeds share their scenarios across noise
// levels.
std::vector<Observation> generate_observations(const GroundTruth& truth, int m,
                                               const ScenarioRanges& ranges, double noise_level,
                                               std::uint64_t seed,
                                               NoiseDistribution dist = NoiseDistribution::Uniform);

// Bid implied by the market-clearing condition: alpha = R - beta * P.
double recover_bids(double price, double dispatch, double beta);

// Checked variant: dispatch on or outside the capacity interval means the
// supplier was not marginal and its bid cannot be identified.
double recover_bids(double price, double dispatch, double beta, double p_min, double p_max);

// Baseline bidder: best response against rivals frozen at their historical
// mean bids. `theta_i` is the bidder's own (known) cost.
double wen_david_bid(const std::vector<Observation>& history, const MarketConfig& config, int i,
                     double demand, double fuel, const CostParams& theta_i);

}  // namespace sfe
