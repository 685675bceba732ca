#pragma once

#include <vector>

#include "sfe/errors.hpp"
#include "sfe/market.hpp"

namespace sfe {

// Private cost information of one supplier. The marginal-cost intercept at
// fuel price xi is theta1 + theta2 * xi; the slope is the (public) beta_i.
struct CostParams {
    double theta1 = 0.0;
    double theta2 = 0.0;

    double intercept(double fuel_price) const { return theta1 + theta2 * fuel_price; }
};

// One strategic situation: who competes, at what effective demand and fuel
// price. Bids for suppliers outside marginal_set never enter the game.
struct GameInstance {
    MarketConfig config;
    double demand = 0.0;      // effective demand Q (MW)
    double fuel_price = 0.0;  // xi
    std::vector<int> marginal_set;

    void validate() const;
};

// Profit of supplier i at the given bid profile: (R - c_i) P_i - beta_i P_i^2 / 2.
double profit(const CostParams& theta, const BidVector& bids, const GameInstance& inst, int i);

// d(profit)/d(alpha_i), valid while the marginal set is fixed.
double profit_gradient(const CostParams& theta, const BidVector& bids, const GameInstance& inst,
                       int i);

// d^2(profit)/d(alpha_i)^2; independent of bids and costs, strictly negative
// whenever at least two suppliers are marginal.
double profit_hessian(const GameInstance& inst, int i);

// Unique maximizer of supplier i's profit in alpha_i, clamped to [0, alpha_bar].
// A monopolist (singleton marginal set) bids the cap.
double best_response(const CostParams& theta, const BidVector& bids, const GameInstance& inst,
                     int i);

struct NashOptions {
    double tol = 1e-8;    // residual max_i |alpha_i - best_response_i|
    int max_rounds = 10000;
};

// Gauss-Seidel best-response iteration to the unique Nash equilibrium over the
// marginal set. Entries outside the marginal set are zero (default start) or
// carried through unchanged (explicit start). Throws ConvergenceError with the
// last iterate if max_rounds is exhausted.
BidVector nash_equilibrium(const std::vector<CostParams>& thetas, const GameInstance& inst,
                           const NashOptions& opts = {});
BidVector nash_equilibrium(const std::vector<CostParams>& thetas, const GameInstance& inst,
                           BidVector initial, const NashOptions& opts = {});

}  // namespace sfe
