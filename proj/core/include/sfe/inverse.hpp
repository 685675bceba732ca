#pragma once

#include <optional>
#include <vector>

#include "sfe/equilibrium.hpp"
#include "sfe/lp.hpp"
#include "sfe/market.hpp"

namespace sfe {

// One historical market outcome. Bids are indexed by supplier; entries outside
// the marginal set are ignored. Price/dispatch are optional observables used
// to recover bids at ingestion.
struct Observation {
    double demand = 0.0;      // Q^j
    double fuel_price = 0.0;  // xi^j
    BidVector bids;
    std::vector<int> marginal_set;
    std::optional<double> price;
    std::optional<std::vector<double>> dispatch;

    void validate(const MarketConfig& config) const;
};

// Affine decomposition of the profit gradient in (theta1, theta2) at a fixed
// observed bid profile: gradient = constant + coef_theta1*theta1 + coef_theta2*theta2.
struct GradientCoefficients {
    double constant = 0.0;
    double coef_theta1 = 0.0;
    double coef_theta2 = 0.0;

    double at(double theta1, double theta2) const {
        return constant + coef_theta1 * theta1 + coef_theta2 * theta2;
    }
};

GradientCoefficients gradient_coefficients(const Observation& obs, const MarketConfig& config,
                                           int i);

enum class InverseSolver {
    Auto,     // certified least-squares shortcut, then cutting planes, then simplex
    Simplex,  // monolithic LP via solve_lp
    Reduced,  // cutting planes on the variable-eliminated problem
};

struct InverseOptions {
    InverseSolver solver = InverseSolver::Auto;
    bool bound_thetas = true;  // theta in [0, alpha_bar]^2; false leaves them free
};

struct CostEstimate {
    std::vector<CostParams> thetas;
    double z = 0.0;  // optimal duality-gap bound; always >= 0
    std::vector<int> normalization_obs;  // observation index k_i per supplier
};

// Normalization observation per supplier: global median observation by
// (demand, fuel_price, index); suppliers not marginal there fall back to the
// median of their own marginal observations.
std::vector<int> choose_normalization(const std::vector<Observation>& training,
                                      const MarketConfig& config);

// Monolithic LP: minimize t over {t, y_i^j, theta_i1, theta_i2} subject to
// per-observation duality-gap rows bounded by t, y above each gradient, and
// one gradient-pinned-to-zero normalization row per supplier.
LpProblem build_inverse_lp(const std::vector<Observation>& training, const MarketConfig& config,
                           const std::vector<int>& normalization,
                           const InverseOptions& options = {});

// Faithful |eps_j| <= t variant with explicit per-observation eps variables;
// same optimal value as build_inverse_lp. Kept for cross-checking.
LpProblem build_inverse_lp_abs_form(const std::vector<Observation>& training,
                                    const MarketConfig& config,
                                    const std::vector<int>& normalization,
                                    const InverseOptions& options = {});

// Duality-gap bound of a candidate theta on the training set: max over
// observations of the per-observation gap with y eliminated at its optimum.
double duality_gap(const std::vector<Observation>& training, const MarketConfig& config,
                   const std::vector<CostParams>& thetas);

CostEstimate estimate_costs(const std::vector<Observation>& training, const MarketConfig& config,
                            const InverseOptions& options = {});

}  // namespace sfe
