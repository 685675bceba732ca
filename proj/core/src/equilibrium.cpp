#include "sfe/equilibrium.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace sfe {

namespace {

std::size_t member_position(const std::vector<int>& members, int i) {
    auto it = std::find(members.begin(), members.end(), i);
    if (it == members.end())
        throw std::domain_error("supplier " + std::to_string(i) + " is not marginal");
    return static_cast<std::size_t>(it - members.begin());
}

double clamp_bid(double alpha, double alpha_bar) {
    return std::clamp(alpha, 0.0, alpha_bar);
}

// Residual demand term Q_i: what i faces after rivals' intercepts are netted out.
double residual_term(const GameInstance& inst, const BidVector& bids, const BetaHat& bh, int i) {
    double rivals = 0.0;
    for (int k : bh.members)
        if (k != i) rivals += bids[k] / inst.config.beta[k];
    return (inst.demand + rivals) / bh.inv_beta_sum;
}

double interior_best_response(double beta_hat_i, double q_i, double intercept, double alpha_bar) {
    double alpha = (beta_hat_i * q_i + (1.0 - beta_hat_i) * intercept) /
                   (1.0 - beta_hat_i * beta_hat_i);
    return clamp_bid(alpha, alpha_bar);
}

}  // namespace

void GameInstance::validate() const {
    config.validate();
    if (!(demand > 0.0)) throw std::invalid_argument("GameInstance: demand must be positive");
    if (fuel_price < 0.0) throw std::invalid_argument("GameInstance: fuel_price must be >= 0");
    if (marginal_set.empty()) throw std::invalid_argument("GameInstance: empty marginal set");
    for (int i : marginal_set)
        if (i < 0 || i >= config.n_suppliers)
            throw std::invalid_argument("GameInstance: marginal index out of range");
}

double profit(const CostParams& theta, const BidVector& bids, const GameInstance& inst, int i) {
    inst.validate();
    const std::size_t pos = member_position(inst.marginal_set, i);
    MarginalClearing mc = marginal_clearing(inst.config, bids, inst.marginal_set, inst.demand);
    const double p_i = mc.dispatch[pos];
    const double cost_intercept = theta.intercept(inst.fuel_price);
    return (mc.price - cost_intercept) * p_i - 0.5 * inst.config.beta[i] * p_i * p_i;
}

double profit_gradient(const CostParams& theta, const BidVector& bids, const GameInstance& inst,
                       int i) {
    inst.validate();
    const std::size_t pos = member_position(inst.marginal_set, i);
    BetaHat bh = make_beta_hat(inst.config, inst.marginal_set);
    const double bhat = bh.beta_hat[pos];
    const double q_i = residual_term(inst, bids, bh, i);
    const double c_i = theta.intercept(inst.fuel_price);
    return (bhat * q_i + bids[i] * (bhat * bhat - 1.0) - (bhat - 1.0) * c_i) /
           inst.config.beta[i];
}

double profit_hessian(const GameInstance& inst, int i) {
    inst.validate();
    const std::size_t pos = member_position(inst.marginal_set, i);
    BetaHat bh = make_beta_hat(inst.config, inst.marginal_set);
    const double bhat = bh.beta_hat[pos];
    return (bhat - 1.0) * (bhat + 1.0) / inst.config.beta[i];
}

double best_response(const CostParams& theta, const BidVector& bids, const GameInstance& inst,
                     int i) {
    inst.validate();
    const std::size_t pos = member_position(inst.marginal_set, i);
    if (inst.marginal_set.size() == 1) return inst.config.alpha_bar;  // monopoly: bid the cap
    BetaHat bh = make_beta_hat(inst.config, inst.marginal_set);
    const double q_i = residual_term(inst, bids, bh, i);
    return interior_best_response(bh.beta_hat[pos], q_i, theta.intercept(inst.fuel_price),
                                  inst.config.alpha_bar);
}

BidVector nash_equilibrium(const std::vector<CostParams>& thetas, const GameInstance& inst,
                           const NashOptions& opts) {
    inst.validate();
    BidVector initial(inst.config.n_suppliers, 0.0);
    for (int i : inst.marginal_set)
        initial[i] = clamp_bid(thetas[i].intercept(inst.fuel_price), inst.config.alpha_bar);
    return nash_equilibrium(thetas, inst, std::move(initial), opts);
}

BidVector nash_equilibrium(const std::vector<CostParams>& thetas, const GameInstance& inst,
                           BidVector initial, const NashOptions& opts) {
    inst.validate();
    if (thetas.size() != static_cast<std::size_t>(inst.config.n_suppliers))
        throw std::invalid_argument("nash_equilibrium: thetas size mismatch");
    if (initial.size() != static_cast<std::size_t>(inst.config.n_suppliers))
        throw std::invalid_argument("nash_equilibrium: initial bid size mismatch");
    if (inst.marginal_set.size() < 2)
        throw std::invalid_argument("nash_equilibrium: need at least two marginal suppliers");
    if (!(opts.tol > 0.0)) throw std::invalid_argument("nash_equilibrium: tol must be positive");

    BetaHat bh = make_beta_hat(inst.config, inst.marginal_set);
    const auto& members = bh.members;
    const std::size_t m = members.size();
    const double alpha_bar = inst.config.alpha_bar;

    std::vector<double> intercepts(m);
    BidVector alpha = std::move(initial);
    double sum_terms = 0.0;  // running Sum alpha_k / beta_k over members
    for (std::size_t k = 0; k < m; ++k) {
        const int i = members[k];
        alpha[i] = clamp_bid(alpha[i], alpha_bar);
        intercepts[k] = thetas[i].intercept(inst.fuel_price);
        sum_terms += alpha[i] / inst.config.beta[i];
    }

    auto response = [&](std::size_t k) {
        const int i = members[k];
        const double q_i = (inst.demand + sum_terms - alpha[i] / inst.config.beta[i]) /
                           bh.inv_beta_sum;
        return interior_best_response(bh.beta_hat[k], q_i, intercepts[k], alpha_bar);
    };

    double residual = 0.0;
    for (int round = 0; round <= opts.max_rounds; ++round) {
        // Simultaneous residual check at the frozen profile.
        residual = 0.0;
        for (std::size_t k = 0; k < m; ++k)
            residual = std::max(residual, std::fabs(response(k) - alpha[members[k]]));
        if (residual <= opts.tol) return alpha;

        // Gauss-Seidel sweep in index order.
        for (std::size_t k = 0; k < m; ++k) {
            const int i = members[k];
            const double updated = response(k);
            sum_terms += (updated - alpha[i]) / inst.config.beta[i];
            alpha[i] = updated;
        }
    }
    throw ConvergenceError("nash_equilibrium: no convergence after " +
                               std::to_string(opts.max_rounds) + " rounds",
                           alpha, residual);
}

}  // namespace sfe
