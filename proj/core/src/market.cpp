#include "sfe/market.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

namespace sfe {

namespace {

// Absolute tolerance on price comparisons for set-membership tests.
constexpr double kPriceTol = 1e-9;

enum class Status { Marginal, AtMax, AtMin };

}  // namespace

void MarketConfig::validate() const {
    if (n_suppliers <= 0) throw std::invalid_argument("MarketConfig: n_suppliers must be positive");
    const auto n = static_cast<std::size_t>(n_suppliers);
    if (beta.size() != n || p_min.size() != n || p_max.size() != n)
        throw std::invalid_argument("MarketConfig: vector sizes do not match n_suppliers");
    for (int i = 0; i < n_suppliers; ++i) {
        if (!(beta[i] > 0.0) || !std::isfinite(beta[i]))
            throw std::invalid_argument("MarketConfig: beta must be positive and finite");
        if (std::isnan(p_min[i]) || std::isnan(p_max[i]) || p_min[i] < 0.0 || p_min[i] > p_max[i])
            throw std::invalid_argument("MarketConfig: need 0 <= p_min <= p_max");
    }
    if (!(alpha_bar > 0.0)) throw std::invalid_argument("MarketConfig: alpha_bar must be positive");
}

double MarketConfig::total_p_min() const {
    return std::accumulate(p_min.begin(), p_min.end(), 0.0);
}

double MarketConfig::total_p_max() const {
    return std::accumulate(p_max.begin(), p_max.end(), 0.0);
}

void IslandPartition::validate(const MarketConfig& config) const {
    if (islands.size() != island_demand.size())
        throw std::invalid_argument("IslandPartition: demand list size mismatch");
    std::vector<char> seen(config.n_suppliers, 0);
    for (const auto& island : islands) {
        for (int i : island) {
            if (i < 0 || i >= config.n_suppliers)
                throw std::invalid_argument("IslandPartition: supplier index out of range");
            if (seen[i]) throw std::invalid_argument("IslandPartition: islands are not disjoint");
            seen[i] = 1;
        }
    }
}

BetaHat make_beta_hat(const MarketConfig& config, const std::vector<int>& members) {
    if (members.empty()) throw std::domain_error("make_beta_hat: empty marginal set");
    BetaHat bh;
    bh.members = members;
    std::sort(bh.members.begin(), bh.members.end());
    bh.beta_hat.resize(bh.members.size());
    for (int i : bh.members) bh.inv_beta_sum += 1.0 / config.beta[i];
    for (std::size_t k = 0; k < bh.members.size(); ++k)
        bh.beta_hat[k] = (1.0 / config.beta[bh.members[k]]) / bh.inv_beta_sum;

    // Simplex invariants: weights sum to one; strictly interior for |I| >= 2.
    double sum = std::accumulate(bh.beta_hat.begin(), bh.beta_hat.end(), 0.0);
    assert(std::fabs(sum - 1.0) <= 1e-12 * bh.members.size());
    (void)sum;
    if (bh.members.size() >= 2) {
        for (double w : bh.beta_hat) assert(w > 0.0 && w < 1.0);
    }
    return bh;
}

MarginalClearing marginal_clearing(const MarketConfig& config, const BidVector& bids,
                                   const std::vector<int>& members, double effective_demand) {
    if (members.empty()) throw std::domain_error("marginal_clearing: empty marginal set");
    double inv_beta_sum = 0.0;
    double intercept_sum = 0.0;
    for (int i : members) {
        inv_beta_sum += 1.0 / config.beta[i];
        intercept_sum += bids[i] / config.beta[i];
    }
    MarginalClearing out;
    out.price = (effective_demand + intercept_sum) / inv_beta_sum;
    out.dispatch.resize(members.size());
    for (std::size_t k = 0; k < members.size(); ++k)
        out.dispatch[k] = (out.price - bids[members[k]]) / config.beta[members[k]];
    return out;
}

namespace {

// Aggregate supply at price r: each supplier offers its inverse supply
// function clipped to capacity. Continuous and nondecreasing in r.
double aggregate_supply(const MarketConfig& config, const BidVector& bids, double r) {
    double total = 0.0;
    for (int i = 0; i < config.n_suppliers; ++i)
        total += std::clamp((r - bids[i]) / config.beta[i], config.p_min[i], config.p_max[i]);
    return total;
}

}  // namespace

ClearingOutcome clear_market(const MarketConfig& config, const BidVector& bids,
                             double q_forecast) {
    config.validate();
    if (bids.size() != static_cast<std::size_t>(config.n_suppliers))
        throw std::invalid_argument("clear_market: bid vector size mismatch");

    const double lo = config.total_p_min();
    const double hi = config.total_p_max();
    const double feas_tol = 1e-9 * std::max(1.0, std::fabs(q_forecast));
    if (q_forecast < lo - feas_tol || q_forecast > hi + feas_tol)
        throw std::domain_error("clear_market: infeasible demand " + std::to_string(q_forecast));

    const int n = config.n_suppliers;
    std::vector<double> down(n), up(n);
    std::vector<double> breakpoints;
    for (int i = 0; i < n; ++i) {
        down[i] = bids[i] + config.beta[i] * config.p_min[i];
        up[i] = bids[i] + config.beta[i] * config.p_max[i];
        breakpoints.push_back(down[i]);
        if (std::isfinite(up[i])) breakpoints.push_back(up[i]);
    }
    std::sort(breakpoints.begin(), breakpoints.end());
    breakpoints.erase(std::unique(breakpoints.begin(), breakpoints.end()), breakpoints.end());

    // Lowest price at which the monotone aggregate supply meets demand.
    // The curve is affine between breakpoints, so each segment solves exactly.
    double price = 0.0;
    bool clamped = false;
    if (q_forecast <= aggregate_supply(config, bids, breakpoints.front())) {
        price = breakpoints.front();
        clamped = q_forecast < lo;  // only reachable through the feasibility tolerance
    } else {
        bool found = false;
        for (std::size_t k = 1; k < breakpoints.size() && !found; ++k) {
            const double left = breakpoints[k - 1];
            const double right = breakpoints[k];
            const double supply_right = aggregate_supply(config, bids, right);
            if (supply_right < q_forecast) continue;
            double slope = 0.0;  // marginal suppliers throughout the open segment
            for (int i = 0; i < n; ++i)
                if (down[i] <= left && up[i] >= right) slope += 1.0 / config.beta[i];
            if (slope > 0.0) {
                const double supply_left = aggregate_supply(config, bids, left);
                price = left + (q_forecast - supply_left) / slope;
            } else {
                price = left;  // flat segment: demand met over a price interval
                clamped = true;
            }
            found = true;
        }
        if (!found) {
            double tail_slope = 0.0;  // uncapacitated suppliers above the last breakpoint
            for (int i = 0; i < n; ++i)
                if (!std::isfinite(up[i])) tail_slope += 1.0 / config.beta[i];
            if (tail_slope > 0.0) {
                const double last = breakpoints.back();
                price = last + (q_forecast - aggregate_supply(config, bids, last)) / tail_slope;
            } else {
                price = breakpoints.back();  // demand past total capacity, within tolerance
                clamped = true;
            }
        }
    }

    // Classify against the found price (threshold equality stays marginal),
    // then project the price onto the marginal set for an exact balance.
    std::vector<Status> status(n);
    double q_eff = q_forecast;
    const int max_passes = 2 * n + 2;
    for (int pass = 0;; ++pass) {
        if (pass > max_passes)
            throw std::logic_error("clear_market: partition classification did not settle");
        std::vector<int> members;
        q_eff = q_forecast;
        for (int i = 0; i < n; ++i) {
            if (price > up[i] + kPriceTol) {
                status[i] = Status::AtMax;
                q_eff -= config.p_max[i];
            } else if (price < down[i] - kPriceTol) {
                status[i] = Status::AtMin;
                q_eff -= config.p_min[i];
            } else {
                status[i] = Status::Marginal;
                members.push_back(i);
            }
        }
        if (clamped) break;  // boundary outcome: price pinned at a threshold
        assert(!members.empty());
        const double projected = marginal_clearing(config, bids, members, q_eff).price;
        const bool settled = std::fabs(projected - price) <= 1e-12 * std::max(1.0, std::fabs(price));
        price = projected;
        if (settled) break;
    }

    ClearingOutcome out;
    out.price = price;
    out.clamped = clamped;
    out.effective_demand = q_eff;
    out.dispatch.resize(n);
    for (int i = 0; i < n; ++i) {
        switch (status[i]) {
            case Status::Marginal:
                out.marginal_set.push_back(i);
                out.dispatch[i] = clamped ? std::clamp((price - bids[i]) / config.beta[i],
                                                       config.p_min[i], config.p_max[i])
                                          : (price - bids[i]) / config.beta[i];
                break;
            case Status::AtMax:
                out.at_max_set.push_back(i);
                out.dispatch[i] = config.p_max[i];
                break;
            case Status::AtMin:
                out.at_min_set.push_back(i);
                out.dispatch[i] = config.p_min[i];
                break;
        }
    }
    return out;
}

std::vector<ClearingOutcome> clear_islands(const MarketConfig& config, const BidVector& bids,
                                           const IslandPartition& partition) {
    config.validate();
    partition.validate(config);

    std::vector<ClearingOutcome> outcomes;
    outcomes.reserve(partition.islands.size());
    for (std::size_t s = 0; s < partition.islands.size(); ++s) {
        const auto& island = partition.islands[s];
        if (island.empty()) throw std::domain_error("clear_islands: island with no suppliers");

        MarketConfig sub;
        sub.n_suppliers = static_cast<int>(island.size());
        BidVector sub_bids(island.size());
        sub.alpha_bar = config.alpha_bar;
        for (std::size_t k = 0; k < island.size(); ++k) {
            sub.beta.push_back(config.beta[island[k]]);
            sub.p_min.push_back(config.p_min[island[k]]);
            sub.p_max.push_back(config.p_max[island[k]]);
            sub_bids[k] = bids[island[k]];
        }
        ClearingOutcome sub_out = clear_market(sub, sub_bids, partition.island_demand[s]);
        if (sub_out.marginal_set.empty())
            throw std::domain_error("clear_islands: island has no marginal supplier");

        // Map back to global indices; dispatch is full-sized, zero off-island.
        ClearingOutcome out;
        out.price = sub_out.price;
        out.clamped = sub_out.clamped;
        out.effective_demand = sub_out.effective_demand;
        out.dispatch.assign(config.n_suppliers, 0.0);
        for (std::size_t k = 0; k < island.size(); ++k)
            out.dispatch[island[k]] = sub_out.dispatch[k];
        for (int k : sub_out.marginal_set) out.marginal_set.push_back(island[k]);
        for (int k : sub_out.at_max_set) out.at_max_set.push_back(island[k]);
        for (int k : sub_out.at_min_set) out.at_min_set.push_back(island[k]);
        std::sort(out.marginal_set.begin(), out.marginal_set.end());
        std::sort(out.at_max_set.begin(), out.at_max_set.end());
        std::sort(out.at_min_set.begin(), out.at_min_set.end());
        outcomes.push_back(std::move(out));
    }
    return outcomes;
}

}  // namespace sfe
