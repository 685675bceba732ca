#include "sfe/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

#include "sfe/rng.hpp"

namespace sfe {

namespace {

double truncated_gaussian(Rng& rng, double nu) {
    const double sigma = 0.5 * nu;
    for (;;) {
        const double u1 = 1.0 - rng.next_double();  // (0, 1]
        const double u2 = rng.next_double();
        const double z = std::sqrt(-2.0 * std::log(u1)) *
                         std::cos(2.0 * 3.14159265358979323846 * u2);
        const double u = sigma * z;
        if (std::fabs(u) <= nu) return u;
    }
}

double draw_noise(Rng& rng, double nu, NoiseDistribution dist) {
    switch (dist) {
        case NoiseDistribution::Uniform:
            return rng.uniform(-nu, nu);
        case NoiseDistribution::TruncatedGaussian:
            return truncated_gaussian(rng, nu);
    }
    throw std::logic_error("draw_noise: unknown distribution");
}

}  // namespace

void ScenarioRanges::validate() const {
    if (!(demand_lo > 0.0 && demand_lo < demand_hi))
        throw std::invalid_argument("ScenarioRanges: need 0 < demand_lo < demand_hi");
    if (!(fuel_lo > 0.0 && fuel_lo < fuel_hi))
        throw std::invalid_argument("ScenarioRanges: need 0 < fuel_lo < fuel_hi");
}

GroundTruth generate_market(int n) {
    if (n < 2) throw std::domain_error("generate_market: need at least two suppliers");
    GroundTruth truth;
    truth.config.n_suppliers = n;
    truth.config.alpha_bar = 200.0;
    const double step = 1.0 / static_cast<double>(n - 1);
    for (int i = 0; i < n; ++i) {
        const double f = i * step;
        truth.thetas.push_back({7.0 - 2.0 * f, 0.7 + 0.2 * f});
        const double c2 = 0.05 + 0.02 * f;
        truth.config.beta.push_back(2.0 * c2);
        truth.config.p_min.push_back(0.0);
        truth.config.p_max.push_back(std::numeric_limits<double>::infinity());
    }
    truth.config.validate();
    return truth;
}

std::vector<Observation> generate_observations(const GroundTruth& truth, int m,
                                               const ScenarioRanges& ranges, double noise_level,
                                               std::uint64_t seed, NoiseDistribution dist) {
    truth.config.validate();
    ranges.validate();
    if (m < 1) throw std::invalid_argument("generate_observations: need at least one sample");
    if (noise_level < 0.0)
        throw std::invalid_argument("generate_observations: noise level must be >= 0");
    if (truth.thetas.size() != static_cast<std::size_t>(truth.config.n_suppliers))
        throw std::invalid_argument("generate_observations: theta/config size mismatch");

    const int n = truth.config.n_suppliers;
    std::vector<int> members(n);
    std::iota(members.begin(), members.end(), 0);

    Rng scenario_rng(Rng::derive(seed, 0));
    std::vector<Observation> dataset;
    dataset.reserve(m);
    for (int j = 0; j < m; ++j) {
        Observation obs;
        obs.demand = scenario_rng.uniform(ranges.demand_lo, ranges.demand_hi);
        obs.fuel_price = scenario_rng.uniform(ranges.fuel_lo, ranges.fuel_hi);
        obs.marginal_set = members;

        GameInstance inst;
        inst.config = truth.config;
        inst.demand = obs.demand;
        inst.fuel_price = obs.fuel_price;
        inst.marginal_set = members;
        obs.bids = nash_equilibrium(truth.thetas, inst, NashOptions{1e-12, 50000});

        if (noise_level > 0.0) {
            Rng noise_rng(Rng::derive(seed, static_cast<std::uint64_t>(j) + 1));
            for (double& bid : obs.bids)
                bid = std::clamp(bid * (1.0 + draw_noise(noise_rng, noise_level, dist)), 0.0,
                                 truth.config.alpha_bar);
        }

        const MarginalClearing mc =
            marginal_clearing(truth.config, obs.bids, members, obs.demand);
        obs.price = mc.price;
        obs.dispatch = mc.dispatch;
        dataset.push_back(std::move(obs));
    }
    return dataset;
}

double recover_bids(double price, double dispatch, double beta) {
    if (!(beta > 0.0)) throw std::invalid_argument("recover_bids: beta must be positive");
    return price - beta * dispatch;
}

double recover_bids(double price, double dispatch, double beta, double p_min, double p_max) {
    if (!(dispatch > p_min && dispatch < p_max))
        throw std::domain_error(
            "recover_bids: dispatch is at a capacity bound; the bid is unidentifiable");
    return recover_bids(price, dispatch, beta);
}

double wen_david_bid(const std::vector<Observation>& history, const MarketConfig& config, int i,
                     double demand, double fuel, const CostParams& theta_i) {
    config.validate();
    if (history.empty()) throw std::domain_error("wen_david_bid: empty bid history");
    if (i < 0 || i >= config.n_suppliers)
        throw std::invalid_argument("wen_david_bid: supplier index out of range");

    BidVector rival_means(config.n_suppliers, 0.0);
    for (const Observation& obs : history) {
        if (obs.bids.size() != static_cast<std::size_t>(config.n_suppliers))
            throw std::invalid_argument("wen_david_bid: bid vector size mismatch in history");
        for (int k = 0; k < config.n_suppliers; ++k) rival_means[k] += obs.bids[k];
    }
    for (double& mean : rival_means) mean /= static_cast<double>(history.size());

    GameInstance inst;
    inst.config = config;
    inst.demand = demand;
    inst.fuel_price = fuel;
    inst.marginal_set.resize(config.n_suppliers);
    std::iota(inst.marginal_set.begin(), inst.marginal_set.end(), 0);
    return best_response(theta_i, rival_means, inst, i);
}

}  // namespace sfe
