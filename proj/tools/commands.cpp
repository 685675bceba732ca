#include "commands.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "sfe/errors.hpp"
#include "sfe/io.hpp"
#include "sfe/market.hpp"
#include "sfe/rng.hpp"

namespace sfe::cli {

namespace {

namespace fs = std::filesystem;

// The three named benchmark instances: (a) interpolation below the training
// ranges' centre, (b) inside them, (c) extrapolation above both ranges.
const std::vector<std::tuple<std::string, double, double>> kNamedInstances = {
    {"a", 45.0, 8.0}, {"b", 75.0, 20.0}, {"c", 110.0, 35.0}};

int run_guarded(std::ostream& err, const std::function<void()>& body) {
    try {
        body();
        return kExitOk;
    } catch (const IoError& e) {
        err << "error: " << e.what() << '\n';
        return kExitConfigError;
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << '\n';
        return kExitConfigError;
    } catch (const EstimationError& e) {
        err << "error: " << e.what() << '\n';
        for (std::size_t k = 0; k < e.failures.size() && k < 5; ++k)
            err << "  iteration " << k << ": " << e.failures[k] << '\n';
        if (e.failures.size() > 5)
            err << "  ... " << e.failures.size() - 5 << " more\n";
        return kExitNumericalError;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitNumericalError;
    }
}

GroundTruth load_market(const std::string& truth_path, int n) {
    if (!truth_path.empty()) return read_truth_json(truth_path);
    return generate_market(n);
}

NoiseDistribution parse_distribution(const std::string& name) {
    if (name == "uniform") return NoiseDistribution::Uniform;
    if (name == "truncated-gaussian") return NoiseDistribution::TruncatedGaussian;
    throw std::invalid_argument("unknown noise distribution '" + name +
                                "' (use uniform or truncated-gaussian)");
}

InverseOptions parse_solver(const std::string& name) {
    InverseOptions options;
    if (name == "auto")
        options.solver = InverseSolver::Auto;
    else if (name == "simplex")
        options.solver = InverseSolver::Simplex;
    else if (name == "reduced")
        options.solver = InverseSolver::Reduced;
    else
        throw std::invalid_argument("unknown solver '" + name +
                                    "' (use auto, simplex, or reduced)");
    return options;
}

std::string out_file(const std::string& dir, const std::string& name) {
    fs::create_directories(dir);
    return (fs::path(dir) / name).string();
}

std::vector<std::pair<double, double>> build_scenarios(const TestSpec& test) {
    if (!test.explicit_scenarios.empty()) return test.explicit_scenarios;
    test.ranges.validate();
    if (test.count < 1)
        throw std::invalid_argument("test scenario count must be at least 1");
    Rng rng(Rng::derive(test.seed, 0));
    std::vector<std::pair<double, double>> scenarios;
    scenarios.reserve(test.count);
    for (int k = 0; k < test.count; ++k) {
        const double q = rng.uniform(test.ranges.demand_lo, test.ranges.demand_hi);
        const double xi = rng.uniform(test.ranges.fuel_lo, test.ranges.fuel_hi);
        scenarios.emplace_back(q, xi);
    }
    return scenarios;
}

GameInstance full_instance(const MarketConfig& config, double demand, double fuel) {
    GameInstance inst;
    inst.config = config;
    inst.demand = demand;
    inst.fuel_price = fuel;
    inst.marginal_set.resize(config.n_suppliers);
    std::iota(inst.marginal_set.begin(), inst.marginal_set.end(), 0);
    return inst;
}

BidVector equilibrium_bids(const std::vector<CostParams>& thetas, const MarketConfig& config,
                           double demand, double fuel) {
    return nash_equilibrium(thetas, full_instance(config, demand, fuel),
                            NashOptions{1e-10, 50000});
}

double total_profit(const std::vector<CostParams>& costs, const BidVector& bids,
                    const MarketConfig& config, double demand, double fuel) {
    const GameInstance inst = full_instance(config, demand, fuel);
    double total = 0.0;
    for (int i = 0; i < config.n_suppliers; ++i) total += profit(costs[i], bids, inst, i);
    return total;
}

double scenario_discrepancy(const BidVector& a, const BidVector& b, int n) {
    return discrepancy({a}, {b}, n);
}

}  // namespace

int cmd_generate(const GenerateArgs& args, std::ostream& out, std::ostream& err) {
    return run_guarded(err, [&] {
        const GroundTruth truth = load_market(args.truth_path, args.n);
        const NoiseDistribution dist = parse_distribution(args.distribution);
        const std::vector<Observation> dataset =
            generate_observations(truth, args.m, args.ranges, args.noise, args.seed, dist);
        const std::string dataset_path = out_file(args.out_dir, "dataset.csv");
        const std::string truth_path = out_file(args.out_dir, "truth.json");
        write_dataset_csv(dataset_path, dataset, truth.config);
        write_truth_json(truth_path, truth);
        out << "wrote " << dataset_path << " (" << dataset.size() << " observations, "
            << truth.config.n_suppliers << " suppliers, noise " << args.noise << ")\n";
        out << "wrote " << truth_path << '\n';
    });
}

int cmd_estimate(const EstimateArgs& args, std::ostream& out, std::ostream& err) {
    return run_guarded(err, [&] {
        if (args.dataset_path.empty())
            throw std::invalid_argument("estimate requires a dataset path");
        if (args.truth_path.empty())
            throw std::invalid_argument("estimate requires a market description (truth JSON)");
        const GroundTruth truth = read_truth_json(args.truth_path);
        const std::vector<Observation> dataset =
            read_dataset_csv(args.dataset_path, truth.config);
        const InverseOptions options = parse_solver(args.solver);

        const auto start = std::chrono::steady_clock::now();
        const SearchResult result = random_search(dataset, truth.config, args.search,
                                                  truth.thetas, options, args.workers);
        const double elapsed =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

        int failed = 0;
        double best_z = 0.0;
        double best_mape = std::numeric_limits<double>::quiet_NaN();
        for (const IterationRecord& rec : result.log) {
            if (!rec.success) {
                ++failed;
                continue;
            }
            if (rec.discrepancy == result.best_discrepancy) {
                best_z = rec.z;
                if (rec.mape) best_mape = *rec.mape;
            }
        }

        write_iteration_log_csv(out_file(args.out_dir, "iterations.csv"), result);
        write_thetas_json(out_file(args.out_dir, "best_thetas.json"), result.best_thetas,
                          best_z, result.best_discrepancy);

        out << "iterations: " << result.iterations_run << " (" << failed << " failed)\n";
        out << "best discrepancy: " << format_double(result.best_discrepancy) << '\n';
        if (!std::isnan(best_mape)) out << "best MAPE: " << format_double(best_mape) << "%\n";
        out << "wall time: " << elapsed << " s\n";
        if (failed > 0) {
            out << "failed iterations:";
            for (const IterationRecord& rec : result.log)
                if (!rec.success) out << ' ' << rec.iter;
            out << '\n';
        }
    });
}

int cmd_evaluate(const EvaluateArgs& args, std::ostream& out, std::ostream& err) {
    return run_guarded(err, [&] {
        if (args.truth_path.empty() || args.thetas_path.empty())
            throw std::invalid_argument("evaluate requires truth and thetas paths");
        const GroundTruth truth = read_truth_json(args.truth_path);
        const std::vector<CostParams> thetas_hat = read_thetas_json(args.thetas_path);
        if (thetas_hat.size() != truth.thetas.size())
            throw std::invalid_argument("estimated thetas disagree with the market size");
        const int n = truth.config.n_suppliers;

        const auto scenarios = build_scenarios(args.test);
        std::ofstream scen(out_file(args.out_dir, "scenarios.csv"));
        scen << "scenario_id,Q,xi,d\n";
        double sum = 0.0;
        double sum_sq = 0.0;
        for (std::size_t k = 0; k < scenarios.size(); ++k) {
            const auto [q, xi] = scenarios[k];
            const BidVector hat = equilibrium_bids(thetas_hat, truth.config, q, xi);
            const BidVector exact = equilibrium_bids(truth.thetas, truth.config, q, xi);
            const double d = scenario_discrepancy(exact, hat, n);
            sum += d;
            sum_sq += d * d;
            scen << k << ',' << format_double(q) << ',' << format_double(xi) << ','
                 << format_double(d) << '\n';
        }
        const double mean = sum / static_cast<double>(scenarios.size());
        const double var =
            std::max(0.0, sum_sq / static_cast<double>(scenarios.size()) - mean * mean);

        std::ofstream bids_csv(out_file(args.out_dir, "instance_bids.csv"));
        bids_csv << "instance,Q,xi,supplier,alpha_hat,alpha_true,profit_hat,profit_true\n";
        std::ofstream totals_csv(out_file(args.out_dir, "instance_totals.csv"));
        totals_csv << "instance,Q,xi,total_profit_hat,total_profit_true,d\n";
        for (const auto& [label, q, xi] : kNamedInstances) {
            const BidVector hat = equilibrium_bids(thetas_hat, truth.config, q, xi);
            const BidVector exact = equilibrium_bids(truth.thetas, truth.config, q, xi);
            const GameInstance inst = full_instance(truth.config, q, xi);
            double total_hat = 0.0;
            double total_true = 0.0;
            for (int i = 0; i < n; ++i) {
                const double p_hat = profit(thetas_hat[i], hat, inst, i);
                const double p_true = profit(truth.thetas[i], exact, inst, i);
                total_hat += p_hat;
                total_true += p_true;
                bids_csv << label << ',' << format_double(q) << ',' << format_double(xi)
                         << ',' << i << ',' << format_double(hat[i]) << ','
                         << format_double(exact[i]) << ',' << format_double(p_hat) << ','
                         << format_double(p_true) << '\n';
            }
            totals_csv << label << ',' << format_double(q) << ',' << format_double(xi) << ','
                       << format_double(total_hat) << ',' << format_double(total_true) << ','
                       << format_double(scenario_discrepancy(exact, hat, n)) << '\n';
        }
        if (!scen || !bids_csv || !totals_csv)
            throw IoError("error while writing evaluation reports to '" + args.out_dir + "'");

        out << "scenarios: " << scenarios.size() << '\n';
        out << "mean d: " << format_double(mean) << '\n';
        out << "std d: " << format_double(std::sqrt(var)) << '\n';
    });
}

int cmd_baseline(const BaselineArgs& args, std::ostream& out, std::ostream& err) {
    return run_guarded(err, [&] {
        if (args.truth_path.empty() || args.thetas_path.empty() || args.dataset_path.empty())
            throw std::invalid_argument("baseline requires truth, thetas, and dataset paths");
        const GroundTruth truth = read_truth_json(args.truth_path);
        const std::vector<CostParams> thetas_hat = read_thetas_json(args.thetas_path);
        const std::vector<Observation> history =
            read_dataset_csv(args.dataset_path, truth.config);
        const int n = truth.config.n_suppliers;

        auto baseline_bids = [&](double q, double xi) {
            BidVector bids(n);
            for (int i = 0; i < n; ++i)
                bids[i] = wen_david_bid(history, truth.config, i, q, xi, truth.thetas[i]);
            return bids;
        };

        const auto scenarios = build_scenarios(args.test);
        std::ofstream scen(out_file(args.out_dir, "baseline_scenarios.csv"));
        scen << "scenario_id,Q,xi,d_inverse,d_baseline\n";
        double sum_inv = 0.0;
        double sum_base = 0.0;
        for (std::size_t k = 0; k < scenarios.size(); ++k) {
            const auto [q, xi] = scenarios[k];
            const BidVector exact = equilibrium_bids(truth.thetas, truth.config, q, xi);
            const double d_inv = scenario_discrepancy(
                exact, equilibrium_bids(thetas_hat, truth.config, q, xi), n);
            const double d_base = scenario_discrepancy(exact, baseline_bids(q, xi), n);
            sum_inv += d_inv;
            sum_base += d_base;
            scen << k << ',' << format_double(q) << ',' << format_double(xi) << ','
                 << format_double(d_inv) << ',' << format_double(d_base) << '\n';
        }

        std::ofstream inst_csv(out_file(args.out_dir, "baseline_instances.csv"));
        inst_csv << "instance,Q,xi,d_inverse,d_baseline,total_profit_inverse,"
                    "total_profit_baseline,total_profit_true\n";
        for (const auto& [label, q, xi] : kNamedInstances) {
            const BidVector exact = equilibrium_bids(truth.thetas, truth.config, q, xi);
            const BidVector inv = equilibrium_bids(thetas_hat, truth.config, q, xi);
            const BidVector base = baseline_bids(q, xi);
            inst_csv << label << ',' << format_double(q) << ',' << format_double(xi) << ','
                     << format_double(scenario_discrepancy(exact, inv, n)) << ','
                     << format_double(scenario_discrepancy(exact, base, n)) << ','
                     << format_double(total_profit(truth.thetas, inv, truth.config, q, xi))
                     << ','
                     << format_double(total_profit(truth.thetas, base, truth.config, q, xi))
                     << ','
                     << format_double(total_profit(truth.thetas, exact, truth.config, q, xi))
                     << '\n';
        }
        if (!scen || !inst_csv)
            throw IoError("error while writing baseline reports to '" + args.out_dir + "'");

        const double count = static_cast<double>(scenarios.size());
        out << "scenarios: " << scenarios.size() << '\n';
        out << "mean d (inverse): " << format_double(sum_inv / count) << '\n';
        out << "mean d (baseline): " << format_double(sum_base / count) << '\n';
    });
}

int cmd_advise(const AdviseArgs& args, std::ostream& out, std::ostream& err) {
    return run_guarded(err, [&] {
        if (args.truth_path.empty() || args.thetas_path.empty())
            throw std::invalid_argument("advise requires truth and thetas paths");
        const GroundTruth truth = read_truth_json(args.truth_path);
        const std::vector<CostParams> thetas_hat = read_thetas_json(args.thetas_path);
        if (thetas_hat.size() != static_cast<std::size_t>(truth.config.n_suppliers))
            throw std::invalid_argument("estimated thetas disagree with the market size");

        const BidVector bids =
            equilibrium_bids(thetas_hat, truth.config, args.demand, args.fuel);
        const ClearingOutcome outcome = clear_market(truth.config, bids, args.demand);

        out << "clearing price: " << format_double(outcome.price) << '\n';
        out << "supplier,alpha,dispatch,profit\n";
        for (int i = 0; i < truth.config.n_suppliers; ++i) {
            const double cost_intercept =
                thetas_hat[i].theta1 + thetas_hat[i].theta2 * args.fuel;
            const double p = outcome.dispatch[i];
            const double phi = (outcome.price - cost_intercept) * p -
                               0.5 * truth.config.beta[i] * p * p;
            out << i << ',' << format_double(bids[i]) << ',' << format_double(p) << ','
                << format_double(phi) << '\n';
        }
    });
}

int cmd_bounds(const BoundsArgs& args, std::ostream& out, std::ostream& err) {
    return run_guarded(err, [&] {
        const GroundTruth truth = load_market(args.truth_path, args.n);
        std::vector<int> members(truth.config.n_suppliers);
        std::iota(members.begin(), members.end(), 0);
        const TheoryBounds tb = compute_theory_bounds(truth.config, members, args.m_t,
                                                      args.delta, args.epsilon, args.eps_bar);
        out << "eta = " << format_double(tb.eta) << '\n';
        out << "gamma = " << format_double(tb.gamma) << '\n';
        out << "tau_threshold = " << format_double(tb.tau_threshold) << '\n';
        out << "termination_T = " << tb.termination_T << '\n';
    });
}

}  // namespace sfe::cli
