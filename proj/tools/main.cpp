// Command-line front end. Every subcommand can read shared settings from a
// JSON config file (--config); explicit flags always override config values,
// which in turn override built-in defaults (and, for --workers, the
// SFE_WORKERS environment variable).
#include <cstdlib>
#include <fstream>
#include <initializer_list>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "commands.hpp"

namespace {

using nlohmann::json;
using namespace sfe::cli;

json load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open config file '" + path + "'");
    json cfg;
    try {
        in >> cfg;
    } catch (const json::parse_error& e) {
        throw std::invalid_argument("config '" + path + "': " + e.what());
    }
    if (!cfg.is_object())
        throw std::invalid_argument("config '" + path + "' must be a JSON object");
    return cfg;
}

const json* section(const json& cfg, const char* name) {
    const auto it = cfg.find(name);
    if (it == cfg.end()) return nullptr;
    if (!it->is_object())
        throw std::invalid_argument(std::string("config section '") + name +
                                    "' must be an object");
    return &*it;
}

// Each section names its inputs either by file path or inline ("spec" keys);
// mixing the two, or providing neither, is a config error.
void require_exactly_one(const json& sec, const char* name, const char* path_key,
                         std::initializer_list<const char*> spec_keys) {
    const bool has_path = sec.contains(path_key);
    bool has_spec = false;
    for (const char* key : spec_keys)
        if (sec.contains(key)) has_spec = true;
    if (has_path && has_spec)
        throw std::invalid_argument(std::string("config section '") + name +
                                    "' must give exactly one of '" + path_key +
                                    "' or an inline spec, not both");
    if (!has_path && !has_spec)
        throw std::invalid_argument(std::string("config section '") + name +
                                    "' is present but names neither '" + path_key +
                                    "' nor an inline spec");
}

double get_number(const json& sec, const char* name, const char* key, double fallback) {
    const auto it = sec.find(key);
    if (it == sec.end()) return fallback;
    if (!it->is_number())
        throw std::invalid_argument(std::string("config ") + name + "." + key +
                                    " must be a number");
    return it->get<double>();
}

int get_int(const json& sec, const char* name, const char* key, int fallback) {
    const auto it = sec.find(key);
    if (it == sec.end()) return fallback;
    if (!it->is_number_integer())
        throw std::invalid_argument(std::string("config ") + name + "." + key +
                                    " must be an integer");
    return it->get<int>();
}

std::uint64_t get_seed(const json& sec, const char* name, const char* key,
                       std::uint64_t fallback) {
    const auto it = sec.find(key);
    if (it == sec.end()) return fallback;
    if (!it->is_number_unsigned() && !it->is_number_integer())
        throw std::invalid_argument(std::string("config ") + name + "." + key +
                                    " must be a non-negative integer");
    if (it->is_number_integer() && it->get<long long>() < 0)
        throw std::invalid_argument(std::string("config ") + name + "." + key +
                                    " must be a non-negative integer");
    return it->get<std::uint64_t>();
}

std::string get_string(const json& sec, const char* name, const char* key,
                       const std::string& fallback) {
    const auto it = sec.find(key);
    if (it == sec.end()) return fallback;
    if (!it->is_string())
        throw std::invalid_argument(std::string("config ") + name + "." + key +
                                    " must be a string");
    return it->get<std::string>();
}

void apply_range_pair(const json& ranges, const char* name, const char* key, double& lo,
                      double& hi) {
    const auto it = ranges.find(key);
    if (it == ranges.end()) return;
    if (!it->is_array() || it->size() != 2 || !(*it)[0].is_number() || !(*it)[1].is_number())
        throw std::invalid_argument(std::string("config ") + name + ".ranges." + key +
                                    " must be [lo, hi]");
    lo = (*it)[0].get<double>();
    hi = (*it)[1].get<double>();
}

void apply_ranges(const json& sec, const char* name, sfe::ScenarioRanges& ranges) {
    const auto it = sec.find("ranges");
    if (it == sec.end()) return;
    if (!it->is_object())
        throw std::invalid_argument(std::string("config ") + name +
                                    ".ranges must be an object");
    apply_range_pair(*it, name, "demand", ranges.demand_lo, ranges.demand_hi);
    apply_range_pair(*it, name, "fuel", ranges.fuel_lo, ranges.fuel_hi);
}

// Fill every command's argument struct from the shared config. Unknown
// sections or keys are rejected nowhere on purpose: a config may carry
// settings for several subcommands at once.
struct AllArgs {
    GenerateArgs generate;
    EstimateArgs estimate;
    EvaluateArgs evaluate;
    BaselineArgs baseline;
    AdviseArgs advise;
    BoundsArgs bounds;
};

void apply_config(const json& cfg, AllArgs& a) {
    if (const json* market = section(cfg, "market")) {
        require_exactly_one(*market, "market", "truth_path", {"n"});
        const std::string truth = get_string(*market, "market", "truth_path", "");
        if (!truth.empty()) {
            a.generate.truth_path = truth;
            a.estimate.truth_path = truth;
            a.evaluate.truth_path = truth;
            a.baseline.truth_path = truth;
            a.advise.truth_path = truth;
            a.bounds.truth_path = truth;
        }
        const int n = get_int(*market, "market", "n", a.generate.n);
        a.generate.n = n;
        a.bounds.n = n;
    }
    if (const json* dataset = section(cfg, "dataset")) {
        require_exactly_one(*dataset, "dataset", "path",
                            {"m", "noise", "seed", "distribution", "ranges"});
        const std::string path = get_string(*dataset, "dataset", "path", "");
        if (!path.empty()) {
            a.estimate.dataset_path = path;
            a.baseline.dataset_path = path;
        }
        a.generate.m = get_int(*dataset, "dataset", "m", a.generate.m);
        a.generate.noise = get_number(*dataset, "dataset", "noise", a.generate.noise);
        a.generate.seed = get_seed(*dataset, "dataset", "seed", a.generate.seed);
        a.generate.distribution =
            get_string(*dataset, "dataset", "distribution", a.generate.distribution);
        apply_ranges(*dataset, "dataset", a.generate.ranges);
    }
    if (const json* search = section(cfg, "search")) {
        a.estimate.search.train_fraction =
            get_number(*search, "search", "train_fraction", a.estimate.search.train_fraction);
        a.estimate.search.tolerance =
            get_number(*search, "search", "tolerance", a.estimate.search.tolerance);
        a.estimate.search.max_iter =
            get_int(*search, "search", "max_iter", a.estimate.search.max_iter);
        a.estimate.search.master_seed =
            get_seed(*search, "search", "seed", a.estimate.search.master_seed);
        a.estimate.solver = get_string(*search, "search", "solver", a.estimate.solver);
        a.estimate.workers = get_int(*search, "search", "workers", a.estimate.workers);
    }
    if (const json* test = section(cfg, "test")) {
        require_exactly_one(*test, "test", "scenarios", {"count", "seed", "ranges"});
        if (const auto it = test->find("scenarios"); it != test->end()) {
            if (!it->is_array())
                throw std::invalid_argument("config test.scenarios must be an array");
            std::vector<std::pair<double, double>> scenarios;
            for (const json& row : *it) {
                if (!row.is_array() || row.size() != 2 || !row[0].is_number() ||
                    !row[1].is_number())
                    throw std::invalid_argument(
                        "config test.scenarios entries must be [Q, xi] pairs");
                scenarios.emplace_back(row[0].get<double>(), row[1].get<double>());
            }
            if (scenarios.empty())
                throw std::invalid_argument("config test.scenarios must not be empty");
            a.evaluate.test.explicit_scenarios = scenarios;
            a.baseline.test.explicit_scenarios = scenarios;
        } else {
            a.evaluate.test.count = get_int(*test, "test", "count", a.evaluate.test.count);
            a.evaluate.test.seed = get_seed(*test, "test", "seed", a.evaluate.test.seed);
            apply_ranges(*test, "test", a.evaluate.test.ranges);
            a.baseline.test = a.evaluate.test;
        }
    }
    if (const json* report = section(cfg, "report")) {
        const std::string dir = get_string(*report, "report", "dir", "");
        if (dir.empty())
            throw std::invalid_argument("config section 'report' requires 'dir'");
        a.generate.out_dir = dir;
        a.estimate.out_dir = dir;
        a.evaluate.out_dir = dir;
        a.baseline.out_dir = dir;
    }
}

// --config must be honoured before regular flag parsing so that flags can
// override config values; scan argv by hand for it.
std::string find_config_flag(int argc, char** argv) {
    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        if (arg == "--config" && i + 1 < argc) return argv[i + 1];
        if (arg.rfind("--config=", 0) == 0) return arg.substr(9);
    }
    return {};
}

void add_ranges_flags(CLI::App* cmd, sfe::ScenarioRanges& ranges) {
    cmd->add_option("--demand-lo", ranges.demand_lo, "Lower end of the demand range (MW)");
    cmd->add_option("--demand-hi", ranges.demand_hi, "Upper end of the demand range (MW)");
    cmd->add_option("--fuel-lo", ranges.fuel_lo, "Lower end of the fuel-price range");
    cmd->add_option("--fuel-hi", ranges.fuel_hi, "Upper end of the fuel-price range");
}

}  // namespace

int main(int argc, char** argv) {
    AllArgs a;

    if (const char* env = std::getenv("SFE_WORKERS")) {
        try {
            a.estimate.workers = std::stoi(env);
        } catch (const std::exception&) {
            std::cerr << "error: SFE_WORKERS must be an integer, got '" << env << "'\n";
            return kExitConfigError;
        }
    }

    try {
        const std::string config_path = find_config_flag(argc, argv);
        if (!config_path.empty()) apply_config(load_config(config_path), a);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitConfigError;
    }

    CLI::App app{"Supply-function market toolkit: clearing, equilibrium bidding, and "
                 "inverse cost estimation"};
    app.require_subcommand(1);
    std::string config_path_display;
    app.add_option("--config", config_path_display,
                   "JSON config file with market/dataset/search/test/report sections");

    CLI::App* c_gen = app.add_subcommand(
        "generate", "Draw a synthetic bid dataset from a benchmark market");
    c_gen->fallthrough();
    c_gen->add_option("--n", a.generate.n, "Number of suppliers for the built-in market");
    c_gen->add_option("--truth", a.generate.truth_path,
                      "Market description JSON (overrides --n)");
    c_gen->add_option("--m", a.generate.m, "Number of observations");
    c_gen->add_option("--noise", a.generate.noise,
                      "Relative bid perturbation bound (0.01 = 1%)");
    c_gen->add_option("--seed", a.generate.seed, "Dataset seed");
    c_gen->add_option("--distribution", a.generate.distribution,
                      "Noise law: uniform or truncated-gaussian");
    add_ranges_flags(c_gen, a.generate.ranges);
    c_gen->add_option("--out", a.generate.out_dir, "Output directory");

    CLI::App* c_est = app.add_subcommand(
        "estimate", "Estimate rival cost parameters from a bid dataset");
    c_est->fallthrough();
    c_est->add_option("--truth", a.estimate.truth_path, "Market description JSON");
    c_est->add_option("--dataset", a.estimate.dataset_path, "Bid history CSV");
    c_est->add_option("--train-fraction", a.estimate.search.train_fraction,
                      "Training fraction p in (0, 1)");
    c_est->add_option("--tolerance", a.estimate.search.tolerance,
                      "Stop once the validation discrepancy falls below this");
    c_est->add_option("--max-iter", a.estimate.search.max_iter, "Iteration cap");
    c_est->add_option("--seed", a.estimate.search.master_seed, "Search master seed");
    c_est->add_option("--solver", a.estimate.solver, "LP path: auto, simplex, or reduced");
    c_est->add_option("--workers", a.estimate.workers,
                      "Worker threads (default from SFE_WORKERS)");
    c_est->add_option("--out", a.estimate.out_dir, "Output directory");

    CLI::App* c_eval = app.add_subcommand(
        "evaluate", "Score estimated costs on out-of-sample scenarios");
    c_eval->fallthrough();
    c_eval->add_option("--truth", a.evaluate.truth_path, "Market description JSON");
    c_eval->add_option("--thetas", a.evaluate.thetas_path, "Estimated costs JSON");
    c_eval->add_option("--count", a.evaluate.test.count, "Number of test scenarios");
    c_eval->add_option("--seed", a.evaluate.test.seed, "Test scenario seed");
    add_ranges_flags(c_eval, a.evaluate.test.ranges);
    c_eval->add_option("--out", a.evaluate.out_dir, "Output directory");

    CLI::App* c_base = app.add_subcommand(
        "baseline", "Compare inverse estimation against the historical-average baseline");
    c_base->fallthrough();
    c_base->add_option("--truth", a.baseline.truth_path, "Market description JSON");
    c_base->add_option("--thetas", a.baseline.thetas_path, "Estimated costs JSON");
    c_base->add_option("--dataset", a.baseline.dataset_path, "Bid history CSV");
    c_base->add_option("--count", a.baseline.test.count, "Number of test scenarios");
    c_base->add_option("--seed", a.baseline.test.seed, "Test scenario seed");
    add_ranges_flags(c_base, a.baseline.test.ranges);
    c_base->add_option("--out", a.baseline.out_dir, "Output directory");

    CLI::App* c_adv = app.add_subcommand(
        "advise", "Recommend equilibrium bids for one scenario under estimated costs");
    c_adv->fallthrough();
    c_adv->add_option("--truth", a.advise.truth_path, "Market description JSON");
    c_adv->add_option("--thetas", a.advise.thetas_path, "Estimated costs JSON");
    c_adv->add_option("--q", a.advise.demand, "Demand Q (MW)");
    c_adv->add_option("--xi", a.advise.fuel, "Fuel price");

    CLI::App* c_bounds = app.add_subcommand(
        "bounds", "Print learning-theory constants for a market");
    c_bounds->fallthrough();
    c_bounds->add_option("--truth", a.bounds.truth_path, "Market description JSON");
    c_bounds->add_option("--n", a.bounds.n, "Suppliers for the built-in market");
    c_bounds->add_option("--mt", a.bounds.m_t, "Training sample size M_t");
    c_bounds->add_option("--delta", a.bounds.delta, "Per-observation failure rate delta");
    c_bounds->add_option("--epsilon", a.bounds.epsilon, "Target failure probability");
    c_bounds->add_option("--eps-bar", a.bounds.eps_bar, "Gradient tolerance for tau");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfigError;
    }

    if (c_gen->parsed()) return cmd_generate(a.generate, std::cout, std::cerr);
    if (c_est->parsed()) return cmd_estimate(a.estimate, std::cout, std::cerr);
    if (c_eval->parsed()) return cmd_evaluate(a.evaluate, std::cout, std::cerr);
    if (c_base->parsed()) return cmd_baseline(a.baseline, std::cout, std::cerr);
    if (c_adv->parsed()) return cmd_advise(a.advise, std::cout, std::cerr);
    if (c_bounds->parsed()) return cmd_bounds(a.bounds, std::cout, std::cerr);
    return kExitConfigError;
}
