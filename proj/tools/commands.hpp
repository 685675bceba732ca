#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "sfe/datagen.hpp"
#include "sfe/inverse.hpp"
#include "sfe/learning.hpp"

namespace sfe::cli {

// Exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfigError = 2;
inline constexpr int kExitNumericalError = 3;

// Test scenarios: either `count` fresh draws from `ranges` (seeded), or an
// explicit list. The three named benchmark instances (a) (45, 8),
// (b) (75, 20), (c) (110, 35) are always evaluated alongside generated sets.
struct TestSpec {
    int count = 100;
    std::uint64_t seed = 2;
    ScenarioRanges ranges;
    std::vector<std::pair<double, double>> explicit_scenarios;  // overrides count
};

struct GenerateArgs {
    int n = 5;
    std::string truth_path;  // when set, read instead of generate_market(n)
    int m = 200;
    double noise = 0.01;
    std::uint64_t seed = 1;
    ScenarioRanges ranges;
    std::string distribution = "uniform";  // or "truncated-gaussian"
    std::string out_dir = ".";
};

struct EstimateArgs {
    std::string truth_path;
    std::string dataset_path;
    SearchConfig search{0.75, 1e-3, 1000, 0};  // CLI default cap is 1000 iterations
    std::string solver = "auto";  // auto | simplex | reduced
    int workers = 1;
    std::string out_dir = ".";
};

struct EvaluateArgs {
    std::string truth_path;
    std::string thetas_path;
    TestSpec test;
    std::string out_dir = ".";
};

struct BaselineArgs {
    std::string truth_path;
    std::string thetas_path;
    std::string dataset_path;  // bid history for the baseline
    TestSpec test;
    std::string out_dir = ".";
};

struct AdviseArgs {
    std::string truth_path;
    std::string thetas_path;
    double demand = 75.0;
    double fuel = 20.0;
};

struct BoundsArgs {
    std::string truth_path;
    int n = 5;  // used when truth_path is empty
    int m_t = 150;
    double delta = 0.1;
    double epsilon = 0.01;
    double eps_bar = 1e-6;
};

int cmd_generate(const GenerateArgs& args, std::ostream& out, std::ostream& err);
int cmd_estimate(const EstimateArgs& args, std::ostream& out, std::ostream& err);
int cmd_evaluate(const EvaluateArgs& args, std::ostream& out, std::ostream& err);
int cmd_baseline(const BaselineArgs& args, std::ostream& out, std::ostream& err);
int cmd_advise(const AdviseArgs& args, std::ostream& out, std::ostream& err);
int cmd_bounds(const BoundsArgs& args, std::ostream& out, std::ostream& err);

}  // namespace sfe::cli
