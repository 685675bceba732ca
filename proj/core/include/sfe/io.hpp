#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "sfe/datagen.hpp"
#include "sfe/equilibrium.hpp"
#include "sfe/inverse.hpp"
#include "sfe/learning.hpp"
#include "sfe/market.hpp"

namespace sfe {

// Filesystem-level failures (missing file, unwritable directory). Kept apart
// from numerical errors so callers can map them to configuration problems.
class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

// Dataset CSV, one row per (observation, supplier):
//   obs_id,Q,xi,supplier,alpha,R,P,marginal
// Doubles are written with 17 significant digits so round trips are exact and
// reruns byte-identical.
void write_dataset_csv(const std::string& path, const std::vector<Observation>& dataset,
                       const MarketConfig& config);

// Reads the dataset back. For marginal rows the bid is recovered from the
// clearing identity alpha = R - beta*P and cross-checked against the alpha
// column; non-marginal rows take the alpha column as is.
std::vector<Observation> read_dataset_csv(const std::string& path, const MarketConfig& config);

// Ground truth JSON: {n, theta1[], theta2[], beta[], alpha_bar}. The
// benchmark markets carry no capacity limits, so none are stored.
void write_truth_json(const std::string& path, const GroundTruth& truth);
GroundTruth read_truth_json(const std::string& path);

// Estimated parameters JSON: {n, theta1[], theta2[], z, best_discrepancy}.
void write_thetas_json(const std::string& path, const std::vector<CostParams>& thetas,
                       double z, double best_discrepancy);
std::vector<CostParams> read_thetas_json(const std::string& path);

// Iteration log CSV: iter,z,discrepancy,mape,seconds. Failed iterations write
// nan metrics; mape is empty when no ground truth was supplied. The seconds
// column is wall-clock time and is the one field exempt from rerun identity.
void write_iteration_log_csv(const std::string& path, const SearchResult& result);

// 17-significant-digit formatting used by all CSV writers.
std::string format_double(double value);

}  // namespace sfe
