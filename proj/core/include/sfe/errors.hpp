#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace sfe {

/// Fixed-point or search iteration exceeded its round budget.
/// Carries the last iterate and the residual it stalled at.
class ConvergenceError : public std::runtime_error {
public:
    ConvergenceError(std::string what, std::vector<double> last_iterate, double residual)
        : std::runtime_error(std::move(what)),
          last_iterate(std::move(last_iterate)),
          residual(residual) {}

    std::vector<double> last_iterate;
    double residual;
};

/// Every iteration of a search failed; the per-iteration messages are kept.
class EstimationError : public std::runtime_error {
public:
    EstimationError(std::string what, std::vector<std::string> failures)
        : std::runtime_error(std::move(what)), failures(std::move(failures)) {}

    std::vector<std::string> failures;
};

}  // namespace sfe
