#pragma once

#include <string>
#include <utility>
#include <vector>

namespace sfe {

enum class RowSense { LessEqual, Equal };

struct LpRow {
    std::vector<std::pair<int, double>> coeffs;  // sparse (variable, coefficient)
    RowSense sense = RowSense::LessEqual;
    double rhs = 0.0;
};

// Minimize objective . x subject to rows and per-variable bounds.
// Infinite bounds are expressed with +/-infinity.
struct LpProblem {
    int num_vars = 0;
    std::vector<double> objective;
    std::vector<LpRow> rows;
    std::vector<double> lower;
    std::vector<double> upper;
    std::vector<std::string> var_names;  // optional, for dump()

    void validate() const;
    // One constraint per line: "2*x0 + 3*x1 <= 5"; bounds and objective first.
    std::string dump() const;
};

enum class LpStatus { Optimal, Infeasible, Unbounded };

struct LpSolution {
    LpStatus status = LpStatus::Optimal;
    std::vector<double> values;
    double objective_value = 0.0;
};

// Bounded-variable two-phase revised simplex; deterministic for identical
// input. Feasibility tolerance 1e-7, reduced-cost tolerance 1e-9.
LpSolution solve_lp(const LpProblem& problem);

}  // namespace sfe
