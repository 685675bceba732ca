#include "sfe/lp.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace sfe {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kFeasTol = 1e-7;
constexpr double kOptTol = 1e-9;
constexpr double kPivotTol = 1e-11;

enum class Loc : unsigned char { Basic, AtLower, AtUpper, FreeZero };

std::string default_name(const LpProblem& p, int j) {
    if (j < static_cast<int>(p.var_names.size()) && !p.var_names[j].empty())
        return p.var_names[j];
    return "x" + std::to_string(j);
}

void append_terms(std::ostringstream& os, const LpProblem& p,
                  const std::vector<std::pair<int, double>>& terms) {
    bool first = true;
    for (const auto& [j, coef] : terms) {
        if (coef == 0.0) continue;
        if (!first) os << " + ";
        os << coef << "*" << default_name(p, j);
        first = false;
    }
    if (first) os << "0";
}

// Work arrays for the bounded-variable revised simplex over the augmented
// system (structural + slack + artificial columns).
struct Simplex {
    int m = 0;
    int total = 0;
    std::vector<std::vector<std::pair<int, double>>> cols;  // per var: (row, coef)
    std::vector<double> lower, upper;
    std::vector<double> b;
    std::vector<double> x;
    std::vector<Loc> loc;
    std::vector<int> basis;      // row -> basic var
    std::vector<double> binv;    // m*m row-major inverse of the basis matrix
    std::vector<double> work_w;  // B^-1 * entering column
    std::vector<double> work_y;  // simplex multipliers

    double& binv_at(int r, int c) { return binv[static_cast<std::size_t>(r) * m + c]; }

    void recompute_basics() {
        std::vector<double> rhs_eff = b;
        for (int j = 0; j < total; ++j) {
            if (loc[j] == Loc::Basic || x[j] == 0.0) continue;
            for (const auto& [r, a] : cols[j]) rhs_eff[r] -= a * x[j];
        }
        for (int r = 0; r < m; ++r) {
            double v = 0.0;
            for (int c = 0; c < m; ++c) v += binv_at(r, c) * rhs_eff[c];
            x[basis[r]] = v;
        }
    }

    // One simplex phase over the given cost vector. Returns false when the
    // phase detected an unbounded ray (only meaningful for the final phase).
    bool run_phase(const std::vector<double>& cost) {
        const long bland_after = 3L * (m + total) + 100;
        const long hard_cap = 2000000L;
        for (long iter = 0;; ++iter) {
            if (iter > hard_cap) throw std::logic_error("solve_lp: iteration cap exceeded");
            const bool bland = iter > bland_after;

            // Multipliers y = c_B^T B^-1.
            work_y.assign(m, 0.0);
            for (int r = 0; r < m; ++r) {
                const double cb = cost[basis[r]];
                if (cb == 0.0) continue;
                for (int c = 0; c < m; ++c) work_y[c] += cb * binv_at(r, c);
            }

            int enter = -1;
            int enter_dir = 0;
            double best_score = kOptTol;
            for (int j = 0; j < total; ++j) {
                if (loc[j] == Loc::Basic || upper[j] - lower[j] <= 0.0) continue;
                double d = cost[j];
                for (const auto& [r, a] : cols[j]) d -= work_y[r] * a;
                int dir = 0;
                if (loc[j] == Loc::AtLower && d < -kOptTol) dir = 1;
                else if (loc[j] == Loc::AtUpper && d > kOptTol) dir = -1;
                else if (loc[j] == Loc::FreeZero && std::fabs(d) > kOptTol)
                    dir = d < 0.0 ? 1 : -1;
                if (dir == 0) continue;
                if (bland) {
                    enter = j;
                    enter_dir = dir;
                    break;
                }
                if (std::fabs(d) > best_score) {
                    best_score = std::fabs(d);
                    enter = j;
                    enter_dir = dir;
                }
            }
            if (enter < 0) return true;  // phase optimal

            // w = B^-1 A_e.
            work_w.assign(m, 0.0);
            for (const auto& [row, a] : cols[enter])
                for (int r = 0; r < m; ++r) work_w[r] += binv_at(r, row) * a;

            // Ratio test: movement delta >= 0 of x_enter along enter_dir.
            double min_delta = upper[enter] - lower[enter];  // bound-flip distance
            int leave_row = -1;
            bool leave_to_upper = false;
            for (int r = 0; r < m; ++r) {
                const int k = basis[r];
                const double coef = -enter_dir * work_w[r];
                double delta;
                bool to_upper;
                if (coef > kPivotTol) {
                    if (upper[k] == kInf) continue;
                    delta = (upper[k] - x[k]) / coef;
                    to_upper = true;
                } else if (coef < -kPivotTol) {
                    if (lower[k] == -kInf) continue;
                    delta = (lower[k] - x[k]) / coef;
                    to_upper = false;
                } else {
                    continue;
                }
                if (delta < 0.0) delta = 0.0;  // basic value marginally out of bound
                if (delta < min_delta - 1e-12 ||
                    (delta < min_delta + 1e-12 && leave_row >= 0 && k < basis[leave_row])) {
                    min_delta = delta;
                    leave_row = r;
                    leave_to_upper = to_upper;
                }
            }

            if (min_delta == kInf) return false;  // unbounded ray

            // Move the entering variable and the basics it displaces.
            x[enter] += enter_dir * min_delta;
            for (int r = 0; r < m; ++r) x[basis[r]] -= enter_dir * min_delta * work_w[r];

            if (leave_row < 0) {
                // Bound flip: no basis change.
                loc[enter] = enter_dir > 0 ? Loc::AtUpper : Loc::AtLower;
                x[enter] = enter_dir > 0 ? upper[enter] : lower[enter];
            } else {
                const int leaving = basis[leave_row];
                loc[leaving] = leave_to_upper ? Loc::AtUpper : Loc::AtLower;
                x[leaving] = leave_to_upper ? upper[leaving] : lower[leaving];
                loc[enter] = Loc::Basic;
                basis[leave_row] = enter;

                const double piv = work_w[leave_row];
                assert(std::fabs(piv) > kPivotTol);
                double* prow = &binv_at(leave_row, 0);
                for (int c = 0; c < m; ++c) prow[c] /= piv;
                for (int r = 0; r < m; ++r) {
                    if (r == leave_row || work_w[r] == 0.0) continue;
                    const double f = work_w[r];
                    double* row = &binv_at(r, 0);
                    for (int c = 0; c < m; ++c) row[c] -= f * prow[c];
                }
            }

            if ((iter & 63) == 63) recompute_basics();
        }
    }
};

}  // namespace

void LpProblem::validate() const {
    if (num_vars < 0) throw std::invalid_argument("LpProblem: negative variable count");
    const auto n = static_cast<std::size_t>(num_vars);
    if (objective.size() != n || lower.size() != n || upper.size() != n)
        throw std::invalid_argument("LpProblem: objective/bounds size mismatch");
    for (std::size_t j = 0; j < n; ++j) {
        if (std::isnan(objective[j]) || std::isnan(lower[j]) || std::isnan(upper[j]))
            throw std::invalid_argument("LpProblem: NaN in objective or bounds");
        if (lower[j] > upper[j])
            throw std::invalid_argument("LpProblem: empty bound interval for variable " +
                                        std::to_string(j));
    }
    for (const LpRow& row : rows) {
        if (std::isnan(row.rhs) || std::isinf(row.rhs))
            throw std::invalid_argument("LpProblem: non-finite rhs");
        for (const auto& [j, coef] : row.coeffs) {
            if (j < 0 || j >= num_vars)
                throw std::invalid_argument("LpProblem: variable index out of range");
            if (std::isnan(coef) || std::isinf(coef))
                throw std::invalid_argument("LpProblem: non-finite coefficient");
        }
    }
}

std::string LpProblem::dump() const {
    std::ostringstream os;
    os << "min: ";
    std::vector<std::pair<int, double>> obj_terms;
    for (int j = 0; j < num_vars; ++j)
        if (objective[j] != 0.0) obj_terms.emplace_back(j, objective[j]);
    append_terms(os, *this, obj_terms);
    os << "\n";
    for (const LpRow& row : rows) {
        append_terms(os, *this, row.coeffs);
        os << (row.sense == RowSense::LessEqual ? " <= " : " = ") << row.rhs << "\n";
    }
    for (int j = 0; j < num_vars; ++j) {
        if (lower[j] == -kInf && upper[j] == kInf) continue;
        os << lower[j] << " <= " << default_name(*this, j);
        if (upper[j] != kInf) os << " <= " << upper[j];
        os << "\n";
    }
    return os.str();
}

LpSolution solve_lp(const LpProblem& problem) {
    problem.validate();
    const int n = problem.num_vars;
    const int m = static_cast<int>(problem.rows.size());

    Simplex s;
    s.m = m;
    s.cols.resize(n);
    s.lower = problem.lower;
    s.upper = problem.upper;
    s.b.resize(m);
    for (int r = 0; r < m; ++r) {
        s.b[r] = problem.rows[r].rhs;
        for (const auto& [j, coef] : problem.rows[r].coeffs)
            if (coef != 0.0) s.cols[j].emplace_back(r, coef);
    }

    // Starting point: every structural variable at its bound nearest zero.
    s.x.assign(n, 0.0);
    s.loc.assign(n, Loc::FreeZero);
    for (int j = 0; j < n; ++j) {
        if (s.lower[j] != -kInf) {
            s.loc[j] = Loc::AtLower;
            s.x[j] = s.lower[j];
        } else if (s.upper[j] != kInf) {
            s.loc[j] = Loc::AtUpper;
            s.x[j] = s.upper[j];
        }
    }

    std::vector<double> residual = s.b;
    for (int j = 0; j < n; ++j) {
        if (s.x[j] == 0.0) continue;
        for (const auto& [r, a] : s.cols[j]) residual[r] -= a * s.x[j];
    }

    // Slack for every inequality; artificials where the slack cannot start
    // basic. The initial basis matrix is diagonal with entries +-1.
    s.basis.assign(m, -1);
    std::vector<double> binv_diag(m, 1.0);
    std::vector<int> artificials;
    for (int r = 0; r < m; ++r) {
        if (problem.rows[r].sense == RowSense::LessEqual) {
            const int slack = static_cast<int>(s.cols.size());
            s.cols.push_back({{r, 1.0}});
            s.lower.push_back(0.0);
            s.upper.push_back(kInf);
            s.x.push_back(0.0);
            if (residual[r] >= 0.0) {
                s.basis[r] = slack;
                s.loc.push_back(Loc::Basic);
                continue;
            }
            s.loc.push_back(Loc::AtLower);
        }
        const int art = static_cast<int>(s.cols.size());
        const double sign = residual[r] >= 0.0 ? 1.0 : -1.0;
        s.cols.push_back({{r, sign}});
        s.lower.push_back(0.0);
        s.upper.push_back(kInf);
        s.x.push_back(0.0);
        s.loc.push_back(Loc::Basic);
        s.basis[r] = art;
        binv_diag[r] = sign;
        artificials.push_back(art);
    }
    s.total = static_cast<int>(s.cols.size());
    s.binv.assign(static_cast<std::size_t>(m) * m, 0.0);
    for (int r = 0; r < m; ++r) s.binv_at(r, r) = binv_diag[r];
    s.recompute_basics();

    LpSolution out;
    if (!artificials.empty()) {
        std::vector<double> phase1_cost(s.total, 0.0);
        for (int a : artificials) phase1_cost[a] = 1.0;
        if (!s.run_phase(phase1_cost))
            throw std::logic_error("solve_lp: phase-1 objective unbounded");
        s.recompute_basics();

        double infeasibility = 0.0;
        double b_scale = 1.0;
        for (int r = 0; r < m; ++r) b_scale = std::max(b_scale, std::fabs(s.b[r]));
        for (int a : artificials) infeasibility += std::fabs(s.x[a]);
        if (infeasibility > kFeasTol * b_scale * std::max(1.0, std::sqrt(double(m)))) {
            out.status = LpStatus::Infeasible;
            return out;
        }
        for (int a : artificials) s.upper[a] = 0.0;  // lock out of phase 2
    }

    std::vector<double> phase2_cost(s.total, 0.0);
    for (int j = 0; j < n; ++j) phase2_cost[j] = problem.objective[j];
    const bool bounded = s.run_phase(phase2_cost);
    if (!bounded) {
        out.status = LpStatus::Unbounded;
        return out;
    }
    s.recompute_basics();

    out.status = LpStatus::Optimal;
    out.values.assign(s.x.begin(), s.x.begin() + n);
    out.objective_value = 0.0;
    for (int j = 0; j < n; ++j) out.objective_value += problem.objective[j] * out.values[j];
    return out;
}

}  // namespace sfe
