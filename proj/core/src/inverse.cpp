#include "sfe/inverse.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

namespace sfe {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
// Certification threshold for the least-squares shortcut: a candidate theta
// whose duality gap is below this is accepted as optimal (the gap is >= 0).
constexpr double kShortcutZTol = 1e-7;
// Relative bound-gap termination for the cutting-plane solver.
constexpr double kCutGapTol = 1e-9;
constexpr int kMaxCuts = 400;

void validate_inputs(const std::vector<Observation>& training, const MarketConfig& config) {
    config.validate();
    if (training.empty()) throw std::invalid_argument("estimate_costs: empty training set");
    for (const Observation& obs : training) obs.validate(config);
}

// Observations that constrain theta_i: i marginal among competitors. A
// monopoly observation has a theta-independent gradient and identifies nothing.
bool informative(const Observation& obs, int i) {
    return obs.marginal_set.size() >= 2 &&
           std::find(obs.marginal_set.begin(), obs.marginal_set.end(), i) !=
               obs.marginal_set.end();
}

void check_identifiability(const std::vector<Observation>& training,
                           const MarketConfig& config) {
    for (int i = 0; i < config.n_suppliers; ++i) {
        double first_xi = 0.0;
        bool seen = false;
        bool distinct = false;
        for (const Observation& obs : training) {
            if (!informative(obs, i)) continue;
            if (!seen) {
                first_xi = obs.fuel_price;
                seen = true;
            } else if (obs.fuel_price != first_xi) {
                distinct = true;
                break;
            }
        }
        if (!distinct)
            throw std::domain_error(
                "estimate_costs: supplier " + std::to_string(i) +
                " lacks two competitive observations with distinct fuel prices; "
                "its cost parameters are unidentifiable");
    }
}

std::size_t median_by_key(const std::vector<Observation>& training,
                          const std::vector<std::size_t>& candidates) {
    std::vector<std::size_t> order = candidates;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const Observation& oa = training[a];
        const Observation& ob = training[b];
        if (oa.demand != ob.demand) return oa.demand < ob.demand;
        if (oa.fuel_price != ob.fuel_price) return oa.fuel_price < ob.fuel_price;
        return a < b;
    });
    return order[(order.size() - 1) / 2];  // lower median
}

// Variable layout of the monolithic LP: t, then y_i^j in observation-major
// order, then interleaved (theta_i1, theta_i2).
struct VarMap {
    std::vector<std::vector<int>> y;  // per observation: per marginal position
    int theta_offset = 0;
    int total = 0;

    int theta1(int i) const { return theta_offset + 2 * i; }
    int theta2(int i) const { return theta_offset + 2 * i + 1; }
};

VarMap make_var_map(const std::vector<Observation>& training, int n_suppliers) {
    VarMap vm;
    int next = 1;  // slot 0 is t
    vm.y.resize(training.size());
    for (std::size_t j = 0; j < training.size(); ++j) {
        vm.y[j].resize(training[j].marginal_set.size());
        for (std::size_t p = 0; p < vm.y[j].size(); ++p) vm.y[j][p] = next++;
    }
    vm.theta_offset = next;
    vm.total = next + 2 * n_suppliers;
    return vm;
}

void check_normalization(const std::vector<Observation>& training, const MarketConfig& config,
                         const std::vector<int>& normalization) {
    if (normalization.size() != static_cast<std::size_t>(config.n_suppliers))
        throw std::invalid_argument("build_inverse_lp: normalization size mismatch");
    for (int i = 0; i < config.n_suppliers; ++i) {
        const int k = normalization[i];
        if (k < 0 || k >= static_cast<int>(training.size()))
            throw std::invalid_argument("build_inverse_lp: normalization index out of range");
        const auto& members = training[k].marginal_set;
        if (std::find(members.begin(), members.end(), i) == members.end())
            throw std::invalid_argument("build_inverse_lp: supplier " + std::to_string(i) +
                                        " is not marginal at its normalization observation");
    }
}

LpProblem build_common(const std::vector<Observation>& training, const MarketConfig& config,
                       const std::vector<int>& normalization, const InverseOptions& options,
                       bool abs_form) {
    validate_inputs(training, config);
    check_identifiability(training, config);
    check_normalization(training, config, normalization);

    const int n = config.n_suppliers;
    VarMap vm = make_var_map(training, n);
    const int eps_offset = vm.total;  // abs-form only
    const int total = abs_form ? vm.total + static_cast<int>(training.size()) : vm.total;

    LpProblem p;
    p.num_vars = total;
    p.objective.assign(total, 0.0);
    p.objective[0] = 1.0;
    p.lower.assign(total, 0.0);
    p.upper.assign(total, kInf);
    p.var_names.assign(total, {});
    p.var_names[0] = "t";
    for (std::size_t j = 0; j < training.size(); ++j)
        for (std::size_t pos = 0; pos < vm.y[j].size(); ++pos)
            p.var_names[vm.y[j][pos]] =
                "y" + std::to_string(j) + "_" + std::to_string(training[j].marginal_set[pos]);
    for (int i = 0; i < n; ++i) {
        p.var_names[vm.theta1(i)] = "th1_" + std::to_string(i);
        p.var_names[vm.theta2(i)] = "th2_" + std::to_string(i);
        if (options.bound_thetas) {
            p.upper[vm.theta1(i)] = config.alpha_bar;
            p.upper[vm.theta2(i)] = config.alpha_bar;
        } else {
            p.lower[vm.theta1(i)] = p.lower[vm.theta2(i)] = -kInf;
        }
    }
    if (abs_form) {
        for (std::size_t j = 0; j < training.size(); ++j) {
            p.lower[eps_offset + static_cast<int>(j)] = -kInf;
            p.var_names[eps_offset + static_cast<int>(j)] = "eps" + std::to_string(j);
        }
    }

    for (std::size_t j = 0; j < training.size(); ++j) {
        const Observation& obs = training[j];
        LpRow gap;
        gap.sense = abs_form ? RowSense::Equal : RowSense::LessEqual;
        double gap_rhs = 0.0;
        if (abs_form)
            gap.coeffs.emplace_back(eps_offset + static_cast<int>(j), -1.0);
        else
            gap.coeffs.emplace_back(0, -1.0);  // ... <= t

        for (std::size_t pos = 0; pos < obs.marginal_set.size(); ++pos) {
            const int i = obs.marginal_set[pos];
            const GradientCoefficients g = gradient_coefficients(obs, config, i);
            const double alpha = obs.bids[i];

            LpRow grad;  // gradient row: grad_i(theta) - y_i^j <= 0
            grad.sense = RowSense::LessEqual;
            grad.coeffs.emplace_back(vm.theta1(i), g.coef_theta1);
            grad.coeffs.emplace_back(vm.theta2(i), g.coef_theta2);
            grad.coeffs.emplace_back(vm.y[j][pos], -1.0);
            grad.rhs = -g.constant;
            p.rows.push_back(std::move(grad));

            gap.coeffs.emplace_back(vm.y[j][pos], config.alpha_bar);
            gap.coeffs.emplace_back(vm.theta1(i), -alpha * g.coef_theta1);
            gap.coeffs.emplace_back(vm.theta2(i), -alpha * g.coef_theta2);
            gap_rhs += alpha * g.constant;
        }
        gap.rhs = gap_rhs;
        p.rows.push_back(std::move(gap));

        if (abs_form) {
            LpRow below;  // eps_j <= t
            below.coeffs.emplace_back(eps_offset + static_cast<int>(j), 1.0);
            below.coeffs.emplace_back(0, -1.0);
            p.rows.push_back(std::move(below));
            LpRow above;  // -eps_j <= t
            above.coeffs.emplace_back(eps_offset + static_cast<int>(j), -1.0);
            above.coeffs.emplace_back(0, -1.0);
            p.rows.push_back(std::move(above));
        }
    }

    for (int i = 0; i < n; ++i) {
        const Observation& obs = training[static_cast<std::size_t>(normalization[i])];
        const GradientCoefficients g = gradient_coefficients(obs, config, i);
        LpRow norm;
        norm.sense = RowSense::Equal;
        norm.coeffs.emplace_back(vm.theta1(i), g.coef_theta1);
        norm.coeffs.emplace_back(vm.theta2(i), g.coef_theta2);
        norm.rhs = -g.constant;
        p.rows.push_back(std::move(norm));
    }
    return p;
}

// Reduced data: theta_i1 eliminated along the normalization line and y at its
// pointwise optimum; the objective becomes max over observations of a sum of
// two-piece convex functions of s = theta2.
struct ReducedProblem {
    std::vector<double> a_line, b_line;  // theta1 = a + b * s per supplier
    std::vector<double> s_lo, s_hi;
    struct Term {
        int supplier;
        double d, e;      // gradient = d + e * s
        double alpha;     // observed bid
    };
    std::vector<std::vector<Term>> rows;  // per observation
    double alpha_bar = 0.0;

    double evaluate(const std::vector<double>& s, std::vector<double>* subgrad) const {
        double best = -kInf;
        std::size_t best_j = 0;
        for (std::size_t j = 0; j < rows.size(); ++j) {
            double total = 0.0;
            for (const Term& t : rows[j]) {
                const double g = t.d + t.e * s[t.supplier];
                total += std::max((alpha_bar - t.alpha) * g, -t.alpha * g);
            }
            if (total > best) {
                best = total;
                best_j = j;
            }
        }
        if (subgrad) {
            subgrad->assign(s.size(), 0.0);
            for (const Term& t : rows[best_j]) {
                const double g = t.d + t.e * s[t.supplier];
                const double slope = g >= 0.0 ? (alpha_bar - t.alpha) * t.e : -t.alpha * t.e;
                (*subgrad)[t.supplier] += slope;
            }
        }
        return best;
    }
};

ReducedProblem build_reduced(const std::vector<Observation>& training,
                             const MarketConfig& config,
                             const std::vector<int>& normalization,
                             const InverseOptions& options) {
    const int n = config.n_suppliers;
    ReducedProblem rp;
    rp.alpha_bar = config.alpha_bar;
    rp.a_line.resize(n);
    rp.b_line.resize(n);
    rp.s_lo.assign(n, 0.0);
    rp.s_hi.assign(n, config.alpha_bar);

    for (int i = 0; i < n; ++i) {
        const Observation& obs = training[static_cast<std::size_t>(normalization[i])];
        const GradientCoefficients g = gradient_coefficients(obs, config, i);
        if (!(g.coef_theta1 > 0.0))
            throw std::runtime_error(
                "estimate_costs: normalization observation for supplier " + std::to_string(i) +
                " is a monopoly outcome; its gradient cannot pin theta");
        rp.a_line[i] = -g.constant / g.coef_theta1;
        rp.b_line[i] = -g.coef_theta2 / g.coef_theta1;  // equals -fuel_price at k_i

        if (options.bound_thetas) {
            // Intersect theta1 = a + b*s in [0, alpha_bar] with s in [0, alpha_bar].
            double lo = 0.0, hi = config.alpha_bar;
            if (rp.b_line[i] < 0.0) {
                lo = std::max(lo, (rp.a_line[i] - config.alpha_bar) / -rp.b_line[i]);
                hi = std::min(hi, rp.a_line[i] / -rp.b_line[i]);
            } else if (rp.b_line[i] > 0.0) {
                lo = std::max(lo, -rp.a_line[i] / rp.b_line[i]);
                hi = std::min(hi, (config.alpha_bar - rp.a_line[i]) / rp.b_line[i]);
            } else if (rp.a_line[i] < 0.0 || rp.a_line[i] > config.alpha_bar) {
                lo = 1.0;
                hi = 0.0;
            }
            if (lo > hi)
                throw std::runtime_error(
                    "estimate_costs: no cost parameters in bounds satisfy the normalization "
                    "for supplier " + std::to_string(i));
            rp.s_lo[i] = lo;
            rp.s_hi[i] = hi;
        } else {
            rp.s_lo[i] = -kInf;
            rp.s_hi[i] = kInf;
        }
    }

    rp.rows.resize(training.size());
    for (std::size_t j = 0; j < training.size(); ++j) {
        const Observation& obs = training[j];
        rp.rows[j].reserve(obs.marginal_set.size());
        for (int i : obs.marginal_set) {
            const GradientCoefficients g = gradient_coefficients(obs, config, i);
            ReducedProblem::Term t;
            t.supplier = i;
            t.d = g.constant + g.coef_theta1 * rp.a_line[i];
            t.e = g.coef_theta1 * rp.b_line[i] + g.coef_theta2;
            t.alpha = obs.bids[i];
            rp.rows[j].push_back(t);
        }
    }
    return rp;
}

// Per-supplier least squares of the gradient residuals along the
// normalization line; exact for clean equilibrium data.
std::vector<double> least_squares_s(const ReducedProblem& rp, int n_suppliers) {
    std::vector<double> num(n_suppliers, 0.0), den(n_suppliers, 0.0);
    for (const auto& row : rp.rows) {
        for (const auto& t : row) {
            num[t.supplier] += t.d * t.e;
            den[t.supplier] += t.e * t.e;
        }
    }
    std::vector<double> s(n_suppliers);
    for (int i = 0; i < n_suppliers; ++i) {
        s[i] = den[i] > 0.0 ? -num[i] / den[i] : 0.5 * (rp.s_lo[i] + rp.s_hi[i]);
        s[i] = std::clamp(s[i], rp.s_lo[i], rp.s_hi[i]);
    }
    return s;
}

std::vector<CostParams> thetas_from_s(const ReducedProblem& rp, const std::vector<double>& s,
                                      const MarketConfig& config, bool bounded) {
    std::vector<CostParams> thetas(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        thetas[i].theta2 = s[i];
        thetas[i].theta1 = rp.a_line[i] + rp.b_line[i] * s[i];
        if (bounded) {
            thetas[i].theta1 = std::clamp(thetas[i].theta1, 0.0, config.alpha_bar);
            thetas[i].theta2 = std::clamp(thetas[i].theta2, 0.0, config.alpha_bar);
        }
    }
    return thetas;
}

// Kelley cutting planes on min_s max_j f_j(s) over the box; finite
// convergence since the objective is piecewise linear.
CostEstimate solve_reduced(const std::vector<Observation>& training,
                           const MarketConfig& config, const std::vector<int>& normalization,
                           const InverseOptions& options) {
    const int n = config.n_suppliers;
    ReducedProblem rp = build_reduced(training, config, normalization, options);

    std::vector<double> s = least_squares_s(rp, n);
    std::vector<double> subgrad;
    double upper_bound = rp.evaluate(s, &subgrad);
    std::vector<double> best_s = s;

    LpProblem master;
    master.num_vars = n + 1;  // z, then s
    master.objective.assign(n + 1, 0.0);
    master.objective[0] = 1.0;
    master.lower.assign(n + 1, 0.0);
    master.upper.assign(n + 1, kInf);
    for (int i = 0; i < n; ++i) {
        master.lower[1 + i] = rp.s_lo[i];
        master.upper[1 + i] = rp.s_hi[i];
    }

    for (int cut = 0; cut < kMaxCuts; ++cut) {
        // Cut at s: z >= f(s) + subgrad . (s' - s).
        LpRow row;
        row.sense = RowSense::LessEqual;
        row.coeffs.emplace_back(0, -1.0);
        double rhs = -rp.evaluate(s, &subgrad);
        for (int i = 0; i < n; ++i) {
            if (subgrad[i] == 0.0) continue;
            row.coeffs.emplace_back(1 + i, subgrad[i]);
            rhs += subgrad[i] * s[i];
        }
        row.rhs = rhs;
        master.rows.push_back(std::move(row));

        LpSolution sol = solve_lp(master);
        if (sol.status != LpStatus::Optimal)
            throw std::logic_error("estimate_costs: cutting-plane master LP failed");
        const double lower_bound = sol.objective_value;

        for (int i = 0; i < n; ++i)
            s[i] = std::clamp(sol.values[1 + i], rp.s_lo[i], rp.s_hi[i]);
        const double value = rp.evaluate(s, nullptr);
        if (value < upper_bound) {
            upper_bound = value;
            best_s = s;
        }
        if (upper_bound - lower_bound <= kCutGapTol * std::max(1.0, std::fabs(upper_bound))) {
            CostEstimate est;
            est.thetas = thetas_from_s(rp, best_s, config, options.bound_thetas);
            est.z = std::max(0.0, upper_bound);
            est.normalization_obs = normalization;
            return est;
        }
    }
    throw std::logic_error("estimate_costs: cutting-plane iteration cap exceeded");
}

CostEstimate solve_monolithic(const std::vector<Observation>& training,
                              const MarketConfig& config,
                              const std::vector<int>& normalization,
                              const InverseOptions& options) {
    LpProblem p = build_inverse_lp(training, config, normalization, options);
    LpSolution sol = solve_lp(p);
    if (sol.status == LpStatus::Infeasible)
        throw std::runtime_error(
            "estimate_costs: inverse LP infeasible (normalization incompatible with theta "
            "bounds)");
    if (sol.status == LpStatus::Unbounded)
        throw std::runtime_error("estimate_costs: inverse LP unbounded");

    VarMap vm = make_var_map(training, config.n_suppliers);
    CostEstimate est;
    est.thetas.resize(config.n_suppliers);
    for (int i = 0; i < config.n_suppliers; ++i) {
        est.thetas[i].theta1 = sol.values[vm.theta1(i)];
        est.thetas[i].theta2 = sol.values[vm.theta2(i)];
    }
    est.z = std::max(0.0, sol.objective_value);
    est.normalization_obs = normalization;
    return est;
}

}  // namespace

void Observation::validate(const MarketConfig& config) const {
    if (!(demand > 0.0)) throw std::invalid_argument("Observation: demand must be positive");
    if (fuel_price < 0.0) throw std::invalid_argument("Observation: fuel_price must be >= 0");
    if (bids.size() != static_cast<std::size_t>(config.n_suppliers))
        throw std::invalid_argument("Observation: bid vector size mismatch");
    if (marginal_set.empty()) throw std::invalid_argument("Observation: empty marginal set");
    for (int i : marginal_set) {
        if (i < 0 || i >= config.n_suppliers)
            throw std::invalid_argument("Observation: marginal index out of range");
        if (bids[i] < -1e-9 || bids[i] > config.alpha_bar + 1e-9)
            throw std::invalid_argument("Observation: bid outside [0, alpha_bar]");
    }
    if (price && dispatch) {
        if (dispatch->size() != static_cast<std::size_t>(config.n_suppliers))
            throw std::invalid_argument("Observation: dispatch size mismatch");
        for (int i : marginal_set) {
            const double implied = *price - config.beta[i] * (*dispatch)[i];
            if (std::fabs(bids[i] - implied) > 1e-6 * std::max(1.0, std::fabs(*price)))
                throw std::invalid_argument(
                    "Observation: bids inconsistent with price/dispatch for supplier " +
                    std::to_string(i));
        }
    }
}

GradientCoefficients gradient_coefficients(const Observation& obs, const MarketConfig& config,
                                           int i) {
    const auto& members = obs.marginal_set;
    auto it = std::find(members.begin(), members.end(), i);
    if (it == members.end())
        throw std::domain_error("gradient_coefficients: supplier " + std::to_string(i) +
                                " is not marginal in this observation");
    BetaHat bh = make_beta_hat(config, members);
    const std::size_t pos = static_cast<std::size_t>(
        std::find(bh.members.begin(), bh.members.end(), i) - bh.members.begin());
    const double bhat = bh.beta_hat[pos];

    double rivals = 0.0;
    for (int m : members)
        if (m != i) rivals += obs.bids[m] / config.beta[m];

    GradientCoefficients g;
    g.constant = (bhat / config.beta[i]) * (obs.demand + rivals) / bh.inv_beta_sum +
                 (obs.bids[i] / config.beta[i]) * (bhat * bhat - 1.0);
    g.coef_theta1 = (1.0 - bhat) / config.beta[i];
    g.coef_theta2 = g.coef_theta1 * obs.fuel_price;
    return g;
}

std::vector<int> choose_normalization(const std::vector<Observation>& training,
                                      const MarketConfig& config) {
    validate_inputs(training, config);
    check_identifiability(training, config);

    std::vector<std::size_t> all(training.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    const std::size_t global = median_by_key(training, all);

    std::vector<int> normalization(config.n_suppliers);
    for (int i = 0; i < config.n_suppliers; ++i) {
        if (informative(training[global], i)) {
            normalization[i] = static_cast<int>(global);
            continue;
        }
        std::vector<std::size_t> own;
        for (std::size_t j = 0; j < training.size(); ++j)
            if (informative(training[j], i)) own.push_back(j);
        normalization[i] = static_cast<int>(median_by_key(training, own));
    }
    return normalization;
}

LpProblem build_inverse_lp(const std::vector<Observation>& training, const MarketConfig& config,
                           const std::vector<int>& normalization,
                           const InverseOptions& options) {
    return build_common(training, config, normalization, options, false);
}

LpProblem build_inverse_lp_abs_form(const std::vector<Observation>& training,
                                    const MarketConfig& config,
                                    const std::vector<int>& normalization,
                                    const InverseOptions& options) {
    return build_common(training, config, normalization, options, true);
}

double duality_gap(const std::vector<Observation>& training, const MarketConfig& config,
                   const std::vector<CostParams>& thetas) {
    double worst = 0.0;
    for (const Observation& obs : training) {
        double total = 0.0;
        for (int i : obs.marginal_set) {
            const GradientCoefficients gc = gradient_coefficients(obs, config, i);
            const double g = gc.at(thetas[i].theta1, thetas[i].theta2);
            total += std::max((config.alpha_bar - obs.bids[i]) * g, -obs.bids[i] * g);
        }
        worst = std::max(worst, total);
    }
    return worst;
}

CostEstimate estimate_costs(const std::vector<Observation>& training,
                            const MarketConfig& config, const InverseOptions& options) {
    validate_inputs(training, config);
    check_identifiability(training, config);
    const std::vector<int> normalization = choose_normalization(training, config);

    switch (options.solver) {
        case InverseSolver::Simplex:
            return solve_monolithic(training, config, normalization, options);
        case InverseSolver::Reduced:
            if (!options.bound_thetas)
                throw std::invalid_argument(
                    "estimate_costs: the reduced solver requires bounded thetas");
            return solve_reduced(training, config, normalization, options);
        case InverseSolver::Auto:
            break;
    }

    // Fast path: fit the gradient residuals directly; accept when the duality
    // gap certifies (near-)optimality, which is always the case on clean data.
    ReducedProblem rp = build_reduced(training, config, normalization, options);
    std::vector<double> s = least_squares_s(rp, config.n_suppliers);
    const double z_hat = rp.evaluate(s, nullptr);
    if (z_hat <= kShortcutZTol) {
        CostEstimate est;
        est.thetas = thetas_from_s(rp, s, config, options.bound_thetas);
        est.z = std::max(0.0, z_hat);
        est.normalization_obs = normalization;
        return est;
    }
    if (options.bound_thetas) return solve_reduced(training, config, normalization, options);
    return solve_monolithic(training, config, normalization, options);
}

}  // namespace sfe
