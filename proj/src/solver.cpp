#include "battctl/solver.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <limits>

#include "battctl/error.hpp"
#include "battctl/parallel.hpp"

namespace battctl {

namespace {

struct Choice {
    std::size_t level = 0;
    double cost = 0.0;
};

// Cheapest feasible target for state x at level i given the continuation row.
Choice greedy_choice(const Mdp& mdp, std::size_t x, std::size_t i, const std::vector<double>& cont) {
    const auto& params = mdp.params;
    const auto& state = mdp.states[x];
    const double base = retained_level(params, mdp.level(i));
    const LevelRange range = mdp.feasible_levels(x, i);

    double best = std::numeric_limits<double>::infinity();
    std::vector<double> costs(range.hi - range.lo + 1);
    for (std::size_t j = range.lo; j <= range.hi; ++j) {
        const double c = immediate_cost(params, state, mdp.level(j) - base) + mdp.alpha * cont[j];
        costs[j - range.lo] = c;
        best = std::min(best, c);
    }
    const double tie = kTieRelTol * std::max(1.0, std::abs(best));
    Choice choice{range.lo, best};
    // The highest tied level wins, so an efficient battery ends up with a
    // single threshold at the top of its optimal interval.
    for (std::size_t j = range.hi + 1; j-- > range.lo;) {
        if (costs[j - range.lo] <= best + tie) {
            choice.level = j;
            break;
        }
    }
    choice.cost = costs[choice.level - range.lo];
    return choice;
}

double policy_cell_cost(const Mdp& mdp, std::size_t x, std::size_t i, std::size_t target) {
    const double base = retained_level(mdp.params, mdp.level(i));
    return immediate_cost(mdp.params, mdp.states[x], mdp.level(target) - base);
}

ValueFunction evaluate_direct(const Mdp& mdp, const Policy& policy) {
    const std::size_t levels = mdp.num_levels();
    const std::size_t n = mdp.num_states() * levels;
    std::vector<Eigen::Triplet<double>> triplets;
    Eigen::VectorXd rhs(static_cast<Eigen::Index>(n));
    for (std::size_t x = 0; x < mdp.num_states(); ++x) {
        for (std::size_t i = 0; i < levels; ++i) {
            const auto row = static_cast<Eigen::Index>(x * levels + i);
            const std::size_t target = policy(x, i);
            rhs(row) = policy_cell_cost(mdp, x, i, target);
            triplets.emplace_back(row, row, 1.0);
            for (const auto& e : mdp.kernel.row(x))
                triplets.emplace_back(row, static_cast<Eigen::Index>(e.state * levels + target), -mdp.alpha * e.prob);
        }
    }
    Eigen::SparseMatrix<double> a(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    a.setFromTriplets(triplets.begin(), triplets.end());
    a.makeCompressed();
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(a);
    if (lu.info() != Eigen::Success) throw ConsistencyError("policy evaluation matrix is singular");
    const Eigen::VectorXd sol = lu.solve(rhs);
    ValueFunction out(mdp.num_states(), levels);
    for (std::size_t k = 0; k < n; ++k) out.data()[k] = sol(static_cast<Eigen::Index>(k));
    return out;
}

ValueFunction evaluate_iterative(const Mdp& mdp, const Policy& policy, const ValueFunction* warm_start) {
    const std::size_t levels = mdp.num_levels();
    ValueFunction value = warm_start ? *warm_start : ValueFunction(mdp.num_states(), levels);
    ValueFunction cost(mdp.num_states(), levels);
    for (std::size_t x = 0; x < mdp.num_states(); ++x)
        for (std::size_t i = 0; i < levels; ++i) cost(x, i) = policy_cell_cost(mdp, x, i, policy(x, i));

    const double stop = kEvaluationTol * (1.0 - mdp.alpha) / mdp.alpha;
    // Contraction at rate alpha from any start within the value bound.
    const double span = std::max(1.0, 2.0 * value_bound(mdp));
    const auto cap = static_cast<std::size_t>(std::log(stop / span) / std::log(mdp.alpha)) + 100;
    double residual = std::numeric_limits<double>::infinity();
    for (std::size_t sweep = 0; sweep < cap; ++sweep) {
        const auto cont = continuation(mdp, value);
        ValueFunction next(mdp.num_states(), levels);
        parallel_for(mdp.num_states(), [&](std::size_t x) {
            const auto& g = cont[mdp.kernel.row_of[x]];
            for (std::size_t i = 0; i < levels; ++i) next(x, i) = cost(x, i) + mdp.alpha * g[policy(x, i)];
        });
        residual = next.distance(value);
        value = std::move(next);
        if (residual <= stop) return value;
    }
    throw ConvergenceError("policy evaluation did not converge", residual);
}

}  // namespace

double ValueFunction::distance(const ValueFunction& other) const {
    double d = 0.0;
    for (std::size_t k = 0; k < values_.size(); ++k) d = std::max(d, std::abs(values_[k] - other.values_[k]));
    return d;
}

std::vector<std::vector<double>> continuation(const Mdp& mdp, const ValueFunction& value) {
    const std::size_t levels = mdp.num_levels();
    std::vector<std::vector<double>> out(mdp.kernel.rows.size(), std::vector<double>(levels, 0.0));
    parallel_for(mdp.kernel.rows.size(), [&](std::size_t r) {
        auto& g = out[r];
        for (const auto& e : mdp.kernel.rows[r])
            for (std::size_t j = 0; j < levels; ++j) g[j] += e.prob * value(e.state, j);
    });
    return out;
}

Backup bellman_backup(const Mdp& mdp, const ValueFunction& value) {
    const std::size_t levels = mdp.num_levels();
    const auto cont = continuation(mdp, value);
    Backup out{ValueFunction(mdp.num_states(), levels), Policy(mdp.num_states(), levels)};
    parallel_for(mdp.num_states(), [&](std::size_t x) {
        const auto& g = cont[mdp.kernel.row_of[x]];
        for (std::size_t i = 0; i < levels; ++i) {
            const Choice c = greedy_choice(mdp, x, i, g);
            out.value(x, i) = c.cost;
            out.policy(x, i) = c.level;
        }
    });
    return out;
}

SolveResult value_iteration(const Mdp& mdp, double tol, std::size_t max_iters) {
    if (!(tol > 0.0)) throw PreconditionError("value iteration tolerance must be positive");
    const double stop = tol * (1.0 - mdp.alpha) / (2.0 * mdp.alpha);
    ValueFunction value(mdp.num_states(), mdp.num_levels());
    double residual = std::numeric_limits<double>::infinity();
    for (std::size_t it = 1; it <= max_iters; ++it) {
        Backup b = bellman_backup(mdp, value);
        residual = b.value.distance(value);
        if (residual <= stop) return {std::move(b.value), std::move(b.policy), it, residual};
        value = std::move(b.value);
    }
    throw ConvergenceError("value iteration reached " + std::to_string(max_iters) + " iterations", residual);
}

Policy do_nothing_policy(const Mdp& mdp) {
    Policy policy(mdp.num_states(), mdp.num_levels());
    for (std::size_t x = 0; x < mdp.num_states(); ++x) {
        for (std::size_t i = 0; i < mdp.num_levels(); ++i) {
            const LevelRange range = mdp.feasible_levels(x, i);
            const double base = retained_level(mdp.params, mdp.level(i));
            const auto nearest = static_cast<std::size_t>(std::max(0L, snap_index(base, mdp.grids.battery_step)));
            policy(x, i) = std::clamp(nearest, range.lo, range.hi);
        }
    }
    return policy;
}

ValueFunction evaluate_policy(const Mdp& mdp, const Policy& policy, const ValueFunction* warm_start) {
    if (mdp.num_states() * mdp.num_levels() <= kDirectSolveLimit) return evaluate_direct(mdp, policy);
    return evaluate_iterative(mdp, policy, warm_start);
}

SolveResult policy_iteration(const Mdp& mdp, std::size_t max_iters) {
    Policy policy = do_nothing_policy(mdp);
    ValueFunction value = evaluate_policy(mdp, policy);
    double residual = std::numeric_limits<double>::infinity();
    for (std::size_t it = 1; it <= max_iters; ++it) {
        Backup b = bellman_backup(mdp, value);
        residual = b.value.distance(value);
        if (b.policy == policy) return {std::move(value), std::move(policy), it, residual};
        ValueFunction next = evaluate_policy(mdp, b.policy, &value);
        const double change = next.distance(value);
        policy = std::move(b.policy);
        value = std::move(next);
        // A changed policy with unchanged cost only reshuffles ties.
        if (change <= kEvaluationTol) {
            Backup last = bellman_backup(mdp, value);
            return {std::move(value), std::move(last.policy), it, last.value.distance(value)};
        }
    }
    throw ConvergenceError("policy iteration reached " + std::to_string(max_iters) + " iterations", residual);
}

ValueFunction finite_horizon_oracle(const Mdp& mdp, std::size_t horizon) {
    const std::size_t levels = mdp.num_levels();
    ValueFunction value(mdp.num_states(), levels);
    for (std::size_t n = 0; n < horizon; ++n) {
        ValueFunction next(mdp.num_states(), levels);
        for (std::size_t x = 0; x < mdp.num_states(); ++x) {
            for (std::size_t i = 0; i < levels; ++i) {
                const Interval u = control_set(mdp.params, mdp.states[x], mdp.level(i));
                double best = std::numeric_limits<double>::infinity();
                for (std::size_t j = 0; j < levels; ++j) {
                    if (!u.contains(mdp.level(j), kEnergyTol)) continue;
                    double expected = 0.0;
                    for (const auto& e : mdp.kernel.row(x)) expected += e.prob * value(e.state, j);
                    const double delta = mdp.level(j) - retained_level(mdp.params, mdp.level(i));
                    best = std::min(best, immediate_cost(mdp.params, mdp.states[x], delta) + mdp.alpha * expected);
                }
                next(x, i) = best;
            }
        }
        value = std::move(next);
    }
    return value;
}

double value_bound(const Mdp& mdp) {
    double per_slot = mdp.max_price() * (mdp.max_demand() + mdp.params.b_max / mdp.params.eta_c);
    if (mdp.params.replacement) per_slot += mdp.params.replacement->q * mdp.params.replacement->cost;
    return per_slot / (1.0 - mdp.alpha);
}

SolverMethod parse_solver_method(const std::string& name) {
    if (name == "value") return SolverMethod::value;
    if (name == "policy") return SolverMethod::policy;
    throw ValidationError("unknown solver method '" + name + "' (expected value or policy)");
}

SolveResult solve(const Mdp& mdp, SolverMethod method, double tol, std::size_t max_iters) {
    return method == SolverMethod::value ? value_iteration(mdp, tol, max_iters) : policy_iteration(mdp, max_iters);
}

double convexity_tolerance(const Mdp& mdp) { return 1e-7 * std::max(mdp.max_price(), 1.0); }

std::vector<ShapeViolation> shape_violations(const Mdp& mdp, const ValueFunction& value, double tol) {
    std::vector<ShapeViolation> out;
    const std::size_t levels = mdp.num_levels();
    for (std::size_t x = 0; x < mdp.num_states(); ++x) {
        for (std::size_t i = 1; i < levels; ++i) {
            const double diff = value(x, i) - value(x, i - 1);
            if (diff > tol) out.push_back({x, i, "increasing", diff});
            if (i + 1 < levels) {
                const double second = value(x, i + 1) - 2.0 * value(x, i) + value(x, i - 1);
                if (second < -tol) out.push_back({x, i, "non-convex", -second});
            }
        }
    }
    return out;
}

}  // namespace battctl
