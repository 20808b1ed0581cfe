#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "battctl/mdp.hpp"

namespace battctl {

/// Minimal discounted cost J[x][b], row-major by exogenous state.
class ValueFunction {
public:
    ValueFunction() = default;
    ValueFunction(std::size_t num_states, std::size_t num_levels, double fill = 0.0)
        : states_(num_states), levels_(num_levels), values_(num_states * num_levels, fill) {}

    double operator()(std::size_t x, std::size_t i) const { return values_[x * levels_ + i]; }
    double& operator()(std::size_t x, std::size_t i) { return values_[x * levels_ + i]; }

    std::size_t num_states() const { return states_; }
    std::size_t num_levels() const { return levels_; }
    const std::vector<double>& data() const { return values_; }
    std::vector<double>& data() { return values_; }

    /// Sup-norm distance.
    double distance(const ValueFunction& other) const;

    friend bool operator==(const ValueFunction&, const ValueFunction&) = default;

private:
    std::size_t states_ = 0;
    std::size_t levels_ = 0;
    std::vector<double> values_;
};

/// Target battery level per cell, stored as a battery grid index.
class Policy {
public:
    Policy() = default;
    Policy(std::size_t num_states, std::size_t num_levels)
        : states_(num_states), levels_(num_levels), targets_(num_states * num_levels, 0) {}

    std::size_t operator()(std::size_t x, std::size_t i) const { return targets_[x * levels_ + i]; }
    std::size_t& operator()(std::size_t x, std::size_t i) { return targets_[x * levels_ + i]; }

    std::size_t num_states() const { return states_; }
    std::size_t num_levels() const { return levels_; }

    friend bool operator==(const Policy&, const Policy&) = default;

private:
    std::size_t states_ = 0;
    std::size_t levels_ = 0;
    std::vector<std::size_t> targets_;
};

struct SolveResult {
    ValueFunction value;
    Policy policy;
    std::size_t iterations = 0;
    double residual = 0.0;  // sup-norm of the last Bellman update
};

struct Backup {
    ValueFunction value;
    Policy policy;
};

/// Relative tolerance under which two candidate costs count as tied.
inline constexpr double kTieRelTol = 1e-11;
/// Inner tolerance of iterative policy evaluation.
inline constexpr double kEvaluationTol = 1e-9;
/// Largest number of unknowns evaluated with a sparse direct solve.
inline constexpr std::size_t kDirectSolveLimit = 5000;

/// Expected continuation cost G per kernel row: G[r][j] = sum_y f_r(y) J[y][j].
std::vector<std::vector<double>> continuation(const Mdp& mdp, const ValueFunction& value);

/// One Jacobi sweep of the Bellman operator. Ties go to the highest level.
Backup bellman_backup(const Mdp& mdp, const ValueFunction& value);

SolveResult value_iteration(const Mdp& mdp, double tol = 1e-6, std::size_t max_iters = 1'000'000);

SolveResult policy_iteration(const Mdp& mdp, std::size_t max_iters = 1000);

/// Discounted cost of following a fixed policy forever.
ValueFunction evaluate_policy(const Mdp& mdp, const Policy& policy, const ValueFunction* warm_start = nullptr);

/// Policy that keeps the battery where it is (nearest feasible grid level).
Policy do_nothing_policy(const Mdp& mdp);

/// Exact n-step discounted cost by backward recursion from zero. Written
/// without the shared-row shortcuts of bellman_backup so it can serve as an
/// independent check.
ValueFunction finite_horizon_oracle(const Mdp& mdp, std::size_t horizon);

/// Upper bound on any discounted cost of the process.
double value_bound(const Mdp& mdp);

enum class SolverMethod { value, policy };

SolverMethod parse_solver_method(const std::string& name);

SolveResult solve(const Mdp& mdp, SolverMethod method, double tol, std::size_t max_iters);

/// Cells where J[x][.] fails to be non-increasing or discretely convex.
struct ShapeViolation {
    std::size_t state = 0;
    std::size_t level = 0;
    std::string kind;  // "increasing" or "non-convex"
    double amount = 0.0;
};
std::vector<ShapeViolation> shape_violations(const Mdp& mdp, const ValueFunction& value, double tol);

/// Default convexity tolerance, 1e-7 * P^max.
double convexity_tolerance(const Mdp& mdp);

}  // namespace battctl
