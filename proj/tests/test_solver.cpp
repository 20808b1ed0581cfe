#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "battctl/error.hpp"
#include "battctl/parallel.hpp"
#include "battctl/solver.hpp"
#include "support.hpp"

using namespace battctl;

namespace {

double max_abs_diff(const ValueFunction& a, const ValueFunction& b) { return a.distance(b); }

// Dense Bellman operator written from the definition, no shared rows.
ValueFunction naive_backup(const Mdp& mdp, const ValueFunction& j) {
    ValueFunction out(mdp.num_states(), mdp.num_levels());
    for (std::size_t x = 0; x < mdp.num_states(); ++x) {
        for (std::size_t i = 0; i < mdp.num_levels(); ++i) {
            const Interval u = control_set(mdp.params, mdp.states[x], mdp.level(i));
            double best = INFINITY;
            for (std::size_t k = 0; k < mdp.num_levels(); ++k) {
                if (!u.contains(mdp.level(k), 1e-9)) continue;
                double g = 0.0;
                for (std::size_t y = 0; y < mdp.num_states(); ++y) g += mdp.kernel.prob(x, y) * j(y, k);
                best = std::min(best, immediate_cost(mdp.params, mdp.states[x], mdp.level(k) - mdp.level(i)) +
                                          mdp.alpha * g);
            }
            out(x, i) = best;
        }
    }
    return out;
}

HourlyEmpirical three_cell_hours() {
    HourlyEmpirical emp;
    for (int h = 0; h < kHoursPerDay; ++h) {
        const double cheap = h < 6 ? 5.0 : 20.0;
        emp.hours[static_cast<std::size_t>(h)] = {{cheap, 1.0, 0.5}, {cheap + 5.0, 1.5, 0.3}, {cheap + 10.0, 0.5, 0.2}};
    }
    return emp;
}

}  // namespace

TEST_CASE("backup from zero continuation buys only the demand") {
    const Mdp mdp = testing::random_instance(3);
    const Backup b = bellman_backup(mdp, ValueFunction(mdp.num_states(), mdp.num_levels()));
    for (std::size_t x = 0; x < mdp.num_states(); ++x) {
        for (std::size_t i = 0; i < mdp.num_levels(); ++i) {
            // Discharging lowers the bill, so the one-step optimum drains the
            // battery as far as demand allows.
            const LevelRange r = mdp.feasible_levels(x, i);
            const double expected = immediate_cost(mdp.params, mdp.states[x], mdp.level(r.lo) - mdp.level(i));
            CHECK(b.value(x, i) == doctest::Approx(expected));
            if (mdp.states[x].demand == 0.0 || mdp.states[x].price == 0.0) CHECK(b.policy(x, i) == i);
        }
    }
}

TEST_CASE("backup matches the dense definition") {
    for (std::uint64_t seed = 100; seed < 110; ++seed) {
        const Mdp mdp = testing::random_instance(seed, {.max_levels = 9});
        ValueFunction j(mdp.num_states(), mdp.num_levels());
        for (int n = 0; n < 5; ++n) {
            const Backup b = bellman_backup(mdp, j);
            CHECK(max_abs_diff(b.value, naive_backup(mdp, j)) <= 1e-9 * value_bound(mdp));
            j = b.value;
        }
    }
}

TEST_CASE("constant price closed form") {
    const double p = 10.0;
    const double alpha = 0.9;
    SUBCASE("demand covers the battery in one slot") {
        const Mdp mdp = testing::constant_price(p, 4.0, 4.0, alpha);
        const SolveResult vi = value_iteration(mdp, 1e-8);
        const SolveResult pi = policy_iteration(mdp);
        CHECK(pi.iterations <= 2);
        for (std::size_t i = 0; i < mdp.num_levels(); ++i) {
            const double closed = 4.0 * p / (1 - alpha) - mdp.level(i) * p;
            CHECK(vi.value(0, i) == doctest::Approx(closed).epsilon(1e-8));
            CHECK(pi.value(0, i) == doctest::Approx(closed).epsilon(1e-10));
        }
    }
    SUBCASE("small demand drains the battery over several slots") {
        const Mdp mdp = testing::constant_price(p, 0.5, 3.0, alpha);
        const SolveResult pi = policy_iteration(mdp);
        for (std::size_t i = 0; i < mdp.num_levels(); ++i)
            CHECK(pi.value(0, i) == doctest::Approx(testing::constant_price_cost(p, 0.5, mdp.level(i), alpha)));
    }
}

TEST_CASE("value bound") {
    const Mdp mdp = testing::example_one(0.5);
    CHECK(value_bound(mdp) == doctest::Approx(16.0));
    const SolveResult r = value_iteration(mdp);
    for (double v : r.value.data()) {
        CHECK(v >= 0.0);
        CHECK(v <= 16.0);
    }
}

TEST_CASE("example chain: both solvers give the same policy") {
    for (double alpha : {0.75, 0.9, 0.99}) {
        const Mdp mdp = testing::example_one(alpha);
        const SolveResult vi = value_iteration(mdp, 1e-9);
        const SolveResult pi = policy_iteration(mdp);
        CHECK(vi.policy == pi.policy);
        CHECK(max_abs_diff(vi.value, pi.value) <= 2e-9);
    }
}

TEST_CASE("value and policy iteration agree on random instances") {
    const double tol = 1e-6;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const Mdp mdp = testing::random_instance(seed, {.max_levels = 9});
        const SolveResult vi = value_iteration(mdp, tol);
        const SolveResult pi = policy_iteration(mdp);
        CHECK(max_abs_diff(vi.value, pi.value) <= 2 * tol);
    }
}

TEST_CASE("policy iteration matches value iteration with 33 levels") {
    const Mdp mdp = testing::random_instance(17, {.iid = true, .max_levels = 33});
    const SolveResult vi = value_iteration(mdp, 1e-8);
    const SolveResult pi = policy_iteration(mdp);
    CHECK(max_abs_diff(vi.value, pi.value) <= 2e-8);
}

TEST_CASE("iterative policy evaluation on a large model") {
    BatteryParams params;
    params.b_max = 40.0;
    const Mdp mdp = build_hourly(three_cell_hours(), params, 0.95);
    REQUIRE(mdp.num_states() * mdp.num_levels() > kDirectSolveLimit);
    const SolveResult pi = policy_iteration(mdp);
    const SolveResult vi = value_iteration(mdp, 1e-6);
    CHECK(max_abs_diff(vi.value, pi.value) <= 2e-6);
    // Evaluating the optimal policy reproduces its value.
    CHECK(max_abs_diff(evaluate_policy(mdp, pi.policy), pi.value) <= 1e-7);
}

TEST_CASE("finite horizon oracle") {
    const Mdp mdp = testing::random_instance(5, {.efficient = true, .max_levels = 9});
    SUBCASE("zero horizon") {
        const ValueFunction j0 = finite_horizon_oracle(mdp, 0);
        for (double v : j0.data()) CHECK(v == 0.0);
    }
    SUBCASE("one step drains the battery") {
        const ValueFunction j1 = finite_horizon_oracle(mdp, 1);
        for (std::size_t x = 0; x < mdp.num_states(); ++x)
            for (std::size_t i = 0; i < mdp.num_levels(); ++i)
                CHECK(j1(x, i) == doctest::Approx(std::max(mdp.states[x].demand - mdp.level(i), 0.0) *
                                                  mdp.states[x].price));
    }
    SUBCASE("costs accumulate with the horizon") {
        ValueFunction prev = finite_horizon_oracle(mdp, 0);
        for (std::size_t n = 1; n < 12; ++n) {
            const ValueFunction cur = finite_horizon_oracle(mdp, n);
            for (std::size_t k = 0; k < cur.data().size(); ++k) CHECK(cur.data()[k] >= prev.data()[k] - 1e-12);
            prev = cur;
        }
    }
    SUBCASE("geometric convergence to the fixed point") {
        const SolveResult vi = value_iteration(mdp, 1e-9);
        const ValueFunction one_step = finite_horizon_oracle(mdp, 1);
        const double j1 = *std::max_element(one_step.data().begin(), one_step.data().end());
        for (std::size_t n : {5, 20, 60}) {
            const double bound = std::pow(mdp.alpha, static_cast<double>(n)) * j1 / (1 - mdp.alpha) + 1e-9;
            CHECK(max_abs_diff(finite_horizon_oracle(mdp, n), vi.value) <= bound);
        }
    }
}

TEST_CASE("non-convergence carries the residual") {
    const Mdp mdp = testing::example_one(0.99);
    try {
        value_iteration(mdp, 1e-9, 5);
        FAIL("expected ConvergenceError");
    } catch (const ConvergenceError& e) {
        CHECK(e.residual() > 0.0);
    }
    CHECK_THROWS_AS(value_iteration(mdp, 0.0), PreconditionError);
}

TEST_CASE("solution does not depend on the thread count") {
    BatteryParams params;
    params.b_max = 8.0;
    const Mdp mdp = build_hourly(three_cell_hours(), params, 0.9);
    set_worker_threads(1);
    const SolveResult one = policy_iteration(mdp);
    const SolveResult vone = value_iteration(mdp, 1e-6);
    set_worker_threads(8);
    const SolveResult many = policy_iteration(mdp);
    const SolveResult vmany = value_iteration(mdp, 1e-6);
    set_worker_threads(0);
    CHECK(one.value == many.value);
    CHECK(one.policy == many.policy);
    CHECK(vone.value == vmany.value);
    CHECK(vone.iterations == vmany.iterations);
}

TEST_CASE("do-nothing policy keeps the level") {
    const Mdp mdp = testing::random_instance(8);
    const Policy p = do_nothing_policy(mdp);
    for (std::size_t x = 0; x < mdp.num_states(); ++x)
        for (std::size_t i = 0; i < mdp.num_levels(); ++i) CHECK(p(x, i) == i);
}

TEST_CASE("value function shape on random instances") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const Mdp mdp = testing::random_instance(seed);
        const SolveResult r = policy_iteration(mdp);
        CHECK(shape_violations(mdp, r.value, convexity_tolerance(mdp)).empty());
    }
}

TEST_CASE("solver method names") {
    CHECK(parse_solver_method("value") == SolverMethod::value);
    CHECK(parse_solver_method("policy") == SolverMethod::policy);
    CHECK_THROWS_AS(parse_solver_method("newton"), ValidationError);
}
