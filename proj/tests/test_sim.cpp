#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "battctl/error.hpp"
#include "battctl/sim.hpp"

using namespace battctl;

namespace {

Trace hourly(const std::vector<double>& values, int days = 1) {
    Trace t;
    const TimePoint start = parse_timestamp("2011-01-01T00:00");
    for (int k = 0; k < 24 * days; ++k)
        t.records.push_back({start + std::chrono::hours(k), values[static_cast<std::size_t>(k) % values.size()]});
    return t;
}

BatteryParams battery(double b_max) {
    BatteryParams p;
    p.b_max = b_max;
    return p;
}

ThresholdTable flat_table(const std::vector<ExogenousState>& states, double beta) {
    ThresholdTable t;
    for (const auto& s : states) t.entries.push_back({s, beta, beta, true, true});
    return t;
}

ExperimentSetup small_setup() {
    ExperimentSetup s;
    s.alpha = 0.95;
    return s;
}

// Night (hours 0-5) at 5 ct, day at 20 ct, 1 kWh every hour.
TracePair night_cheap(int days) {
    std::vector<double> price(24, 20.0);
    for (int h = 0; h < 6; ++h) price[static_cast<std::size_t>(h)] = 5.0;
    return {hourly(price, days), hourly({1.0}, days)};
}

}  // namespace

TEST_CASE("baseline cost") {
    const Trace price = hourly({10.0, 20.0});
    const Trace demand = hourly({1.0, 0.5});
    // Every slot costs 10 ct: 1 kWh at 10, then 0.5 kWh at 20.
    double expected = 0.0;
    double discount = 1.0;
    for (int k = 0; k < 24; ++k) {
        expected += discount * 10.0;
        discount *= 0.5;
    }
    CHECK(baseline(price, demand, 0.5) == doctest::Approx(expected));
    CHECK(baseline(hourly({10.0}), hourly({1.0}), 0.5) == doctest::Approx(20.0 * (1 - std::pow(0.5, 24))));
}

TEST_CASE("zero thresholds from an empty battery reproduce the baseline") {
    const Trace price = hourly({5.0, 10.0, 15.0});
    const Trace demand = hourly({0.5, 1.0});
    const std::vector<ExogenousState> states = {{0.5, 5.0, 0}, {1.0, 10.0, 0}, {0.5, 15.0, 0}, {1.0, 5.0, 0}};
    const RunResult r = replay(flat_table(states, 0.0), battery(4.0), price, demand, 0.0, 0.9);
    CHECK(r.discounted_cost == doctest::Approx(baseline(price, demand, 0.9)));
    CHECK(r.operation_count == 0);
    for (double b : r.battery_trajectory) CHECK(b == 0.0);
}

TEST_CASE("replay follows the three-branch rule and stays feasible") {
    const Trace price = hourly({5.0, 20.0});
    const Trace demand = hourly({1.0, 1.5, 0.0});
    const std::vector<ExogenousState> states = {{1.0, 5.0, 0}, {1.5, 5.0, 0}, {0.0, 5.0, 0},
                                                {1.0, 20.0, 0}, {1.5, 20.0, 0}, {0.0, 20.0, 0}};
    ThresholdTable table;
    for (const auto& s : states) {
        const double beta = s.price == 5.0 ? 3.0 : 0.0;
        table.entries.push_back({s, beta, beta, true, true});
    }
    const RunResult r = replay(table, battery(3.0), price, demand, 0.0, 0.99);
    REQUIRE(r.battery_trajectory.size() == 25);
    for (double b : r.battery_trajectory) {
        CHECK(b >= 0.0);
        CHECK(b <= 3.0);
    }
    // Slot 0 is cheap: charge to 3. Slot 1 is dear with demand 1.5: discharge 1.5.
    CHECK(r.battery_trajectory[1] == doctest::Approx(3.0));
    CHECK(r.battery_trajectory[2] == doctest::Approx(1.5));
    CHECK(r.out_of_support == 0);
    CHECK(r.undiscounted_cost >= r.discounted_cost);

    SUBCASE("purchases add up") {
        double bought = 0.0;
        for (double v : r.per_hour_purchases) bought += v;
        double demand_total = 0.0;
        for (const auto& rec : demand.records) demand_total += rec.value;
        // Energy bought = energy used + energy left in the battery.
        CHECK(bought == doctest::Approx(demand_total + r.battery_trajectory.back()));
    }
}

TEST_CASE("replay input validation") {
    const Trace price = hourly({10.0});
    const ThresholdTable table = flat_table({{1.0, 10.0, 0}}, 0.0);
    CHECK_THROWS_AS(replay(table, battery(2.0), price, hourly({1.0}, 2), 0.0, 0.9), ValidationError);
    CHECK_THROWS_AS(replay(table, battery(2.0), price, hourly({1.0}), 3.0, 0.9), ValidationError);
    CHECK_THROWS_AS(replay(ThresholdTable{}, battery(2.0), price, hourly({1.0}), 0.0, 0.9), ValidationError);
}

TEST_CASE("state lookup") {
    const std::vector<ExogenousState> states = {{1.0, 10.0, 0}, {2.0, 10.0, 0}, {1.0, 20.0, 0}};
    const StateLookup lookup(states);
    bool exact = false;
    CHECK(lookup.nearest(20.0, 1.0, 5, &exact) == 2);
    CHECK(exact);
    CHECK(lookup.nearest(12.0, 1.9, 5, &exact) == 1);
    CHECK_FALSE(exact);

    std::vector<ExogenousState> modulated;
    for (int h = 0; h < kHoursPerDay; ++h) modulated.push_back({1.0, 10.0 + h, h});
    const StateLookup by_hour(modulated);
    CHECK(by_hour.nearest(10.0, 1.0, 7) == 7);
}

TEST_CASE("hourly mean") {
    const auto m = hourly_mean(hourly({1.0, 3.0}, 2));
    CHECK(m[0] == 1.0);
    CHECK(m[1] == 3.0);
}

TEST_CASE("trained policy on a night-cheap trace") {
    const TracePair data = night_cheap(7);
    const ExperimentSetup setup = small_setup();
    const TrainedModel model = train(data, setup, 8.0);
    REQUIRE(model.table.has_value());
    const RunResult r = evaluate(model, data, setup);
    const double base = baseline(data.price, data.demand, setup.alpha);
    CHECK(r.discounted_cost < base);
    CHECK(r.out_of_support == 0);
    // Purchases move into the cheap hours.
    double cheap = 0.0;
    double total = 0.0;
    for (int h = 0; h < kHoursPerDay; ++h) {
        total += r.per_hour_purchases[static_cast<std::size_t>(h)];
        if (h < 6) cheap += r.per_hour_purchases[static_cast<std::size_t>(h)];
    }
    CHECK(cheap / total > 6.0 / 24.0);

    SUBCASE("the tabulated policy gives the same run") {
        const RunResult p = replay_policy(model.mdp, model.solution.policy, data.price, data.demand, 0.0);
        CHECK(p.discounted_cost == doctest::Approx(r.discounted_cost));
        CHECK(p.battery_trajectory == r.battery_trajectory);
    }
}

TEST_CASE("constant price: storage does not help") {
    const TracePair data{hourly({10.0}, 3), hourly({1.0, 0.5}, 3)};
    const ExperimentSetup setup = small_setup();
    const TrainedModel model = train(data, setup, 4.0);
    const RunResult r = evaluate(model, data, setup);
    CHECK(r.discounted_cost == doctest::Approx(baseline(data.price, data.demand, setup.alpha)));
    CHECK(r.operation_count == 0);
}

TEST_CASE("zero demand costs nothing") {
    const TracePair data{hourly({5.0, 20.0}, 3), hourly({0.0}, 3)};
    const ExperimentSetup setup = small_setup();
    const RunResult r = evaluate(train(data, setup, 4.0), data, setup);
    CHECK(r.discounted_cost == 0.0);
}

TEST_CASE("size sweep") {
    const TracePair data = night_cheap(7);
    const ExperimentSetup setup = small_setup();
    SUBCASE("no storage") {
        const SweepResult s = size_sweep(data, data, {0.0}, setup);
        REQUIRE(s.points.size() == 1);
        CHECK(s.points[0].savings == 0.0);
        CHECK(s.points[0].run.discounted_cost == doctest::Approx(s.baseline));
    }
    SUBCASE("savings grow and saturate") {
        // 18 dear hours at 0.5 kWh: 9 kWh of storage covers the day.
        const TracePair half{data.price, hourly({0.5}, 7)};
        const SweepResult s = size_sweep(half, half, {0.0, 2.0, 8.0, 16.0, 32.0}, setup);
        for (std::size_t k = 1; k < s.points.size(); ++k) CHECK(s.points[k].savings >= s.points[k - 1].savings - 1e-9);
        CHECK(s.points.back().saturated);
        CHECK(s.points[3].saturated);
        CHECK(s.saturation_size <= 16.0);
    }
    SUBCASE("sizes must ascend") {
        CHECK_THROWS_AS(size_sweep(data, data, {4.0, 2.0}, setup), ValidationError);
    }
}

TEST_CASE("pooling") {
    const TracePair a = night_cheap(5);
    Trace other = hourly({0.5, 1.5, 1.0}, 5);
    const ExperimentSetup setup = small_setup();
    SUBCASE("one user") {
        const PoolResult r = pool(a.price, a.price, {a.demand}, {a.demand}, 4.0, setup);
        CHECK(r.cost_pooled == r.cost_individual);
        CHECK(r.cost_individual < r.cost_none);
    }
    SUBCASE("two users") {
        const PoolResult r = pool(a.price, a.price, {a.demand, other}, {a.demand, other}, 4.0, setup);
        CHECK(r.users == 2);
        CHECK(std::abs(r.cost_pooled - r.cost_individual) <= 0.05 * r.cost_individual);
        CHECK(r.cost_none == doctest::Approx(baseline(a.price, a.demand, setup.alpha) + baseline(a.price, other, setup.alpha)));
    }
}
