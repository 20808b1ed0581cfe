#pragma once

// Shared fixtures for the unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "battctl/mdp.hpp"
#include "battctl/model.hpp"

namespace battctl::testing {

/// Four price levels 1..4 with a deterministic-ish Markov chain, D = 1,
/// b_max = 1, efficient battery.
inline Mdp example_one(double alpha, double battery_step = kDefaultBatteryStep) {
    BatteryParams params;
    params.b_max = 1.0;
    const std::vector<std::vector<double>> transition = {
        {0.5, 0.0, 0.5, 0.0},
        {1.0, 0.0, 0.0, 0.0},
        {0.0, 0.0, 0.0, 1.0},
        {0.0, 1.0, 0.0, 0.0},
    };
    return build_markov_prices({1, 2, 3, 4}, transition, {{{1.0, 1.0}}}, params, alpha, battery_step);
}

/// One exogenous state with constant price and demand.
inline Mdp constant_price(double price, double demand, double b_max, double alpha) {
    BatteryParams params;
    params.b_max = b_max;
    return build_iid({{price, 1.0}}, {{demand, 1.0}}, params, alpha);
}

/// Discounted cost of serving constant demand d at price p from a battery
/// holding b: stored energy is used first, d per slot.
inline double constant_price_cost(double price, double demand, double b, double alpha, std::size_t horizon = 100000) {
    double saved = 0.0;
    double discount = 1.0;
    for (std::size_t k = 0; k < horizon && b - static_cast<double>(k) * demand > 0.0; ++k) {
        saved += discount * std::min(demand, b - static_cast<double>(k) * demand);
        discount *= alpha;
    }
    return demand * price / (1.0 - alpha) - price * saved;
}

struct InstanceOptions {
    bool iid = false;
    bool efficient = false;  // force eta_c = eta_d = 1
    double alpha_lo = 0.5;
    double alpha_hi = 0.95;
    std::size_t max_levels = 33;
};

/// Random small decision process: up to 4 prices and 3 demands on the usual
/// grids, up to max_levels battery levels, eta in [0.6, 1].
inline Mdp random_instance(std::uint64_t seed, const InstanceOptions& opt = {}) {
    std::mt19937_64 rng(seed);
    auto uniform = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
    auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
    auto weights = [&](std::size_t n) {
        std::vector<double> w(n);
        double total = 0.0;
        for (auto& v : w) total += v = uniform(0.05, 1.0);
        for (auto& v : w) v /= total;
        return w;
    };

    BatteryParams params;
    const int max_steps = static_cast<int>(opt.max_levels) - 1;
    params.b_max = 0.5 * pick(2, max_steps);
    const bool efficient = opt.efficient || pick(0, 3) == 0;
    params.eta_c = efficient ? 1.0 : uniform(0.6, 1.0);
    params.eta_d = efficient ? 1.0 : uniform(0.6, 1.0);
    const double alpha = uniform(opt.alpha_lo, opt.alpha_hi);

    std::vector<double> prices;
    const int n_prices = pick(1, 4);
    std::vector<int> cells = {1, 2, 3, 4, 5, 6, 7, 8};
    std::shuffle(cells.begin(), cells.end(), rng);
    for (int k = 0; k < n_prices; ++k) prices.push_back(5.0 * cells[static_cast<std::size_t>(k)]);
    std::sort(prices.begin(), prices.end());

    std::vector<double> demands;
    const int n_demands = pick(1, 3);
    std::vector<int> halves = {0, 1, 2, 3, 4, 5, 6};
    std::shuffle(halves.begin(), halves.end(), rng);
    for (int k = 0; k < n_demands; ++k) demands.push_back(0.5 * halves[static_cast<std::size_t>(k)]);
    std::sort(demands.begin(), demands.end());

    Distribution demand;
    const auto dw = weights(demands.size());
    for (std::size_t k = 0; k < demands.size(); ++k) demand.push_back({demands[k], dw[k]});

    if (opt.iid || pick(0, 1) == 0) {
        Distribution price;
        const auto pw = weights(prices.size());
        for (std::size_t k = 0; k < prices.size(); ++k) price.push_back({prices[k], pw[k]});
        return build_iid(price, demand, params, alpha);
    }
    std::vector<std::vector<double>> transition;
    for (std::size_t k = 0; k < prices.size(); ++k) transition.push_back(weights(prices.size()));
    return build_markov_prices(prices, transition, {demand}, params, alpha);
}

}  // namespace battctl::testing
