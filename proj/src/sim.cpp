#include "battctl/sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "battctl/error.hpp"

namespace battctl {

namespace {

constexpr double kMatchTol = 1e-9;

void check_aligned(const Trace& price, const Trace& demand) {
    if (price.empty() || demand.empty()) throw ValidationError("evaluation traces contain no rows");
    if (price.size() != demand.size()) throw ValidationError("price and demand traces cover different hours");
    for (std::size_t t = 0; t < price.size(); ++t)
        if (price.records[t].time != demand.records[t].time)
            throw ValidationError("price and demand traces are not aligned at " +
                                  format_timestamp(price.records[t].time));
}

void check_initial_level(double b0, double b_max) {
    if (!(b0 >= 0.0 && b0 <= b_max)) throw ValidationError("initial battery level must lie in [0, b_max]");
}

// Shared slot loop; choose(t, b, x) returns the target level for slot t.
template <typename Choose>
RunResult run_trace(const BatteryParams& params, const Trace& price, const Trace& demand, double b0, double alpha,
                    Choose&& choose) {
    RunResult out;
    std::array<std::size_t, kHoursPerDay> counts{};
    double b = b0;
    double discount = 1.0;
    out.battery_trajectory.reserve(price.size() + 1);
    out.battery_trajectory.push_back(b);
    for (std::size_t t = 0; t < price.size(); ++t) {
        const int hour = hour_of_day(price.records[t].time);
        const ExogenousState x{demand.records[t].value, price.records[t].value, hour};
        const double target = choose(t, b, x);
        const Action a = decompose(params, x, b, target);
        double cost = (a.a1 + a.a2) * x.price;
        if (params.replacement && (a.a2 > 0.0 || a.a3 > 0.0)) cost += params.replacement->q * params.replacement->cost;
        out.discounted_cost += cost * discount;
        out.undiscounted_cost += cost;
        discount *= alpha;
        const auto h = static_cast<std::size_t>(hour);
        out.per_hour_purchases[h] += a.a1 + a.a2;
        ++counts[h];
        if (a.a2 > 0.0 || a.a3 > 0.0) ++out.operation_count;
        b = step(params, b, a);
        out.battery_trajectory.push_back(b);
    }
    for (std::size_t h = 0; h < kHoursPerDay; ++h)
        if (counts[h] > 0) out.per_hour_purchases[h] /= static_cast<double>(counts[h]);
    return out;
}

}  // namespace

StateLookup::StateLookup(const std::vector<ExogenousState>& states) : states_(&states) {
    if (states.empty()) throw ValidationError("no trained states to map evaluation data onto");
    std::set<int> modes;
    for (const auto& s : states) modes.insert(s.mode);
    by_hour_ = modes.size() > 1;
    candidates_.assign(by_hour_ ? kHoursPerDay : 1, {});
    for (std::size_t k = 0; k < states.size(); ++k) {
        const int mode = states[k].mode;
        if (by_hour_ && (mode < 0 || mode >= kHoursPerDay))
            throw ValidationError("trained state mode " + std::to_string(mode) + " is not an hour of day");
        candidates_[by_hour_ ? static_cast<std::size_t>(mode) : 0].push_back(k);
    }
}

std::size_t StateLookup::nearest(double price, double demand, int hour, bool* exact) const {
    const auto& list = candidates_[by_hour_ ? static_cast<std::size_t>(hour) : 0];
    if (list.empty()) throw ValidationError("no trained state for hour " + std::to_string(hour));
    std::size_t best = list.front();
    double best_price = std::numeric_limits<double>::infinity();
    double best_demand = std::numeric_limits<double>::infinity();
    for (std::size_t k : list) {
        const auto& s = (*states_)[k];
        const double dp = std::abs(s.price - price);
        const double dd = std::abs(s.demand - demand);
        if (dp < best_price - kMatchTol || (dp <= best_price + kMatchTol && dd < best_demand - kMatchTol)) {
            best = k;
            best_price = dp;
            best_demand = dd;
        }
    }
    if (exact) *exact = best_price <= kMatchTol && best_demand <= kMatchTol;
    return best;
}

RunResult replay(const ThresholdTable& table, const BatteryParams& params, const Trace& price, const Trace& demand,
                 double b0, double alpha) {
    if (table.entries.empty()) throw ValidationError("threshold table is empty");
    check_aligned(price, demand);
    check_initial_level(b0, params.b_max);
    std::vector<ExogenousState> states;
    states.reserve(table.entries.size());
    for (const auto& e : table.entries) states.push_back(e.state);
    const StateLookup lookup(states);
    std::size_t misses = 0;
    RunResult out = run_trace(params, price, demand, b0, alpha, [&](std::size_t, double b, const ExogenousState& x) {
        bool exact = false;
        const auto& e = table.entries[lookup.nearest(x.price, x.demand, x.mode, &exact)];
        if (!exact) ++misses;
        return three_branch_target(b, control_set(params, x, b), e.beta_minus, e.beta_plus);
    });
    out.out_of_support = misses;
    return out;
}

RunResult replay_policy(const Mdp& mdp, const Policy& policy, const Trace& price, const Trace& demand, double b0) {
    if (policy.num_states() != mdp.num_states() || policy.num_levels() != mdp.num_levels())
        throw ValidationError("policy table does not match the decision process");
    check_aligned(price, demand);
    check_initial_level(b0, mdp.params.b_max);
    const StateLookup lookup(mdp.states);
    const auto last = static_cast<long>(mdp.num_levels()) - 1;
    std::size_t misses = 0;
    RunResult out =
        run_trace(mdp.params, price, demand, b0, mdp.alpha, [&](std::size_t, double b, const ExogenousState& x) {
            bool exact = false;
            const std::size_t state = lookup.nearest(x.price, x.demand, x.mode, &exact);
            if (!exact) ++misses;
            const auto i = static_cast<std::size_t>(std::clamp(snap_index(b, mdp.grids.battery_step), 0L, last));
            const Interval u = control_set(mdp.params, x, b);
            return std::clamp(mdp.level(policy(state, i)), u.lo, u.hi);
        });
    out.out_of_support = misses;
    return out;
}

double baseline(const Trace& price, const Trace& demand, double alpha) {
    check_aligned(price, demand);
    double total = 0.0;
    double discount = 1.0;
    for (std::size_t t = 0; t < price.size(); ++t) {
        total += demand.records[t].value * price.records[t].value * discount;
        discount *= alpha;
    }
    return total;
}

std::array<double, kHoursPerDay> hourly_mean(const Trace& trace) {
    std::array<double, kHoursPerDay> sum{};
    std::array<std::size_t, kHoursPerDay> count{};
    for (const auto& r : trace.records) {
        const auto h = static_cast<std::size_t>(hour_of_day(r.time));
        sum[h] += r.value;
        ++count[h];
    }
    for (std::size_t h = 0; h < kHoursPerDay; ++h)
        if (count[h] > 0) sum[h] /= static_cast<double>(count[h]);
    return sum;
}

TrainedModel train(const TracePair& data, const ExperimentSetup& setup, double b_max) {
    BatteryParams params = setup.params;
    params.b_max = b_max;
    const HourlyEmpirical empirical =
        fit_hourly(round_trace(data.price, setup.price_step), round_trace(data.demand, setup.demand_step),
                   setup.price_step, setup.demand_step, setup.independent);
    TrainedModel model{build_hourly(empirical, params, setup.alpha, setup.battery_step), {}, std::nullopt};
    model.solution = solve(model.mdp, setup.method, setup.tol, setup.max_iters);
    if (params.threshold_structure_applies()) model.table = extract(model.mdp, model.solution.policy);
    return model;
}

RunResult evaluate(const TrainedModel& model, const TracePair& data, const ExperimentSetup& setup) {
    const double b0 = std::min(setup.b0, model.mdp.params.b_max);
    if (model.table) return replay(*model.table, model.mdp.params, data.price, data.demand, b0, setup.alpha);
    return replay_policy(model.mdp, model.solution.policy, data.price, data.demand, b0);
}

namespace {

double relative_savings(double cost, double reference) { return reference > 0.0 ? 1.0 - cost / reference : 0.0; }

// Storage-free run, used for size 0.
RunResult no_storage_run(const TracePair& data, const ExperimentSetup& setup) {
    BatteryParams params = setup.params;
    params.b_max = 0.0;
    params.replacement.reset();
    ThresholdTable table;
    table.entries.push_back({});
    return replay(table, params, data.price, data.demand, 0.0, setup.alpha);
}

}  // namespace

SweepResult size_sweep(const TracePair& train_data, const TracePair& eval_data, const std::vector<double>& sizes,
                       const ExperimentSetup& setup) {
    if (sizes.empty()) throw ValidationError("battery size list is empty");
    for (std::size_t k = 0; k < sizes.size(); ++k) {
        if (!(sizes[k] >= 0.0)) throw ValidationError("battery sizes must be non-negative");
        if (k > 0 && !(sizes[k] > sizes[k - 1])) throw ValidationError("battery sizes must be strictly ascending");
    }
    SweepResult out;
    out.baseline = baseline(eval_data.price, eval_data.demand, setup.alpha);
    out.baseline_undiscounted = baseline(eval_data.price, eval_data.demand, 1.0);
    out.baseline_per_hour = hourly_mean(eval_data.demand);

    for (double size : sizes) {
        SweepPoint p;
        p.b_max = size;
        p.run = size == 0.0 ? no_storage_run(eval_data, setup) : evaluate(train(train_data, setup, size), eval_data, setup);
        p.savings = relative_savings(p.run.discounted_cost, out.baseline);
        p.savings_undiscounted = relative_savings(p.run.undiscounted_cost, out.baseline_undiscounted);
        out.points.push_back(std::move(p));
    }
    double best = 0.0;
    for (const auto& p : out.points) best = std::max(best, p.savings);
    bool found = false;
    for (auto& p : out.points) {
        p.saturated = p.savings >= best - kSaturationTol * std::abs(best);
        if (p.saturated && !found) {
            out.saturation_size = p.b_max;
            found = true;
        }
    }
    return out;
}

PoolResult pool(const Trace& price_train, const Trace& price_eval, const std::vector<Trace>& demand_train,
                const std::vector<Trace>& demand_eval, double b_max, const ExperimentSetup& setup) {
    const std::size_t n = demand_train.size();
    if (n == 0) throw ValidationError("pooling needs at least one user");
    if (demand_eval.size() != n) throw ValidationError("each user needs a training and an evaluation demand trace");
    if (!(b_max > 0.0)) throw ValidationError("per-user battery size must be positive");

    PoolResult out;
    out.users = n;
    for (std::size_t u = 0; u < n; ++u) {
        const TracePair eval{price_eval, demand_eval[u]};
        const RunResult run = evaluate(train({price_train, demand_train[u]}, setup, b_max), eval, setup);
        out.cost_individual += run.discounted_cost;
        out.cost_individual_undiscounted += run.undiscounted_cost;
    }
    const TracePair shared_train{price_train, sum_traces(demand_train)};
    const TracePair shared_eval{price_eval, sum_traces(demand_eval)};
    const RunResult shared =
        evaluate(train(shared_train, setup, b_max * static_cast<double>(n)), shared_eval, setup);
    out.cost_pooled = shared.discounted_cost;
    out.cost_pooled_undiscounted = shared.undiscounted_cost;
    out.cost_none = baseline(shared_eval.price, shared_eval.demand, setup.alpha);
    out.cost_none_undiscounted = baseline(shared_eval.price, shared_eval.demand, 1.0);
    return out;
}

}  // namespace battctl
