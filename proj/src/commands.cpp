#include "battctl/commands.hpp"

#include <algorithm>
#include <chrono>
#include <iomanip>
#include <optional>
#include <sstream>

#include "battctl/error.hpp"
#include "battctl/serialize.hpp"
#include "battctl/sim.hpp"
#include "battctl/thresholds.hpp"
#include "battctl/verify.hpp"

namespace battctl {

namespace {

namespace fs = std::filesystem;

struct Solved {
    Mdp mdp;
    SolveResult result;
    std::optional<ThresholdTable> table;
};

Solved solve_config(const RunConfig& config) {
    Solved s{build_model(config), {}, std::nullopt};
    s.result = solve(s.mdp, config.method, config.tol, config.max_iters);
    if (s.mdp.params.threshold_structure_applies()) s.table = extract(s.mdp, s.result.policy);
    return s;
}

fs::path prepare(const CommandOptions& options) {
    fs::create_directories(options.out_dir);
    return options.out_dir;
}

std::string csv_row(std::initializer_list<std::string> fields) {
    std::string line;
    for (const auto& f : fields) {
        if (!line.empty()) line += ',';
        line += f;
    }
    return line + '\n';
}

std::string fixed(double v, int digits = 4) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(digits) << v;
    return os.str();
}

double savings(double cost, double reference) { return reference > 0.0 ? 1.0 - cost / reference : 0.0; }

std::size_t max_users(const RunConfig& config) {
    int n = 1;
    for (int u : config.pool_users) n = std::max(n, u);
    return static_cast<std::size_t>(n);
}

}  // namespace

int cmd_solve(const RunConfig& config, const CommandOptions& options, std::ostream& out) {
    const auto start = std::chrono::steady_clock::now();
    const Solved s = solve_config(config);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    const fs::path dir = prepare(options);
    write_json(dir / "value_function.json", value_to_json(s.mdp, s.result));
    write_json(dir / "policy.json", policy_to_json(s.mdp, s.result.policy));
    if (s.table) write_json(dir / "thresholds.json", thresholds_to_json(s.mdp, *s.table));

    out << "states " << s.mdp.num_states() << ", battery levels " << s.mdp.num_levels() << '\n'
        << "iterations " << s.result.iterations << ", residual " << s.result.residual << ", wall time "
        << fixed(seconds, 3) << " s\n";
    if (!s.table) out << "thresholds skipped (non-convex immediate cost or self-discharge)\n";
    return kExitOk;
}

int cmd_simulate(const RunConfig& config, const CommandOptions& options, std::ostream& out) {
    const Dataset data = load_dataset(config, 1);
    const Trace& price = data.price_eval;
    const Trace& demand = data.demand_eval.front();
    const BatteryParams params = battery_params(config);

    RunResult run;
    if (options.thresholds) {
        run = replay(thresholds_from_json(read_json(*options.thresholds)), params, price, demand, config.b0,
                     config.alpha);
    } else {
        const Solved s = solve_config(config);
        run = s.table ? replay(*s.table, params, price, demand, config.b0, config.alpha)
                      : replay_policy(s.mdp, s.result.policy, price, demand, config.b0);
    }
    const double base = baseline(price, demand, config.alpha);
    const double base_total = baseline(price, demand, 1.0);
    const auto without = hourly_mean(demand);

    const fs::path dir = prepare(options);
    std::string csv = csv_row({"hour", "mean_kwh_with_storage", "mean_kwh_without"});
    for (std::size_t h = 0; h < kHoursPerDay; ++h)
        csv += csv_row({std::to_string(h), format_number(run.per_hour_purchases[h]), format_number(without[h])});
    write_text(dir / "purchases.csv", csv);

    Json doc{{"baseline_discounted_cost", base},
             {"baseline_undiscounted_cost", base_total},
             {"relative_savings", savings(run.discounted_cost, base)},
             {"relative_savings_undiscounted", savings(run.undiscounted_cost, base_total)},
             {"clamp_warnings", data.clamp_warnings},
             {"filled_samples", data.filled_samples},
             {"run", run_to_json(run, options.trajectories)}};
    write_json(dir / "run.json", doc);

    out << "slots " << price.size() << ", operations " << run.operation_count << ", out-of-support slots "
        << run.out_of_support << '\n'
        << "discounted cost " << fixed(run.discounted_cost) << " vs " << fixed(base) << " without storage, savings "
        << fixed(100.0 * savings(run.discounted_cost, base), 2) << "%\n"
        << "undiscounted cost " << fixed(run.undiscounted_cost) << " vs " << fixed(base_total) << ", savings "
        << fixed(100.0 * savings(run.undiscounted_cost, base_total), 2) << "%\n";
    return kExitOk;
}

int cmd_sweep(const RunConfig& config, const CommandOptions& options, std::ostream& out) {
    const Dataset data = load_dataset(config, 1);
    const SweepResult sweep = size_sweep({data.price_train, data.demand_train.front()},
                                         {data.price_eval, data.demand_eval.front()}, config.sweep_sizes,
                                         experiment_setup(config));
    const fs::path dir = prepare(options);
    std::string csv = csv_row({"b_max_kwh", "relative_savings", "saturation_flag"});
    Json points = Json::array();
    for (const auto& p : sweep.points) {
        csv += csv_row({format_number(p.b_max), format_number(p.savings), p.saturated ? "1" : "0"});
        points.push_back(Json{{"b_max_kwh", p.b_max},
                              {"relative_savings", p.savings},
                              {"relative_savings_undiscounted", p.savings_undiscounted},
                              {"saturated", p.saturated},
                              {"run", run_to_json(p.run, options.trajectories)}});
        out << "b_max " << format_number(p.b_max) << " kWh: savings " << fixed(100.0 * p.savings, 2)
            << "% (undiscounted " << fixed(100.0 * p.savings_undiscounted, 2) << "%)" << (p.saturated ? " *" : "")
            << '\n';
    }
    write_text(dir / "sweep.csv", csv);
    write_json(dir / "sweep.json", Json{{"baseline_discounted_cost", sweep.baseline},
                                        {"baseline_undiscounted_cost", sweep.baseline_undiscounted},
                                        {"baseline_per_hour_kwh", sweep.baseline_per_hour},
                                        {"saturation_size_kwh", sweep.saturation_size},
                                        {"points", std::move(points)}});
    out << "saturation at " << format_number(sweep.saturation_size) << " kWh\n";
    return kExitOk;
}

int cmd_pool(const RunConfig& config, const CommandOptions& options, std::ostream& out) {
    const Dataset data = load_dataset(config, max_users(config));
    const ExperimentSetup setup = experiment_setup(config);
    std::string csv = csv_row({"n", "cost_none", "cost_individual", "cost_pooled"});
    Json rows = Json::array();
    for (int n : config.pool_users) {
        const auto users = static_cast<std::size_t>(n);
        const std::vector<Trace> train(data.demand_train.begin(), data.demand_train.begin() + n);
        const std::vector<Trace> eval(data.demand_eval.begin(), data.demand_eval.begin() + n);
        const PoolResult r = pool(data.price_train, data.price_eval, train, eval, config.battery.b_max, setup);
        csv += csv_row({std::to_string(users), format_number(r.cost_none), format_number(r.cost_individual),
                        format_number(r.cost_pooled)});
        rows.push_back(Json{{"n", users},
                            {"cost_none", r.cost_none},
                            {"cost_individual", r.cost_individual},
                            {"cost_pooled", r.cost_pooled},
                            {"cost_none_undiscounted", r.cost_none_undiscounted},
                            {"cost_individual_undiscounted", r.cost_individual_undiscounted},
                            {"cost_pooled_undiscounted", r.cost_pooled_undiscounted}});
        out << "n " << n << ": none " << fixed(r.cost_none) << ", individual " << fixed(r.cost_individual)
            << ", pooled " << fixed(r.cost_pooled) << '\n';
    }
    const fs::path dir = prepare(options);
    write_text(dir / "pool.csv", csv);
    write_json(dir / "pool.json", Json{{"b_max_per_user_kwh", config.battery.b_max}, {"rows", std::move(rows)}});
    return kExitOk;
}

int cmd_verify(const RunConfig& config, const CommandOptions& options, std::ostream& out) {
    const Mdp mdp = build_model(config);
    ValueFunction value;
    Policy policy;
    double residual = 0.0;
    if (options.artifacts) {
        value = value_from_json(mdp, read_json(*options.artifacts / "value_function.json"), &residual);
        policy = policy_from_json(mdp, read_json(*options.artifacts / "policy.json"));
    } else {
        SolveResult r = solve(mdp, config.method, config.tol, config.max_iters);
        value = std::move(r.value);
        policy = std::move(r.policy);
        residual = r.residual;
    }
    const VerifyReport report = verify_solution(mdp, value, policy, residual);
    const fs::path dir = prepare(options);
    write_json(dir / "verify_report.json", report_to_json(report));
    for (const auto& c : report.checks) {
        out << to_string(c.status) << ' ' << c.name;
        if (!c.detail.empty()) out << ": " << c.detail;
        out << '\n';
        for (const auto& w : c.witnesses) out << "    " << w << '\n';
    }
    out << (report.passed() ? "all applicable checks passed\n" : "verification failed\n");
    return report.passed() ? kExitOk : kExitVerifyFailed;
}

int cmd_synth(const RunConfig& config, const CommandOptions& options, std::ostream& out) {
    const int train_days = config.data.synthetic.train_days;
    const auto price = split_days(synthetic_price(config), train_days);
    const fs::path dir = prepare(options);
    write_trace(dir / "price_train.csv", price.first, TraceKind::price);
    write_trace(dir / "price_eval.csv", price.second, TraceKind::price);
    const std::size_t users = max_users(config);
    for (std::size_t u = 0; u < users; ++u) {
        const auto demand = split_days(synthetic_demand(config, u), train_days);
        const std::string suffix = u == 0 ? "" : "_u" + std::to_string(u + 1);
        write_trace(dir / ("demand_train" + suffix + ".csv"), demand.first, TraceKind::demand);
        write_trace(dir / ("demand_eval" + suffix + ".csv"), demand.second, TraceKind::demand);
    }
    out << "wrote " << price.first.size() << " training and " << price.second.size() << " evaluation hours for "
        << users << (users == 1 ? " user" : " users") << '\n';
    return kExitOk;
}

}  // namespace battctl
