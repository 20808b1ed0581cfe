// Command-line front end: solve, simulate, sweep, pool, verify, synth.

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>

#include "battctl/commands.hpp"
#include "battctl/error.hpp"
#include "battctl/parallel.hpp"

namespace {

using namespace battctl;

struct Overrides {
    std::string config_path;
    std::optional<double> alpha;
    std::optional<double> b_max;
    std::optional<std::uint64_t> seed;
    std::optional<double> tol;
    std::optional<std::string> method;
    std::optional<std::string> fill;
    bool independent = false;
    unsigned threads = 0;
};

RunConfig make_config(const Overrides& o) {
    RunConfig config = o.config_path.empty() ? RunConfig{} : load_config(o.config_path);
    if (o.alpha) config.alpha = *o.alpha;
    if (o.b_max) config.battery.b_max = *o.b_max;
    if (o.seed) config.seed = *o.seed;
    if (o.tol) config.tol = *o.tol;
    if (o.method) config.method = parse_solver_method(*o.method);
    if (o.fill) {
        if (*o.fill == "fail") config.data.fill = FillRule::fail;
        else if (*o.fill == "hold") config.data.fill = FillRule::hold;
        else throw ValidationError("unknown fill rule '" + *o.fill + "' (expected fail or hold)");
    }
    if (o.independent) config.data.independent = true;
    config.validate();
    return config;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Battery storage control: optimal threshold policies under time-varying prices"};
    app.require_subcommand(1);

    Overrides o;
    CommandOptions options;
    std::string out_dir = "out";
    std::string artifacts;
    std::string thresholds;

    using Command = int (*)(const RunConfig&, const CommandOptions&, std::ostream&);
    const std::vector<std::tuple<const char*, const char*, Command>> commands = {
        {"solve", "Solve the decision process and write value, policy and thresholds", cmd_solve},
        {"simulate", "Replay the optimal policy on evaluation traces", cmd_simulate},
        {"sweep", "Savings as a function of battery size", cmd_sweep},
        {"pool", "Individual batteries versus one shared battery", cmd_pool},
        {"verify", "Check structural properties of a solution", cmd_verify},
        {"synth", "Write synthetic price and demand traces", cmd_synth},
    };
    Command selected = nullptr;
    for (const auto& [name, help, fn] : commands) {
        CLI::App* sub = app.add_subcommand(name, help);
        sub->add_option("-c,--config", o.config_path, "JSON run configuration")->check(CLI::ExistingFile);
        sub->add_option("--out-dir", out_dir, "Directory for all outputs")->capture_default_str();
        sub->add_option("--alpha", o.alpha, "Discount factor, 0 < alpha < 1");
        sub->add_option("--b-max", o.b_max, "Battery capacity in kWh");
        sub->add_option("--seed", o.seed, "Seed of the synthetic generators");
        sub->add_option("--tol", o.tol, "Value iteration tolerance");
        sub->add_option("--method", o.method, "Solver: value or policy");
        sub->add_option("--threads", o.threads, "Worker thread cap (0 = hardware concurrency)");
        sub->add_option("--fill", o.fill, "Gap rule for traces: fail or hold");
        sub->add_flag("--independent", o.independent, "Factorize hourly price/demand into marginals");
        sub->add_flag("--trajectories", options.trajectories, "Include battery trajectories in JSON output");
        if (std::string(name) == "verify")
            sub->add_option("--artifacts", artifacts, "Directory holding value_function.json and policy.json")
                ->check(CLI::ExistingDirectory);
        if (std::string(name) == "simulate")
            sub->add_option("--thresholds", thresholds, "Replay this thresholds.json instead of solving")
                ->check(CLI::ExistingFile);
        sub->callback([&selected, fn = fn] { selected = fn; });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitInvalid;
    }

    try {
        set_worker_threads(o.threads);
        const RunConfig config = make_config(o);
        options.out_dir = out_dir;
        if (!artifacts.empty()) options.artifacts = artifacts;
        if (!thresholds.empty()) options.thresholds = thresholds;
        return selected(config, options, std::cout);
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitInvalid;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitInvalid;
    } catch (const ConvergenceError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitNoConvergence;
    } catch (const StructureError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitVerifyFailed;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitFailure;
    }
}
