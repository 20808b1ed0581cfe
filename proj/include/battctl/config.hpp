#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "battctl/ingest.hpp"
#include "battctl/mdp.hpp"
#include "battctl/serialize.hpp"
#include "battctl/sim.hpp"
#include "battctl/solver.hpp"

namespace battctl {

enum class ModelKind { iid, markov, hourly };

/// Exogenous process given directly in the configuration (iid / markov).
struct ProcessSpec {
    ModelKind kind = ModelKind::hourly;
    Distribution price;                           // iid
    Distribution demand;                          // iid
    std::vector<double> price_levels;             // markov
    std::vector<std::vector<double>> transition;  // markov
    std::vector<Distribution> level_demand;       // markov: one per price level, or one shared
};

/// Synthetic stand-in data: a continuous run of train_days followed by
/// eval_days, split at midnight.
struct SyntheticSpec {
    int train_days = 31;
    int eval_days = 28;
    PriceProfile profile;
    double price_sigma = 0.2;
    int occupants = 4;
    double demand_noise = 0.3;
    int resolution_minutes = 60;
    std::string start = "2011-01-01T00:00";
};

struct DataSpec {
    std::optional<std::filesystem::path> price_train;
    std::optional<std::filesystem::path> price_eval;
    std::vector<std::filesystem::path> demand_train;  // one per user
    std::vector<std::filesystem::path> demand_eval;
    FillRule fill = FillRule::fail;
    bool independent = false;
    SyntheticSpec synthetic;

    bool from_files() const { return price_train.has_value(); }
};

struct RunConfig {
    BatteryParams battery;
    std::optional<double> rate_charge;
    std::optional<double> rate_discharge;
    double battery_step = kDefaultBatteryStep;
    double price_step = kDefaultPriceStep;
    double demand_step = kDefaultBatteryStep;
    double alpha = 0.99;
    SolverMethod method = SolverMethod::policy;
    double tol = 1e-6;
    std::size_t max_iters = 1000;
    ProcessSpec process;
    DataSpec data;
    double b0 = 0.0;
    std::vector<double> sweep_sizes = {0, 2, 4, 8, 16, 32};
    std::vector<int> pool_users = {1, 2, 4};
    std::uint64_t seed = 1;

    /// Throws ValidationError on out-of-range values.
    void validate() const;
};

/// Parses a configuration document. Unknown keys are rejected. Relative data
/// paths are resolved against base_dir.
RunConfig parse_config(const Json& doc, const std::filesystem::path& base_dir = {});
RunConfig load_config(const std::filesystem::path& path);

/// Battery parameters with the configured constant rate limits attached.
BatteryParams battery_params(const RunConfig& config);
ExperimentSetup experiment_setup(const RunConfig& config);

/// Training and evaluation data of one or more users sharing the price trace.
struct Dataset {
    Trace price_train;
    Trace price_eval;
    std::vector<Trace> demand_train;
    std::vector<Trace> demand_eval;
    std::size_t clamp_warnings = 0;
    std::size_t filled_samples = 0;
};

/// Loads or synthesizes data for the given number of users, rounded to the
/// configured grids.
Dataset load_dataset(const RunConfig& config, std::size_t users);

/// Synthetic traces before rounding (raw generator output) for user u.
Trace synthetic_price(const RunConfig& config);
Trace synthetic_demand(const RunConfig& config, std::size_t user);
/// Splits a trace at train_days.
std::pair<Trace, Trace> split_days(const Trace& trace, int train_days);

/// Decision process for configs with an explicit process, or the hourly
/// model fitted on the training data of user 0.
Mdp build_model(const RunConfig& config);

}  // namespace battctl
