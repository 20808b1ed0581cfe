#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <vector>

#include "battctl/ingest.hpp"
#include "battctl/mdp.hpp"
#include "battctl/solver.hpp"
#include "battctl/thresholds.hpp"

namespace battctl {

struct RunResult {
    double discounted_cost = 0.0;
    double undiscounted_cost = 0.0;
    std::array<double, kHoursPerDay> per_hour_purchases{};  // mean kWh bought per hour of day
    std::vector<double> battery_trajectory;                 // level at the start of each slot, then the final level
    std::size_t operation_count = 0;                        // slots that charge or discharge
    std::size_t out_of_support = 0;                         // slots mapped to a nearby trained cell
};

/// Maps observed (price, demand, hour) to the nearest trained exogenous state:
/// same hour when the model is hour-modulated, then nearest price, then
/// nearest demand.
class StateLookup {
public:
    explicit StateLookup(const std::vector<ExogenousState>& states);

    /// Index of the nearest state; exact is set when price and demand match.
    std::size_t nearest(double price, double demand, int hour, bool* exact = nullptr) const;

private:
    const std::vector<ExogenousState>* states_;
    bool by_hour_ = false;
    std::vector<std::vector<std::size_t>> candidates_;  // per hour, or a single list
};

/// Replays the two-threshold rule on aligned traces. Throws ValidationError
/// for misaligned or empty traces, an empty table, or b0 outside [0, b_max].
RunResult replay(const ThresholdTable& table, const BatteryParams& params, const Trace& price, const Trace& demand,
                 double b0, double alpha);

/// Replays a tabulated policy, snapping the battery level to the grid. Used
/// when the threshold form is not guaranteed.
RunResult replay_policy(const Mdp& mdp, const Policy& policy, const Trace& price, const Trace& demand, double b0);

/// Cost without storage: sum of D(t) P(t) alpha^t.
double baseline(const Trace& price, const Trace& demand, double alpha);

/// Mean value per hour of day.
std::array<double, kHoursPerDay> hourly_mean(const Trace& trace);

struct TracePair {
    Trace price;
    Trace demand;
};

/// Everything needed to train and evaluate a policy on traces, apart from
/// the battery size.
struct ExperimentSetup {
    BatteryParams params;
    double alpha = 0.99;
    double battery_step = kDefaultBatteryStep;
    double price_step = kDefaultPriceStep;
    double demand_step = kDefaultBatteryStep;
    SolverMethod method = SolverMethod::policy;
    double tol = 1e-6;
    std::size_t max_iters = 1000;
    bool independent = false;
    double b0 = 0.0;
};

struct TrainedModel {
    Mdp mdp;
    SolveResult solution;
    std::optional<ThresholdTable> table;  // present when the threshold form applies
};

/// Fits the hourly model on the training traces and solves it with battery
/// size b_max.
TrainedModel train(const TracePair& data, const ExperimentSetup& setup, double b_max);

/// Replays a trained model on evaluation traces, starting from min(b0, b_max).
RunResult evaluate(const TrainedModel& model, const TracePair& data, const ExperimentSetup& setup);

/// Saturation tolerance of the size sweep, relative to the maximum savings.
inline constexpr double kSaturationTol = 1e-3;

struct SweepPoint {
    double b_max = 0.0;
    RunResult run;
    double savings = 0.0;              // 1 - cost / baseline, discounted
    double savings_undiscounted = 0.0;
    bool saturated = false;            // within kSaturationTol of the maximum savings
};

struct SweepResult {
    std::vector<SweepPoint> points;
    double baseline = 0.0;
    double baseline_undiscounted = 0.0;
    std::array<double, kHoursPerDay> baseline_per_hour{};
    double saturation_size = 0.0;  // smallest saturated size
};

/// Re-solves and replays for each battery size. Size 0 means no storage.
SweepResult size_sweep(const TracePair& train_data, const TracePair& eval_data, const std::vector<double>& sizes,
                       const ExperimentSetup& setup);

struct PoolResult {
    std::size_t users = 0;
    double cost_none = 0.0;
    double cost_individual = 0.0;
    double cost_pooled = 0.0;
    double cost_none_undiscounted = 0.0;
    double cost_individual_undiscounted = 0.0;
    double cost_pooled_undiscounted = 0.0;
};

/// n users with their own battery of size b_max versus one shared battery of
/// size n * b_max fed with the aggregate demand, under a common price.
PoolResult pool(const Trace& price_train, const Trace& price_eval, const std::vector<Trace>& demand_train,
                const std::vector<Trace>& demand_eval, double b_max, const ExperimentSetup& setup);

}  // namespace battctl
