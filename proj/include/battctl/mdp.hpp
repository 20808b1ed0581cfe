#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "battctl/model.hpp"

namespace battctl {

inline constexpr double kDefaultBatteryStep = 0.5;  // kWh
inline constexpr double kDefaultPriceStep = 5.0;    // ct
inline constexpr int kHoursPerDay = 24;

/// Index of the grid cell nearest to value; half-way values round up.
long snap_index(double value, double step);
double snap(double value, double step);

/// One support point of a discrete distribution.
struct Mass {
    double value = 0.0;
    double prob = 0.0;
};
using Distribution = std::vector<Mass>;

/// Throws ValidationError unless probabilities are non-negative and sum to 1.
void validate_distribution(const Distribution& dist, const char* what);

/// One (price, demand) cell of a joint distribution.
struct JointMass {
    double price = 0.0;
    double demand = 0.0;
    double prob = 0.0;
};

/// Per hour-of-day joint distribution of price and demand.
struct HourlyEmpirical {
    std::array<std::vector<JointMass>, kHoursPerDay> hours;
};

struct Grids {
    std::vector<double> battery_levels;
    double battery_step = kDefaultBatteryStep;
    std::vector<double> price_levels;
    std::vector<double> demand_levels;
    std::vector<int> modes;
};

/// Uniform grid 0, step, ..., b_max. b_max must be a multiple of step.
std::vector<double> make_battery_grid(double b_max, double step);

/// Sparse discretized transition kernel. States with the same outgoing
/// distribution share one row.
struct TransitionKernel {
    struct Entry {
        std::size_t state = 0;
        double prob = 0.0;
    };
    using Row = std::vector<Entry>;

    std::vector<Row> rows;
    std::vector<std::size_t> row_of;  // per state

    const Row& row(std::size_t state) const { return rows[row_of[state]]; }
    /// Probability of moving from one state to another.
    double prob(std::size_t from, std::size_t to) const;
};

/// Grid index range of feasible next battery levels.
struct LevelRange {
    std::size_t lo = 0;
    std::size_t hi = 0;
};

struct Mdp {
    BatteryParams params;
    Grids grids;
    TransitionKernel kernel;
    double alpha = 0.9;
    std::vector<ExogenousState> states;

    std::size_t num_states() const { return states.size(); }
    std::size_t num_levels() const { return grids.battery_levels.size(); }
    double level(std::size_t i) const { return grids.battery_levels[i]; }

    /// Control set of state x at grid level i, restricted to grid points.
    LevelRange feasible_levels(std::size_t x, std::size_t i) const;

    double max_price() const;
    double min_price() const;
    double max_demand() const;

    /// True when every state has the same outgoing distribution.
    bool is_iid() const { return kernel.rows.size() == 1; }

    /// Full consistency check; throws ValidationError.
    void validate() const;
};

Mdp build_iid(const Distribution& price, const Distribution& demand, const BatteryParams& params, double alpha,
              double battery_step = kDefaultBatteryStep);

/// Prices follow a Markov chain on price_levels; demand is drawn independently
/// each slot from demand[k] when at price level k (or demand[0] for all
/// levels when only one distribution is given).
Mdp build_markov_prices(const std::vector<double>& price_levels, const std::vector<std::vector<double>>& transition,
                        const std::vector<Distribution>& demand, const BatteryParams& params, double alpha,
                        double battery_step = kDefaultBatteryStep);

/// Hour of day as modulating state; the next slot's (price, demand) is drawn
/// from the next hour's distribution regardless of the current cell.
Mdp build_hourly(const HourlyEmpirical& empirical, const BatteryParams& params, double alpha,
                 double battery_step = kDefaultBatteryStep);

}  // namespace battctl
