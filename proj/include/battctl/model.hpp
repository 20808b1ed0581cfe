#pragma once

#include <functional>
#include <optional>

namespace battctl {

/// Bound on energy moved per slot as a function of the current battery level.
using RateLimit = std::function<double(double)>;

/// Geometric-lifetime replacement charge: each charge or discharge slot costs
/// q * cost in expectation.
struct Replacement {
    double q = 0.0;
    double cost = 0.0;
};

struct BatteryParams {
    double b_max = 16.0;
    double eta_c = 1.0;
    double eta_d = 1.0;
    RateLimit rate_charge;     // empty means unbounded
    RateLimit rate_discharge;  // empty means unbounded
    double xi = 1.0;           // fraction of stored energy retained per slot
    std::optional<Replacement> replacement;

    /// Throws ValidationError when a field is out of range.
    void validate() const;

    double max_charge(double b) const;
    double max_discharge(double b) const;

    bool efficient() const { return eta_c == 1.0 && eta_d == 1.0; }
    bool has_rate_limits() const { return static_cast<bool>(rate_charge) || static_cast<bool>(rate_discharge); }
    /// True when the convexity and threshold results apply (no replacement
    /// term, no self-discharge).
    bool threshold_structure_applies() const { return !replacement && xi == 1.0; }
};

struct ExogenousState {
    double demand = 0.0;  // kWh in the slot
    double price = 0.0;   // per kWh
    int mode = 0;         // modulating state, e.g. hour of day
};

/// Energy flows in one slot: grid to user, grid to battery, battery discharge.
struct Action {
    double a1 = 0.0;
    double a2 = 0.0;
    double a3 = 0.0;
};

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
    bool contains(double v, double tol = 0.0) const { return v >= lo - tol && v <= hi + tol; }
};

/// Absolute tolerance (kWh) used for feasibility comparisons.
inline constexpr double kEnergyTol = 1e-9;

/// Battery level after self-discharge, before any purchase or discharge.
inline double retained_level(const BatteryParams& params, double b) { return params.xi * b; }

/// Feasible next battery levels from level b in state x.
Interval control_set(const BatteryParams& params, const ExogenousState& x, double b);

/// Action that moves the battery from b to beta. Throws PreconditionError
/// when beta is outside the control set.
Action decompose(const BatteryParams& params, const ExogenousState& x, double b, double beta);

/// Cost of the slot when the battery level changes by delta relative to the
/// retained level.
double immediate_cost(const BatteryParams& params, const ExogenousState& x, double delta);

/// Next battery level. Throws DynamicsError if it leaves [0, b_max].
double step(const BatteryParams& params, double b, const Action& action);

}  // namespace battctl
