#include "battctl/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "battctl/error.hpp"

namespace battctl {

void BatteryParams::validate() const {
    auto fail = [](const std::string& msg) { throw ValidationError("battery: " + msg); };
    if (!(b_max > 0.0) || !std::isfinite(b_max)) fail("b_max must be positive and finite");
    if (!(eta_c > 0.0 && eta_c <= 1.0)) fail("eta_c must lie in (0, 1]");
    if (!(eta_d > 0.0 && eta_d <= 1.0)) fail("eta_d must lie in (0, 1]");
    if (!(xi > 0.0 && xi <= 1.0)) fail("xi must lie in (0, 1]");
    if (replacement) {
        if (!(replacement->q >= 0.0 && replacement->q <= 1.0)) fail("replacement q must lie in [0, 1]");
        if (!(replacement->cost >= 0.0)) fail("replacement cost must be non-negative");
    }
    for (double b : {0.0, 0.5 * b_max, b_max}) {
        if (max_charge(b) < 0.0) fail("rate_charge must be non-negative");
        if (max_discharge(b) < 0.0) fail("rate_discharge must be non-negative");
    }
}

double BatteryParams::max_charge(double b) const {
    return rate_charge ? rate_charge(b) : std::numeric_limits<double>::infinity();
}

double BatteryParams::max_discharge(double b) const {
    return rate_discharge ? rate_discharge(b) : std::numeric_limits<double>::infinity();
}

Interval control_set(const BatteryParams& params, const ExogenousState& x, double b) {
    const double base = retained_level(params, b);
    const double lo = std::max({0.0, base - x.demand / params.eta_d, base - params.max_discharge(b)});
    const double hi = std::min(params.b_max, base + params.max_charge(b) * params.eta_c);
    return {lo, hi};
}

Action decompose(const BatteryParams& params, const ExogenousState& x, double b, double beta) {
    const Interval u = control_set(params, x, b);
    if (beta < u.lo - kEnergyTol || beta > u.hi + kEnergyTol) {
        std::ostringstream os;
        os << "target level " << beta << " kWh violates the ";
        if (beta < u.lo) {
            if (beta < 0.0)
                os << "lower capacity bound 0";
            else if (u.lo == retained_level(params, b) - params.max_discharge(b))
                os << "discharge rate bound " << u.lo;
            else
                os << "demand bound " << u.lo;
        } else {
            if (beta > params.b_max)
                os << "capacity bound " << params.b_max;
            else
                os << "charge rate bound " << u.hi;
        }
        throw PreconditionError(os.str());
    }
    const double base = retained_level(params, b);
    Action a;
    if (beta > base) {
        a.a2 = (beta - base) / params.eta_c;
        a.a1 = x.demand;
    } else if (beta < base) {
        a.a3 = base - beta;
        a.a1 = std::max(0.0, x.demand - params.eta_d * a.a3);
    } else {
        a.a1 = x.demand;
    }
    return a;
}

double immediate_cost(const BatteryParams& params, const ExogenousState& x, double delta) {
    const double charge = std::max(delta, 0.0) / params.eta_c;
    const double discharge = params.eta_d * std::max(-delta, 0.0);
    double cost = (x.demand + charge - discharge) * x.price;
    if (params.replacement && delta != 0.0) cost += params.replacement->q * params.replacement->cost;
    return cost;
}

double step(const BatteryParams& params, double b, const Action& action) {
    const double next = retained_level(params, b) + params.eta_c * action.a2 - action.a3;
    if (next < -kEnergyTol || next > params.b_max + kEnergyTol) {
        std::ostringstream os;
        os << "battery level " << next << " kWh outside [0, " << params.b_max << "]";
        throw DynamicsError(os.str());
    }
    return std::clamp(next, 0.0, params.b_max);
}

}  // namespace battctl
