#include "battctl/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "battctl/error.hpp"

namespace battctl {

namespace {

constexpr double kProbTol = 1e-9;

// Sort by value, merge duplicates and drop zero-mass points.
Distribution normalize_support(const Distribution& dist) {
    std::map<double, double> merged;
    for (const auto& m : dist) merged[m.value] += m.prob;
    Distribution out;
    for (const auto& [v, p] : merged)
        if (p > 0.0) out.push_back({v, p});
    return out;
}

std::vector<double> sorted_unique(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    return v;
}

void fill_value_grids(Mdp& mdp) {
    std::vector<double> prices;
    std::vector<double> demands;
    std::vector<int> modes;
    for (const auto& s : mdp.states) {
        prices.push_back(s.price);
        demands.push_back(s.demand);
        modes.push_back(s.mode);
    }
    mdp.grids.price_levels = sorted_unique(std::move(prices));
    mdp.grids.demand_levels = sorted_unique(std::move(demands));
    std::sort(modes.begin(), modes.end());
    modes.erase(std::unique(modes.begin(), modes.end()), modes.end());
    mdp.grids.modes = std::move(modes);
}

void init_common(Mdp& mdp, const BatteryParams& params, double alpha, double battery_step) {
    params.validate();
    if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("alpha must lie in (0, 1)");
    mdp.params = params;
    mdp.alpha = alpha;
    mdp.grids.battery_step = battery_step;
    mdp.grids.battery_levels = make_battery_grid(params.b_max, battery_step);
}

}  // namespace

long snap_index(double value, double step) {
    return static_cast<long>(std::floor(value / step + 0.5 + 1e-9));
}

double snap(double value, double step) { return static_cast<double>(snap_index(value, step)) * step; }

void validate_distribution(const Distribution& dist, const char* what) {
    if (dist.empty()) throw ValidationError(std::string(what) + " distribution is empty");
    double total = 0.0;
    for (const auto& m : dist) {
        if (!(m.prob >= 0.0)) throw ValidationError(std::string(what) + " distribution has a negative probability");
        if (!std::isfinite(m.value) || m.value < 0.0)
            throw ValidationError(std::string(what) + " distribution has a negative or non-finite value");
        total += m.prob;
    }
    if (std::abs(total - 1.0) > kProbTol) {
        std::ostringstream os;
        os << what << " distribution sums to " << total << ", expected 1";
        throw ValidationError(os.str());
    }
}

std::vector<double> make_battery_grid(double b_max, double step) {
    if (!(step > 0.0)) throw ValidationError("battery step must be positive");
    const double ratio = b_max / step;
    const double count = std::round(ratio);
    if (std::abs(ratio - count) > 1e-9 * std::max(1.0, ratio) || count < 1.0) {
        std::ostringstream os;
        os << "b_max " << b_max << " is not a positive multiple of the battery step " << step;
        throw ValidationError(os.str());
    }
    std::vector<double> levels(static_cast<std::size_t>(count) + 1);
    for (std::size_t i = 0; i < levels.size(); ++i) levels[i] = static_cast<double>(i) * step;
    levels.back() = b_max;
    return levels;
}

double TransitionKernel::prob(std::size_t from, std::size_t to) const {
    for (const auto& e : row(from))
        if (e.state == to) return e.prob;
    return 0.0;
}

LevelRange Mdp::feasible_levels(std::size_t x, std::size_t i) const {
    const Interval u = control_set(params, states[x], level(i));
    const double step = grids.battery_step;
    const double n = static_cast<double>(num_levels() - 1);
    const double lo = std::clamp(std::ceil((u.lo - kEnergyTol) / step), 0.0, n);
    const double hi = std::clamp(std::floor((u.hi + kEnergyTol) / step), 0.0, n);
    return {static_cast<std::size_t>(lo), static_cast<std::size_t>(std::max(lo, hi))};
}

double Mdp::max_price() const { return grids.price_levels.empty() ? 0.0 : grids.price_levels.back(); }
double Mdp::min_price() const { return grids.price_levels.empty() ? 0.0 : grids.price_levels.front(); }
double Mdp::max_demand() const { return grids.demand_levels.empty() ? 0.0 : grids.demand_levels.back(); }

void Mdp::validate() const {
    params.validate();
    if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("alpha must lie in (0, 1)");
    if (states.empty()) throw ValidationError("decision process has no exogenous states");
    const auto& levels = grids.battery_levels;
    if (levels.empty() || levels.front() != 0.0 || levels.back() != params.b_max)
        throw ValidationError("battery grid must run from 0 to b_max");
    for (std::size_t i = 1; i < levels.size(); ++i)
        if (!(levels[i] > levels[i - 1])) throw ValidationError("battery grid must be strictly increasing");
    if (kernel.row_of.size() != states.size()) throw ValidationError("kernel does not cover every state");
    for (std::size_t r = 0; r < kernel.rows.size(); ++r) {
        double total = 0.0;
        for (const auto& e : kernel.rows[r]) {
            if (e.prob < 0.0) throw ValidationError("kernel has a negative entry");
            if (e.state >= states.size()) throw ValidationError("kernel refers to an unknown state");
            total += e.prob;
        }
        if (std::abs(total - 1.0) > kProbTol) {
            std::ostringstream os;
            os << "kernel row " << r << " sums to " << total;
            throw ValidationError(os.str());
        }
    }
    for (auto r : kernel.row_of)
        if (r >= kernel.rows.size()) throw ValidationError("kernel row index out of range");
}

Mdp build_iid(const Distribution& price, const Distribution& demand, const BatteryParams& params, double alpha,
              double battery_step) {
    validate_distribution(price, "price");
    validate_distribution(demand, "demand");
    Mdp mdp;
    init_common(mdp, params, alpha, battery_step);

    TransitionKernel::Row row;
    for (const auto& p : normalize_support(price)) {
        for (const auto& d : normalize_support(demand)) {
            row.push_back({mdp.states.size(), p.prob * d.prob});
            mdp.states.push_back({d.value, p.value, 0});
        }
    }
    mdp.kernel.rows.push_back(std::move(row));
    mdp.kernel.row_of.assign(mdp.states.size(), 0);
    fill_value_grids(mdp);
    mdp.validate();
    return mdp;
}

Mdp build_markov_prices(const std::vector<double>& price_levels, const std::vector<std::vector<double>>& transition,
                        const std::vector<Distribution>& demand, const BatteryParams& params, double alpha,
                        double battery_step) {
    const std::size_t n = price_levels.size();
    if (n == 0) throw ValidationError("no price levels");
    if (transition.size() != n) throw ValidationError("transition matrix must be square with one row per price level");
    for (std::size_t k = 0; k < n; ++k) {
        if (transition[k].size() != n)
            throw ValidationError("transition matrix must be square with one row per price level");
        double total = 0.0;
        for (double v : transition[k]) {
            if (!(v >= 0.0)) throw ValidationError("transition matrix has a negative entry");
            total += v;
        }
        if (std::abs(total - 1.0) > kProbTol) {
            std::ostringstream os;
            os << "transition matrix row " << k << " sums to " << total << ", expected 1";
            throw ValidationError(os.str());
        }
    }
    if (demand.size() != 1 && demand.size() != n)
        throw ValidationError("give one demand distribution, or one per price level");
    for (const auto& d : demand) validate_distribution(d, "demand");

    Mdp mdp;
    init_common(mdp, params, alpha, battery_step);

    std::vector<std::vector<std::size_t>> states_of_level(n);
    std::vector<Distribution> demand_of_level(n);
    for (std::size_t k = 0; k < n; ++k) {
        demand_of_level[k] = normalize_support(demand.size() == 1 ? demand[0] : demand[k]);
        for (const auto& d : demand_of_level[k]) {
            states_of_level[k].push_back(mdp.states.size());
            mdp.states.push_back({d.value, price_levels[k], 0});
            mdp.kernel.row_of.push_back(k);
        }
    }
    for (std::size_t k = 0; k < n; ++k) {
        TransitionKernel::Row row;
        for (std::size_t k2 = 0; k2 < n; ++k2) {
            if (transition[k][k2] <= 0.0) continue;
            for (std::size_t j = 0; j < demand_of_level[k2].size(); ++j)
                row.push_back({states_of_level[k2][j], transition[k][k2] * demand_of_level[k2][j].prob});
        }
        mdp.kernel.rows.push_back(std::move(row));
    }
    fill_value_grids(mdp);
    mdp.validate();
    return mdp;
}

Mdp build_hourly(const HourlyEmpirical& empirical, const BatteryParams& params, double alpha, double battery_step) {
    Mdp mdp;
    init_common(mdp, params, alpha, battery_step);

    std::array<std::vector<std::size_t>, kHoursPerDay> states_of_hour;
    std::array<std::vector<double>, kHoursPerDay> probs_of_hour;
    for (int h = 0; h < kHoursPerDay; ++h) {
        const auto& cells = empirical.hours[static_cast<std::size_t>(h)];
        if (cells.empty()) throw ValidationError("hour " + std::to_string(h) + " has no distribution");
        std::map<std::pair<double, double>, double> merged;
        double total = 0.0;
        for (const auto& c : cells) {
            if (!(c.prob >= 0.0)) throw ValidationError("hour " + std::to_string(h) + " has a negative probability");
            merged[{c.price, c.demand}] += c.prob;
            total += c.prob;
        }
        if (std::abs(total - 1.0) > kProbTol)
            throw ValidationError("hour " + std::to_string(h) + " distribution does not sum to 1");
        for (const auto& [key, p] : merged) {
            if (p <= 0.0) continue;
            states_of_hour[static_cast<std::size_t>(h)].push_back(mdp.states.size());
            probs_of_hour[static_cast<std::size_t>(h)].push_back(p);
            mdp.states.push_back({key.second, key.first, h});
            mdp.kernel.row_of.push_back(static_cast<std::size_t>(h));
        }
    }
    for (int h = 0; h < kHoursPerDay; ++h) {
        const auto next = static_cast<std::size_t>((h + 1) % kHoursPerDay);
        TransitionKernel::Row row;
        for (std::size_t j = 0; j < states_of_hour[next].size(); ++j)
            row.push_back({states_of_hour[next][j], probs_of_hour[next][j]});
        mdp.kernel.rows.push_back(std::move(row));
    }
    fill_value_grids(mdp);
    mdp.validate();
    return mdp;
}

}  // namespace battctl
