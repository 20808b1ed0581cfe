#include "battctl/thresholds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>

#include "battctl/error.hpp"

namespace battctl {

namespace {

std::size_t level_index(const Mdp& mdp, double level) {
    const long k = snap_index(level, mdp.grids.battery_step);
    return static_cast<std::size_t>(std::clamp(k, 0L, static_cast<long>(mdp.num_levels()) - 1));
}

void require_structure(const Mdp& mdp, const char* what) {
    if (!mdp.params.threshold_structure_applies())
        throw PreconditionError(std::string(what) +
                                " requires a convex immediate cost and no self-discharge "
                                "(replacement cost or xi < 1 configured)");
}

}  // namespace

SubgradientProfile subgradient_profile(const std::vector<double>& g, double step) {
    const std::size_t n = g.size();
    SubgradientProfile p;
    p.sigma_minus.resize(n);
    p.sigma_plus.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        p.sigma_minus[i] = i == 0 ? -std::numeric_limits<double>::infinity() : (g[i] - g[i - 1]) / step;
        p.sigma_plus[i] = i + 1 == n ? 0.0 : (g[i + 1] - g[i]) / step;
    }
    return p;
}

namespace {

std::string describe_cells(const std::vector<Cell>& cells) {
    std::ostringstream os;
    const std::size_t shown = std::min<std::size_t>(cells.size(), 8);
    for (std::size_t k = 0; k < shown; ++k) os << (k ? ", " : "") << "(x=" << cells[k].state << ", b#" << cells[k].level << ")";
    if (cells.size() > shown) os << ", ... (" << cells.size() << " total)";
    return os.str();
}

}  // namespace

double three_branch_target(double b, const Interval& control, double beta_minus, double beta_plus) {
    if (b <= beta_minus) return std::min(beta_minus, control.hi);
    if (b >= beta_plus) return std::max(beta_plus, control.lo);
    return b;
}

std::size_t three_branch_index(std::size_t i, const LevelRange& range, std::size_t beta_minus,
                               std::size_t beta_plus) {
    if (i <= beta_minus) return std::min(beta_minus, range.hi);
    if (i >= beta_plus) return std::max(beta_plus, range.lo);
    return i;
}

ThresholdTable extract(const Mdp& mdp, const Policy& policy) {
    require_structure(mdp, "threshold extraction");
    const std::size_t n = mdp.num_levels();
    if (policy.num_states() != mdp.num_states() || policy.num_levels() != n)
        throw PreconditionError("policy table does not match the decision process");

    ThresholdTable table;
    std::vector<Cell> bad;
    for (std::size_t x = 0; x < mdp.num_states(); ++x) {
        std::optional<std::size_t> charge_to;
        std::optional<std::size_t> discharge_to;
        bool charge_identified = false;
        bool discharge_identified = false;
        std::optional<std::size_t> first_chargeable;
        std::optional<std::size_t> last_dischargeable;
        for (std::size_t i = 0; i < n; ++i) {
            const LevelRange r = mdp.feasible_levels(x, i);
            const std::size_t t = policy(x, i);
            if (r.hi > i && !first_chargeable) first_chargeable = i;
            if (r.lo < i) last_dischargeable = i;
            if (t > i) {
                charge_to = std::max(charge_to.value_or(0), t);
                charge_identified = charge_identified || t < r.hi || t + 1 == n;
            } else if (t < i) {
                discharge_to = std::min(discharge_to.value_or(n - 1), t);
                discharge_identified = discharge_identified || t > r.lo || t == 0;
            }
        }

        // A threshold never acted on is set to the value nearest its partner
        // that still reproduces the policy.
        std::size_t lower = 0;
        if (charge_to) {
            lower = *charge_to;
        } else {
            lower = first_chargeable.value_or(n - 1);
            if (discharge_to) lower = std::min(lower, *discharge_to);
        }
        std::size_t upper = 0;
        if (discharge_to) {
            upper = *discharge_to;
        } else {
            upper = last_dischargeable ? std::max(lower, *last_dischargeable) : lower;
        }

        if (lower > upper) {
            for (std::size_t i = 0; i < n; ++i)
                if (policy(x, i) != i) bad.push_back({x, i});
        } else {
            for (std::size_t i = 0; i < n; ++i)
                if (three_branch_index(i, mdp.feasible_levels(x, i), lower, upper) != policy(x, i))
                    bad.push_back({x, i});
        }
        table.entries.push_back(
            {mdp.states[x], mdp.level(lower), mdp.level(upper), charge_identified, discharge_identified});
    }
    if (!bad.empty())
        throw StructureError("policy is not of two-threshold form at " + describe_cells(bad), std::move(bad));
    return table;
}

std::vector<Cell> structure_violations(const Mdp& mdp, const Policy& policy, const ThresholdTable& table) {
    if (table.entries.size() != mdp.num_states())
        throw PreconditionError("threshold table does not match the decision process");
    std::vector<Cell> bad;
    for (std::size_t x = 0; x < mdp.num_states(); ++x) {
        const auto lower = level_index(mdp, table.entries[x].beta_minus);
        const auto upper = level_index(mdp, table.entries[x].beta_plus);
        for (std::size_t i = 0; i < mdp.num_levels(); ++i)
            if (three_branch_index(i, mdp.feasible_levels(x, i), lower, upper) != policy(x, i)) bad.push_back({x, i});
    }
    return bad;
}

SubgradientProfile subgradient_profile(const Mdp& mdp, const ValueFunction& value, std::size_t x) {
    const auto cont = continuation(mdp, value);
    return subgradient_profile(cont[mdp.kernel.row_of[x]], mdp.grids.battery_step);
}

std::vector<std::size_t> profile_violations(const SubgradientProfile& profile, double tol) {
    std::vector<std::size_t> bad;
    const std::size_t n = profile.sigma_plus.size();
    for (std::size_t i = 0; i < n; ++i) {
        bool ok = profile.sigma_minus[i] <= profile.sigma_plus[i] + tol && profile.sigma_plus[i] <= tol;
        if (i > 0) {
            ok = ok && profile.sigma_plus[i] >= profile.sigma_plus[i - 1] - tol;
            ok = ok && profile.sigma_minus[i] >= profile.sigma_minus[i - 1] - tol;
        }
        if (!ok) bad.push_back(i);
    }
    return bad;
}

double slope_tolerance(const Mdp& mdp) { return 1e-9 * std::max(1.0, mdp.max_price()); }

SubgradientThresholds thresholds_from_subgradients(const Mdp& mdp, const ValueFunction& value, double slope_tol) {
    require_structure(mdp, "subgradient thresholds");
    const auto cont = continuation(mdp, value);
    const std::size_t n = mdp.num_levels();
    const double alpha = mdp.alpha;
    const auto& params = mdp.params;

    SubgradientThresholds out;
    for (std::size_t x = 0; x < mdp.num_states(); ++x) {
        const auto prof = subgradient_profile(cont[mdp.kernel.row_of[x]], mdp.grids.battery_step);
        const double p = mdp.states[x].price;
        const double charge_slope = p / params.eta_c;
        const double discharge_slope = params.eta_d * p;

        // min{i : s + alpha*sigma_plus(i) >= 0} and max{i : s + alpha*sigma_minus(i) <= 0}
        auto first_right = [&](double s) {
            for (std::size_t i = 0; i < n; ++i)
                if (s + alpha * prof.sigma_plus[i] >= -slope_tol) return i;
            return n - 1;
        };
        auto last_left = [&](double s) {
            for (std::size_t i = n; i-- > 0;)
                if (s + alpha * prof.sigma_minus[i] <= slope_tol) return i;
            return std::size_t{0};
        };
        const std::size_t m1 = first_right(charge_slope);
        const std::size_t m2 = last_left(charge_slope);
        const std::size_t p1 = first_right(discharge_slope);
        const std::size_t p2 = last_left(discharge_slope);

        bool ordered = m1 <= m2 && p1 <= p2 && m1 <= p1 && m2 <= p2;
        // The middle link needs a strict gap between the two slopes; with a
        // fully efficient battery the two intervals coincide instead.
        if (p * (1.0 / params.eta_c - params.eta_d) > 2.0 * slope_tol / alpha) ordered = ordered && m2 <= p1;
        if (!ordered) {
            std::ostringstream os;
            os << "threshold interval ordering violated in state " << x << ": [" << mdp.level(m1) << ", "
               << mdp.level(m2) << "] vs [" << mdp.level(p1) << ", " << mdp.level(p2) << "]";
            throw ConsistencyError(os.str());
        }
        out.intervals.push_back({mdp.level(m1), mdp.level(m2), mdp.level(p1), mdp.level(p2)});
        out.canonical.entries.push_back({mdp.states[x], mdp.level(m2), mdp.level(p2), true, true});
    }
    return out;
}

std::vector<std::size_t> containment_violations(const SubgradientThresholds& sub, const ThresholdTable& table) {
    std::vector<std::size_t> bad;
    for (std::size_t x = 0; x < table.entries.size(); ++x) {
        const auto& e = table.entries[x];
        const auto& iv = sub.intervals[x];
        const bool lower_ok = !e.charge_identified ||
                              (e.beta_minus >= iv.beta_minus_1 - kEnergyTol && e.beta_minus <= iv.beta_minus_2 + kEnergyTol);
        const bool upper_ok = !e.discharge_identified ||
                              (e.beta_plus >= iv.beta_plus_1 - kEnergyTol && e.beta_plus <= iv.beta_plus_2 + kEnergyTol);
        if (!lower_ok || !upper_ok) bad.push_back(x);
    }
    return bad;
}

std::vector<PropositionReport> check_proposition_zero_threshold(const Mdp& mdp, const ValueFunction& value,
                                                                const ThresholdTable& table) {
    if (!mdp.params.efficient() || !mdp.params.threshold_structure_applies())
        throw PreconditionError("zero-threshold certificates need eta_c = eta_d = 1 and no extensions");
    if (table.entries.size() != mdp.num_states())
        throw PreconditionError("threshold table does not match the decision process");

    const std::size_t n = mdp.num_levels();
    // Extreme value of (J_y(b1) - J_y(b2)) / (b2 - b1) over all y and b1 < b2.
    double max_slope = -std::numeric_limits<double>::infinity();
    double min_slope = std::numeric_limits<double>::infinity();
    for (std::size_t y = 0; y < mdp.num_states(); ++y) {
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = i + 1; j < n; ++j) {
                const double s = (value(y, i) - value(y, j)) / (mdp.level(j) - mdp.level(i));
                max_slope = std::max(max_slope, s);
                min_slope = std::min(min_slope, s);
            }
        }
    }
    const double tol = convexity_tolerance(mdp);
    const double p_max = mdp.max_price();
    const double p_min = mdp.min_price();
    const double b_max = mdp.params.b_max;

    std::vector<PropositionReport> out;
    std::vector<std::size_t> contradictions;
    for (std::size_t x = 0; x < mdp.num_states(); ++x) {
        PropositionReport r;
        r.state = x;
        const double bound = mdp.states[x].price / mdp.alpha;
        r.certified_zero = max_slope <= bound + tol;
        r.certified_full = min_slope >= bound - tol;
        r.strict = (r.certified_zero && max_slope < bound - tol) || (r.certified_full && min_slope > bound + tol);
        r.max_price = mdp.states[x].price == p_max;
        r.low_discount = p_min > 0.0 && mdp.alpha < p_min / p_max;

        // Only certificates clear of the tolerance band pin the thresholds;
        // on the boundary zero or b_max is merely one optimum among several.
        const auto& e = table.entries[x];
        if (r.strict && r.certified_zero)
            r.agrees = e.beta_minus <= kEnergyTol && e.beta_plus <= kEnergyTol;
        if (r.strict && r.certified_full)
            r.agrees = e.beta_minus >= b_max - kEnergyTol && e.beta_plus >= b_max - kEnergyTol;
        if (!r.agrees) contradictions.push_back(x);
        out.push_back(r);
    }
    if (!contradictions.empty()) {
        std::ostringstream os;
        os << "threshold certificate contradicts the extracted thresholds in state " << contradictions.front();
        if (contradictions.size() > 1) os << " and " << contradictions.size() - 1 << " more";
        throw ConsistencyError(os.str());
    }
    return out;
}

MonotonicityResult check_monotonicity(const Mdp& mdp, const ThresholdTable& table) {
    if (!mdp.is_iid())
        throw PreconditionError(
            "threshold monotonicity in price only holds for i.i.d. prices and demands; "
            "with Markov prices a cheap state may still prefer a low threshold");
    if (!mdp.params.efficient()) throw PreconditionError("threshold monotonicity check needs eta_c = eta_d = 1");
    if (table.entries.size() != mdp.num_states())
        throw PreconditionError("threshold table does not match the decision process");
    MonotonicityResult out;
    for (std::size_t a = 0; a < table.entries.size(); ++a) {
        for (std::size_t b = 0; b < table.entries.size(); ++b) {
            const auto& cheap = table.entries[a];
            const auto& dear = table.entries[b];
            if (cheap.state.price < dear.state.price && cheap.beta_minus < dear.beta_minus - kEnergyTol) {
                out.monotone = false;
                out.cheaper_state = a;
                out.dearer_state = b;
                return out;
            }
        }
    }
    return out;
}

}  // namespace battctl
