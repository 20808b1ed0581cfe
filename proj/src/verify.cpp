#include "battctl/verify.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>

#include "battctl/error.hpp"
#include "battctl/thresholds.hpp"

namespace battctl {

namespace {

constexpr std::size_t kMaxWitnesses = 10;

std::string describe_state(const Mdp& mdp, std::size_t x) {
    const auto& s = mdp.states[x];
    std::ostringstream os;
    os << "x=" << x << " (mode " << s.mode << ", price " << s.price << ", demand " << s.demand << ")";
    return os.str();
}

std::string describe_cell(const Mdp& mdp, const Policy& policy, const Cell& c) {
    std::ostringstream os;
    os << describe_state(mdp, c.state) << " b=" << mdp.level(c.level) << " kWh -> target "
       << mdp.level(policy(c.state, c.level)) << " kWh";
    return os.str();
}

CheckOutcome skipped(std::string name, std::string why) {
    return {std::move(name), CheckStatus::skipped, std::move(why), {}};
}

void add_witness(CheckOutcome& out, std::string w) {
    out.status = CheckStatus::fail;
    if (out.witnesses.size() < kMaxWitnesses) out.witnesses.push_back(std::move(w));
}

}  // namespace

const char* to_string(CheckStatus status) {
    switch (status) {
        case CheckStatus::pass: return "pass";
        case CheckStatus::fail: return "fail";
        case CheckStatus::skipped: return "skipped";
    }
    return "unknown";
}

bool VerifyReport::passed() const {
    return std::none_of(checks.begin(), checks.end(), [](const CheckOutcome& c) { return c.status == CheckStatus::fail; });
}

VerifyReport verify_solution(const Mdp& mdp, const ValueFunction& value, const Policy& policy, double residual) {
    if (value.num_states() != mdp.num_states() || value.num_levels() != mdp.num_levels() ||
        policy.num_states() != mdp.num_states() || policy.num_levels() != mdp.num_levels())
        throw ValidationError("solution tables do not match the decision process");

    VerifyReport report;
    const bool structured = mdp.params.threshold_structure_applies();
    const std::string non_convex = "skipped (non-convex immediate cost or self-discharge)";

    {
        CheckOutcome c{"value_bounds", CheckStatus::pass, "0 <= J <= bound", {}};
        const double bound = value_bound(mdp) + 1e-9 * std::max(1.0, value_bound(mdp));
        for (std::size_t x = 0; x < mdp.num_states(); ++x)
            for (std::size_t i = 0; i < mdp.num_levels(); ++i)
                if (value(x, i) < -1e-9 || value(x, i) > bound)
                    add_witness(c, describe_state(mdp, x) + " b#" + std::to_string(i));
        report.checks.push_back(std::move(c));
    }

    {
        CheckOutcome c{"policy_feasible", CheckStatus::pass, "targets inside the control set", {}};
        for (std::size_t x = 0; x < mdp.num_states(); ++x) {
            for (std::size_t i = 0; i < mdp.num_levels(); ++i) {
                const LevelRange r = mdp.feasible_levels(x, i);
                const std::size_t t = policy(x, i);
                if (t < r.lo || t > r.hi) add_witness(c, describe_cell(mdp, policy, {x, i}));
            }
        }
        report.checks.push_back(std::move(c));
    }

    if (!structured) {
        for (const char* name : {"value_shape", "threshold_structure", "equal_thresholds", "subgradient_profile",
                                 "subgradient_intervals", "zero_threshold_certificates", "monotone_in_price"})
            report.checks.push_back(skipped(name, non_convex));
        return report;
    }

    {
        CheckOutcome c{"value_shape", CheckStatus::pass, "J non-increasing and discretely convex in b", {}};
        const double tol = convexity_tolerance(mdp) + 2.0 * residual;
        for (const auto& v : shape_violations(mdp, value, tol)) {
            std::ostringstream os;
            os << describe_state(mdp, v.state) << " b#" << v.level << ' ' << v.kind << " by " << v.amount;
            add_witness(c, os.str());
        }
        report.checks.push_back(std::move(c));
    }

    std::optional<ThresholdTable> table;
    {
        CheckOutcome c{"threshold_structure", CheckStatus::pass, "policy reproduced by (beta-, beta+) on every cell", {}};
        try {
            table = extract(mdp, policy);
        } catch (const StructureError& e) {
            c.detail = e.what();
            for (const auto& cell : e.cells()) add_witness(c, describe_cell(mdp, policy, cell));
        }
        report.checks.push_back(std::move(c));
    }

    if (!mdp.params.efficient()) {
        report.checks.push_back(skipped("equal_thresholds", "skipped (battery not fully efficient)"));
    } else if (!table) {
        report.checks.push_back(skipped("equal_thresholds", "skipped (no threshold table)"));
    } else {
        CheckOutcome c{"equal_thresholds", CheckStatus::pass, "beta- = beta+ for a fully efficient battery", {}};
        for (std::size_t x = 0; x < mdp.num_states(); ++x) {
            const auto& e = table->entries[x];
            if (std::abs(e.beta_minus - e.beta_plus) > kEnergyTol) {
                std::ostringstream os;
                os << describe_state(mdp, x) << " beta-=" << e.beta_minus << " beta+=" << e.beta_plus;
                add_witness(c, os.str());
            }
        }
        report.checks.push_back(std::move(c));
    }

    // Value iteration hands back a policy greedy for the previous iterate;
    // widen slope tolerances by what that lag can move a slope.
    const double slope_tol =
        slope_tolerance(mdp) + 4.0 * mdp.alpha * residual / mdp.grids.battery_step;
    {
        CheckOutcome c{"subgradient_profile", CheckStatus::pass, "sigma- <= sigma+ <= 0, both non-decreasing", {}};
        const auto cont = continuation(mdp, value);
        for (std::size_t x = 0; x < mdp.num_states(); ++x) {
            const auto prof = subgradient_profile(cont[mdp.kernel.row_of[x]], mdp.grids.battery_step);
            const auto bad = profile_violations(prof, slope_tol);
            if (!bad.empty()) add_witness(c, describe_state(mdp, x) + " b#" + std::to_string(bad.front()));
        }
        report.checks.push_back(std::move(c));
    }

    {
        CheckOutcome c{"subgradient_intervals", CheckStatus::pass,
                       "interval ordering holds and extracted thresholds lie inside the optimal intervals", {}};
        try {
            const auto sub = thresholds_from_subgradients(mdp, value, slope_tol);
            if (table) {
                for (auto x : containment_violations(sub, *table)) {
                    const auto& iv = sub.intervals[x];
                    const auto& e = table->entries[x];
                    std::ostringstream os;
                    os << describe_state(mdp, x) << " beta-=" << e.beta_minus << " not in [" << iv.beta_minus_1 << ", "
                       << iv.beta_minus_2 << "] or beta+=" << e.beta_plus << " not in [" << iv.beta_plus_1 << ", "
                       << iv.beta_plus_2 << "]";
                    add_witness(c, os.str());
                }
            }
        } catch (const ConsistencyError& e) {
            add_witness(c, e.what());
        }
        report.checks.push_back(std::move(c));
    }

    if (!mdp.params.efficient() || !table) {
        report.checks.push_back(skipped("zero_threshold_certificates", "skipped (needs eta_c = eta_d = 1)"));
    } else {
        CheckOutcome c{"zero_threshold_certificates", CheckStatus::pass, "", {}};
        try {
            const auto props = check_proposition_zero_threshold(mdp, value, *table);
            std::size_t zero = 0;
            std::size_t full = 0;
            for (const auto& r : props) {
                zero += r.certified_zero;
                full += r.certified_full;
                // Sufficient conditions for a zero threshold must be certified.
                if ((r.max_price || r.low_discount) && !r.certified_zero)
                    add_witness(c, describe_state(mdp, r.state) + " meets a zero-threshold condition but is not certified");
            }
            c.detail = std::to_string(zero) + " states certified zero, " + std::to_string(full) + " certified full";
        } catch (const ConsistencyError& e) {
            add_witness(c, e.what());
        }
        report.checks.push_back(std::move(c));
    }

    if (!table) {
        report.checks.push_back(skipped("monotone_in_price", "skipped (no threshold table)"));
    } else {
        try {
            const auto mono = check_monotonicity(mdp, *table);
            CheckOutcome c{"monotone_in_price", CheckStatus::pass, "thresholds non-increasing in price", {}};
            if (!mono.monotone)
                add_witness(c, describe_state(mdp, mono.cheaper_state) + " below " + describe_state(mdp, mono.dearer_state));
            report.checks.push_back(std::move(c));
        } catch (const PreconditionError& e) {
            report.checks.push_back(skipped("monotone_in_price", std::string("skipped (") + e.what() + ")"));
        }
    }
    return report;
}

}  // namespace battctl
