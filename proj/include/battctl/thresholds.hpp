#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "battctl/error.hpp"
#include "battctl/mdp.hpp"
#include "battctl/solver.hpp"

namespace battctl {

/// Charge-up-to and discharge-down-to levels of one exogenous state.
struct ThresholdEntry {
    ExogenousState state;
    double beta_minus = 0.0;  // kWh
    double beta_plus = 0.0;   // kWh
    // Whether some cell of the policy charges (discharges) to exactly this
    // threshold, unclamped by the control set. Otherwise the value is only
    // pinned down by consistency with the policy.
    bool charge_identified = false;
    bool discharge_identified = false;
};

struct ThresholdTable {
    std::vector<ThresholdEntry> entries;  // one per exogenous state, in Mdp order
};

/// Two-threshold rule with control-set clamps: charge towards beta_minus when
/// at or below it, discharge towards beta_plus when at or above it.
double three_branch_target(double b, const Interval& control, double beta_minus, double beta_plus);

/// Grid version of three_branch_target (indices into the battery grid).
std::size_t three_branch_index(std::size_t i, const LevelRange& range, std::size_t beta_minus,
                               std::size_t beta_plus);

/// Reads (beta_minus, beta_plus) off a converged policy and checks that the
/// two-threshold rule reproduces every cell. Throws StructureError listing the
/// offending cells otherwise; throws PreconditionError when the threshold
/// structure is not guaranteed (replacement cost or self-discharge).
ThresholdTable extract(const Mdp& mdp, const Policy& policy);

/// Policy cells that the table does not reproduce.
std::vector<Cell> structure_violations(const Mdp& mdp, const Policy& policy, const ThresholdTable& table);

/// Left and right discrete slopes of the continuation cost G_x.
struct SubgradientProfile {
    std::vector<double> sigma_minus;  // sigma_minus[0] is -infinity (unbounded below)
    std::vector<double> sigma_plus;   // sigma_plus[last] is 0
};

SubgradientProfile subgradient_profile(const Mdp& mdp, const ValueFunction& value, std::size_t x);
/// Profile of one precomputed continuation row (see continuation()).
SubgradientProfile subgradient_profile(const std::vector<double>& continuation_row, double step);

/// Grid indices where the profile is not that of a convex non-increasing G.
std::vector<std::size_t> profile_violations(const SubgradientProfile& profile, double tol);

/// Optimal threshold intervals [beta_minus_1, beta_minus_2] and
/// [beta_plus_1, beta_plus_2] of one state, from the subgradient conditions.
struct ThresholdInterval {
    double beta_minus_1 = 0.0;
    double beta_minus_2 = 0.0;
    double beta_plus_1 = 0.0;
    double beta_plus_2 = 0.0;
};

struct SubgradientThresholds {
    std::vector<ThresholdInterval> intervals;  // per state
    ThresholdTable canonical;                  // (beta_minus_2, beta_plus_2): tops of both intervals
};

/// Default slope tolerance of the subgradient conditions.
double slope_tolerance(const Mdp& mdp);

/// Throws ConsistencyError if an interval ordering fails.
SubgradientThresholds thresholds_from_subgradients(const Mdp& mdp, const ValueFunction& value, double slope_tol);

/// States whose extracted thresholds fall outside the subgradient intervals.
/// Thresholds that are not identified are not checked.
std::vector<std::size_t> containment_violations(const SubgradientThresholds& sub, const ThresholdTable& table);

/// Zero / full-capacity threshold certificates for one state.
struct PropositionReport {
    std::size_t state = 0;
    bool certified_zero = false;
    bool certified_full = false;
    bool strict = false;           // certificate holds with margin above the tolerance
    bool max_price = false;        // p(x) = P^max
    bool low_discount = false;     // p_min > 0 and alpha < p_min / P^max
    bool agrees = true;            // certificate matches the extracted thresholds
};

/// Requires eta_c = eta_d = 1. Throws PreconditionError otherwise, and
/// ConsistencyError when a certificate contradicts the table.
std::vector<PropositionReport> check_proposition_zero_threshold(const Mdp& mdp, const ValueFunction& value,
                                                                const ThresholdTable& table);

struct MonotonicityResult {
    bool monotone = true;
    // Witness: state with lower price but strictly lower threshold.
    std::size_t cheaper_state = 0;
    std::size_t dearer_state = 0;
};

/// Thresholds must not increase with price. Refuses (PreconditionError) unless
/// the process is i.i.d. and the battery fully efficient.
MonotonicityResult check_monotonicity(const Mdp& mdp, const ThresholdTable& table);

}  // namespace battctl
