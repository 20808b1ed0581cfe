#pragma once

#include <string>
#include <vector>

#include "battctl/mdp.hpp"
#include "battctl/solver.hpp"

namespace battctl {

enum class CheckStatus { pass, fail, skipped };

const char* to_string(CheckStatus status);

struct CheckOutcome {
    std::string name;
    CheckStatus status = CheckStatus::pass;
    std::string detail;
    std::vector<std::string> witnesses;
};

struct VerifyReport {
    std::vector<CheckOutcome> checks;
    bool passed() const;
};

/// Runs every structural check that applies to the solution: value bounds,
/// monotone/convex value function, policy feasibility, two-threshold form,
/// equal thresholds for an efficient battery, subgradient intervals,
/// zero-threshold certificates and price monotonicity. residual is the
/// solver's last Bellman update, used to widen slope tolerances.
VerifyReport verify_solution(const Mdp& mdp, const ValueFunction& value, const Policy& policy, double residual);

}  // namespace battctl
