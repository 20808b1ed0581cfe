#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "battctl/mdp.hpp"
#include "battctl/sim.hpp"
#include "battctl/solver.hpp"
#include "battctl/thresholds.hpp"
#include "battctl/verify.hpp"

namespace battctl {

using Json = nlohmann::ordered_json;

Json states_to_json(const Mdp& mdp);
Json value_to_json(const Mdp& mdp, const SolveResult& result);
Json policy_to_json(const Mdp& mdp, const Policy& policy);
Json thresholds_to_json(const Mdp& mdp, const ThresholdTable& table);
Json report_to_json(const VerifyReport& report);
Json run_to_json(const RunResult& run, bool with_trajectory);

/// Reads tables written by value_to_json / policy_to_json back against an
/// Mdp built from the same configuration. Throws ValidationError when the
/// states or grid do not match, or a target is not a grid level.
ValueFunction value_from_json(const Mdp& mdp, const Json& doc, double* residual = nullptr);
Policy policy_from_json(const Mdp& mdp, const Json& doc);
ThresholdTable thresholds_from_json(const Json& doc);

Json read_json(const std::filesystem::path& path);
/// Writes text exactly as given (no platform newline translation).
void write_text(const std::filesystem::path& path, const std::string& text);
void write_json(const std::filesystem::path& path, const Json& doc);

}  // namespace battctl
