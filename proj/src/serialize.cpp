#include "battctl/serialize.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "battctl/error.hpp"

namespace battctl {

namespace {

Json state_json(const ExogenousState& s) {
    return Json{{"mode", s.mode}, {"price", s.price}, {"demand_kwh", s.demand}};
}

const Json& field(const Json& doc, const char* key) {
    if (!doc.is_object() || !doc.contains(key)) throw ValidationError(std::string("artifact is missing '") + key + "'");
    return doc.at(key);
}

double number(const Json& v, const char* what) {
    if (!v.is_number()) throw ValidationError(std::string("artifact field '") + what + "' must be a number");
    return v.get<double>();
}

void check_states(const Mdp& mdp, const Json& doc) {
    const Json& levels = field(doc, "battery_levels_kwh");
    const Json& states = field(doc, "states");
    if (!levels.is_array() || levels.size() != mdp.num_levels())
        throw ValidationError("artifact battery grid does not match the configuration");
    for (std::size_t i = 0; i < mdp.num_levels(); ++i)
        if (std::abs(number(levels[i], "battery_levels_kwh") - mdp.level(i)) > kEnergyTol)
            throw ValidationError("artifact battery grid does not match the configuration");
    if (!states.is_array() || states.size() != mdp.num_states())
        throw ValidationError("artifact states do not match the configuration");
    for (std::size_t x = 0; x < mdp.num_states(); ++x) {
        const auto& s = mdp.states[x];
        const Json& j = states[x];
        if (field(j, "mode").get<int>() != s.mode || std::abs(number(field(j, "price"), "price") - s.price) > 1e-9 ||
            std::abs(number(field(j, "demand_kwh"), "demand_kwh") - s.demand) > 1e-9)
            throw ValidationError("artifact state " + std::to_string(x) + " does not match the configuration");
    }
}

const Json& table_rows(const Mdp& mdp, const Json& doc, const char* key) {
    const Json& rows = field(doc, key);
    if (!rows.is_array() || rows.size() != mdp.num_states())
        throw ValidationError(std::string("artifact '") + key + "' has the wrong number of rows");
    for (const auto& r : rows)
        if (!r.is_array() || r.size() != mdp.num_levels())
            throw ValidationError(std::string("artifact '") + key + "' has a row of the wrong length");
    return rows;
}

}  // namespace

Json states_to_json(const Mdp& mdp) {
    Json out = Json::array();
    for (const auto& s : mdp.states) out.push_back(state_json(s));
    return out;
}

Json value_to_json(const Mdp& mdp, const SolveResult& result) {
    Json rows = Json::array();
    for (std::size_t x = 0; x < mdp.num_states(); ++x) {
        Json row = Json::array();
        for (std::size_t i = 0; i < mdp.num_levels(); ++i) row.push_back(result.value(x, i));
        rows.push_back(std::move(row));
    }
    return Json{{"alpha", mdp.alpha},
                {"iterations", result.iterations},
                {"residual", result.residual},
                {"battery_levels_kwh", mdp.grids.battery_levels},
                {"states", states_to_json(mdp)},
                {"values", std::move(rows)}};
}

Json policy_to_json(const Mdp& mdp, const Policy& policy) {
    Json rows = Json::array();
    for (std::size_t x = 0; x < mdp.num_states(); ++x) {
        Json row = Json::array();
        for (std::size_t i = 0; i < mdp.num_levels(); ++i) row.push_back(mdp.level(policy(x, i)));
        rows.push_back(std::move(row));
    }
    return Json{{"alpha", mdp.alpha},
                {"battery_levels_kwh", mdp.grids.battery_levels},
                {"states", states_to_json(mdp)},
                {"targets_kwh", std::move(rows)}};
}

Json thresholds_to_json(const Mdp& mdp, const ThresholdTable& table) {
    Json rows = Json::array();
    for (const auto& e : table.entries) {
        Json row = state_json(e.state);
        row["beta_minus_kwh"] = e.beta_minus;
        row["beta_plus_kwh"] = e.beta_plus;
        rows.push_back(std::move(row));
    }
    return Json{{"alpha", mdp.alpha}, {"b_max_kwh", mdp.params.b_max}, {"thresholds", std::move(rows)}};
}

Json report_to_json(const VerifyReport& report) {
    Json checks = Json::array();
    for (const auto& c : report.checks)
        checks.push_back(Json{{"name", c.name}, {"status", to_string(c.status)}, {"detail", c.detail}, {"witnesses", c.witnesses}});
    return Json{{"passed", report.passed()}, {"checks", std::move(checks)}};
}

Json run_to_json(const RunResult& run, bool with_trajectory) {
    Json out{{"discounted_cost", run.discounted_cost},
             {"undiscounted_cost", run.undiscounted_cost},
             {"operation_count", run.operation_count},
             {"out_of_support_slots", run.out_of_support},
             {"per_hour_purchases_kwh", run.per_hour_purchases}};
    if (with_trajectory) out["battery_trajectory_kwh"] = run.battery_trajectory;
    return out;
}

ValueFunction value_from_json(const Mdp& mdp, const Json& doc, double* residual) {
    check_states(mdp, doc);
    const Json& rows = table_rows(mdp, doc, "values");
    ValueFunction out(mdp.num_states(), mdp.num_levels());
    for (std::size_t x = 0; x < mdp.num_states(); ++x)
        for (std::size_t i = 0; i < mdp.num_levels(); ++i) out(x, i) = number(rows[x][i], "values");
    if (residual) *residual = doc.contains("residual") ? number(doc.at("residual"), "residual") : 0.0;
    return out;
}

Policy policy_from_json(const Mdp& mdp, const Json& doc) {
    check_states(mdp, doc);
    const Json& rows = table_rows(mdp, doc, "targets_kwh");
    Policy out(mdp.num_states(), mdp.num_levels());
    const double step = mdp.grids.battery_step;
    for (std::size_t x = 0; x < mdp.num_states(); ++x) {
        for (std::size_t i = 0; i < mdp.num_levels(); ++i) {
            const double v = number(rows[x][i], "targets_kwh");
            const long k = snap_index(v, step);
            if (k < 0 || static_cast<std::size_t>(k) >= mdp.num_levels() ||
                std::abs(static_cast<double>(k) * step - v) > kEnergyTol)
                throw ValidationError("policy target " + std::to_string(v) + " kWh is not a battery grid level");
            out(x, i) = static_cast<std::size_t>(k);
        }
    }
    return out;
}

ThresholdTable thresholds_from_json(const Json& doc) {
    const Json& rows = field(doc, "thresholds");
    if (!rows.is_array()) throw ValidationError("'thresholds' must be an array");
    ThresholdTable table;
    for (const auto& r : rows) {
        ThresholdEntry e;
        e.state.mode = field(r, "mode").get<int>();
        e.state.price = number(field(r, "price"), "price");
        e.state.demand = number(field(r, "demand_kwh"), "demand_kwh");
        e.beta_minus = number(field(r, "beta_minus_kwh"), "beta_minus_kwh");
        e.beta_plus = number(field(r, "beta_plus_kwh"), "beta_plus_kwh");
        if (e.beta_minus < 0.0 || e.beta_plus < e.beta_minus)
            throw ValidationError("thresholds must satisfy 0 <= beta_minus <= beta_plus");
        table.entries.push_back(e);
    }
    return table;
}

Json read_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open " + path.string());
    try {
        return Json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << text;
    if (!out) throw Error("failed writing " + path.string());
}

void write_json(const std::filesystem::path& path, const Json& doc) { write_text(path, doc.dump(2) + "\n"); }

}  // namespace battctl
