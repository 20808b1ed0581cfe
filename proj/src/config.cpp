#include "battctl/config.hpp"

#include <cmath>
#include <random>
#include <set>

#include "battctl/error.hpp"

namespace battctl {

namespace {

// Object view that remembers which keys were read, so leftovers can be
// reported as unknown.
class Section {
public:
    Section(const Json& doc, std::string path) : doc_(doc), path_(std::move(path)) {
        if (!doc_.is_object()) throw ValidationError(where() + " must be an object");
    }

    bool has(const char* key) {
        used_.insert(key);
        return doc_.contains(key) && !doc_.at(key).is_null();
    }

    const Json& at(const char* key) {
        used_.insert(key);
        return doc_.at(key);
    }

    double number(const char* key, double fallback) {
        if (!has(key)) return fallback;
        const Json& v = doc_.at(key);
        if (!v.is_number()) throw ValidationError(where(key) + " must be a number");
        const double d = v.get<double>();
        if (!std::isfinite(d)) throw ValidationError(where(key) + " must be finite");
        return d;
    }

    long integer(const char* key, long fallback) {
        if (!has(key)) return fallback;
        const Json& v = doc_.at(key);
        if (!v.is_number_integer()) throw ValidationError(where(key) + " must be an integer");
        return v.get<long>();
    }

    bool boolean(const char* key, bool fallback) {
        if (!has(key)) return fallback;
        const Json& v = doc_.at(key);
        if (!v.is_boolean()) throw ValidationError(where(key) + " must be true or false");
        return v.get<bool>();
    }

    std::string text(const char* key, const std::string& fallback) {
        if (!has(key)) return fallback;
        const Json& v = doc_.at(key);
        if (!v.is_string()) throw ValidationError(where(key) + " must be a string");
        return v.get<std::string>();
    }

    std::vector<double> numbers(const char* key, std::vector<double> fallback) {
        if (!has(key)) return fallback;
        const Json& v = doc_.at(key);
        if (!v.is_array()) throw ValidationError(where(key) + " must be an array of numbers");
        std::vector<double> out;
        for (const auto& e : v) {
            if (!e.is_number()) throw ValidationError(where(key) + " must be an array of numbers");
            out.push_back(e.get<double>());
        }
        return out;
    }

    Section child(const char* key) { return Section(at(key), where(key)); }

    std::string where(const char* key = nullptr) const {
        std::string w = path_.empty() ? std::string("config") : path_;
        if (key) w += std::string(".") + key;
        return w;
    }

    /// Throws on keys that were never read.
    void finish() const {
        for (const auto& [key, value] : doc_.items())
            if (!used_.count(key)) throw ValidationError("unknown key '" + key + "' in " + where());
    }

private:
    const Json& doc_;
    std::string path_;
    std::set<std::string> used_;
};

Distribution parse_distribution(const Json& v, const std::string& where) {
    if (!v.is_array() || v.empty()) throw ValidationError(where + " must be a non-empty array of {value, prob}");
    Distribution out;
    for (const auto& e : v) {
        Section s(e, where + "[]");
        Mass m{s.number("value", NAN), s.number("prob", NAN)};
        if (!s.has("value") || !s.has("prob")) throw ValidationError(where + " entries need 'value' and 'prob'");
        s.finish();
        out.push_back(m);
    }
    return out;
}

std::vector<std::filesystem::path> parse_paths(Section& s, const char* key, const std::filesystem::path& base) {
    std::vector<std::filesystem::path> out;
    if (!s.has(key)) return out;
    const Json& v = s.at(key);
    auto resolve = [&](const Json& e) {
        if (!e.is_string()) throw ValidationError(s.where(key) + " must be a path or an array of paths");
        std::filesystem::path p = e.get<std::string>();
        return p.is_relative() && !base.empty() ? base / p : p;
    };
    if (v.is_array()) {
        for (const auto& e : v) out.push_back(resolve(e));
    } else {
        out.push_back(resolve(v));
    }
    return out;
}

void parse_process(Section s, ProcessSpec& out) {
    const std::string type = s.text("type", "hourly");
    if (type == "iid") {
        out.kind = ModelKind::iid;
        if (!s.has("price") || !s.has("demand")) throw ValidationError("iid model needs 'price' and 'demand'");
        out.price = parse_distribution(s.at("price"), s.where("price"));
        out.demand = parse_distribution(s.at("demand"), s.where("demand"));
    } else if (type == "markov") {
        out.kind = ModelKind::markov;
        if (!s.has("price_levels") || !s.has("transition") || !s.has("demand"))
            throw ValidationError("markov model needs 'price_levels', 'transition' and 'demand'");
        out.price_levels = s.numbers("price_levels", {});
        const Json& t = s.at("transition");
        if (!t.is_array()) throw ValidationError(s.where("transition") + " must be a matrix");
        for (const auto& row : t) {
            if (!row.is_array()) throw ValidationError(s.where("transition") + " must be a matrix");
            std::vector<double> r;
            for (const auto& p : row) {
                if (!p.is_number()) throw ValidationError(s.where("transition") + " must hold numbers");
                r.push_back(p.get<double>());
            }
            out.transition.push_back(std::move(r));
        }
        const Json& d = s.at("demand");
        if (!d.is_array() || d.empty()) throw ValidationError(s.where("demand") + " must be a non-empty array");
        if (d.front().is_object()) {
            out.level_demand.push_back(parse_distribution(d, s.where("demand")));
        } else {
            for (const auto& dist : d) out.level_demand.push_back(parse_distribution(dist, s.where("demand")));
        }
    } else if (type == "hourly") {
        out.kind = ModelKind::hourly;
    } else {
        throw ValidationError("unknown model type '" + type + "' (expected iid, markov or hourly)");
    }
    s.finish();
}

void parse_synthetic(Section s, SyntheticSpec& out) {
    out.train_days = static_cast<int>(s.integer("train_days", out.train_days));
    out.eval_days = static_cast<int>(s.integer("eval_days", out.eval_days));
    out.price_sigma = s.number("price_sigma", out.price_sigma);
    out.occupants = static_cast<int>(s.integer("occupants", out.occupants));
    out.demand_noise = s.number("demand_noise", out.demand_noise);
    out.resolution_minutes = static_cast<int>(s.integer("resolution_minutes", out.resolution_minutes));
    out.start = s.text("start", out.start);
    if (s.has("price_profile")) {
        Section p = s.child("price_profile");
        out.profile.base = p.number("base", out.profile.base);
        out.profile.amplitude = p.number("amplitude", out.profile.amplitude);
        out.profile.trough_hour = p.number("trough_hour", out.profile.trough_hour);
        if (p.has("peaks")) {
            out.profile.peaks.clear();
            for (const auto& e : p.at("peaks")) {
                Section k(e, p.where("peaks") + "[]");
                out.profile.peaks.push_back({k.number("hour", 0.0), k.number("height", 0.0), k.number("width", 1.0)});
                k.finish();
            }
        }
        p.finish();
    }
    s.finish();
}

FillRule parse_fill(const std::string& name) {
    if (name == "fail") return FillRule::fail;
    if (name == "hold") return FillRule::hold;
    throw ValidationError("unknown fill rule '" + name + "' (expected fail or hold)");
}

}  // namespace

void RunConfig::validate() const {
    battery_params(*this).validate();
    if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("alpha must lie in (0, 1)");
    if (!(battery_step > 0.0)) throw ValidationError("battery_step_kwh must be positive");
    if (!(price_step > 0.0)) throw ValidationError("price_step must be positive");
    if (!(demand_step > 0.0)) throw ValidationError("demand_step_kwh must be positive");
    if (!(tol > 0.0)) throw ValidationError("solver tol must be positive");
    if (max_iters == 0) throw ValidationError("solver max_iters must be positive");
    if (rate_charge && *rate_charge < 0.0) throw ValidationError("rate_charge_kwh must be non-negative");
    if (rate_discharge && *rate_discharge < 0.0) throw ValidationError("rate_discharge_kwh must be non-negative");
    make_battery_grid(battery.b_max, battery_step);
    if (!(b0 >= 0.0 && b0 <= battery.b_max)) throw ValidationError("b0_kwh must lie in [0, b_max_kwh]");
    for (std::size_t k = 0; k < sweep_sizes.size(); ++k) {
        if (!(sweep_sizes[k] >= 0.0)) throw ValidationError("sweep sizes must be non-negative");
        if (k > 0 && !(sweep_sizes[k] > sweep_sizes[k - 1])) throw ValidationError("sweep sizes must be ascending");
        if (sweep_sizes[k] > 0.0) make_battery_grid(sweep_sizes[k], battery_step);
    }
    for (int n : pool_users)
        if (n < 1) throw ValidationError("pool user counts must be at least 1");
    const auto& syn = data.synthetic;
    if (syn.train_days < 1 || syn.eval_days < 1) throw ValidationError("synthetic train_days and eval_days must be >= 1");
    if (syn.price_sigma < 0.0 || syn.demand_noise < 0.0) throw ValidationError("synthetic noise must be non-negative");
    if (syn.occupants < 1) throw ValidationError("synthetic occupants must be >= 1");
    if (syn.resolution_minutes < 1 || 60 % syn.resolution_minutes != 0)
        throw ValidationError("synthetic resolution_minutes must divide 60");
    parse_timestamp(syn.start);
    if (data.from_files()) {
        if (!data.price_eval) throw ValidationError("data.price_eval is required with data.price_train");
        if (data.demand_train.empty() || data.demand_train.size() != data.demand_eval.size())
            throw ValidationError("data needs matching demand_train and demand_eval paths");
    } else if (data.price_eval || !data.demand_train.empty() || !data.demand_eval.empty()) {
        throw ValidationError("data.price_train is required when trace paths are given");
    }
}

RunConfig parse_config(const Json& doc, const std::filesystem::path& base_dir) {
    RunConfig c;
    Section root(doc, "");
    if (root.has("battery")) {
        Section b = root.child("battery");
        c.battery.b_max = b.number("b_max_kwh", c.battery.b_max);
        c.battery.eta_c = b.number("eta_c", c.battery.eta_c);
        c.battery.eta_d = b.number("eta_d", c.battery.eta_d);
        c.battery.xi = b.number("xi", c.battery.xi);
        if (b.has("rate_charge_kwh")) c.rate_charge = b.number("rate_charge_kwh", 0.0);
        if (b.has("rate_discharge_kwh")) c.rate_discharge = b.number("rate_discharge_kwh", 0.0);
        if (b.has("replacement")) {
            Section r = b.child("replacement");
            c.battery.replacement = Replacement{r.number("q", 0.0), r.number("cost", 0.0)};
            r.finish();
        }
        b.finish();
    }
    if (root.has("grid")) {
        Section g = root.child("grid");
        c.battery_step = g.number("battery_step_kwh", c.battery_step);
        c.price_step = g.number("price_step", c.price_step);
        c.demand_step = g.number("demand_step_kwh", c.demand_step);
        g.finish();
    }
    c.alpha = root.number("alpha", c.alpha);
    if (root.has("solver")) {
        Section s = root.child("solver");
        c.method = parse_solver_method(s.text("method", "policy"));
        c.tol = s.number("tol", c.tol);
        const long iters = s.integer("max_iters", static_cast<long>(c.max_iters));
        if (iters < 1) throw ValidationError("solver.max_iters must be positive");
        c.max_iters = static_cast<std::size_t>(iters);
        s.finish();
    }
    if (root.has("model")) parse_process(root.child("model"), c.process);
    if (root.has("data")) {
        Section d = root.child("data");
        const auto price_train = parse_paths(d, "price_train", base_dir);
        const auto price_eval = parse_paths(d, "price_eval", base_dir);
        if (price_train.size() > 1 || price_eval.size() > 1) throw ValidationError("give a single price trace per window");
        if (!price_train.empty()) c.data.price_train = price_train.front();
        if (!price_eval.empty()) c.data.price_eval = price_eval.front();
        c.data.demand_train = parse_paths(d, "demand_train", base_dir);
        c.data.demand_eval = parse_paths(d, "demand_eval", base_dir);
        c.data.fill = parse_fill(d.text("fill", "fail"));
        c.data.independent = d.boolean("independent", false);
        if (d.has("synthetic")) parse_synthetic(d.child("synthetic"), c.data.synthetic);
        d.finish();
    }
    if (root.has("experiment")) {
        Section e = root.child("experiment");
        c.b0 = e.number("b0_kwh", c.b0);
        c.sweep_sizes = e.numbers("sweep_sizes_kwh", c.sweep_sizes);
        if (e.has("pool_users")) {
            c.pool_users.clear();
            for (double n : e.numbers("pool_users", {})) {
                if (n != std::floor(n)) throw ValidationError("pool_users must be integers");
                c.pool_users.push_back(static_cast<int>(n));
            }
        }
        e.finish();
    }
    if (root.has("seed")) {
        const Json& s = root.at("seed");
        if (!s.is_number_unsigned()) throw ValidationError("seed must be a non-negative integer");
        c.seed = s.get<std::uint64_t>();
    }
    root.finish();
    return c;
}

RunConfig load_config(const std::filesystem::path& path) {
    return parse_config(read_json(path), path.parent_path());
}

BatteryParams battery_params(const RunConfig& config) {
    BatteryParams p = config.battery;
    if (config.rate_charge) {
        const double r = *config.rate_charge;
        p.rate_charge = [r](double) { return r; };
    }
    if (config.rate_discharge) {
        const double r = *config.rate_discharge;
        p.rate_discharge = [r](double) { return r; };
    }
    return p;
}

ExperimentSetup experiment_setup(const RunConfig& config) {
    ExperimentSetup s;
    s.params = battery_params(config);
    s.alpha = config.alpha;
    s.battery_step = config.battery_step;
    s.price_step = config.price_step;
    s.demand_step = config.demand_step;
    s.method = config.method;
    s.tol = config.tol;
    s.max_iters = config.max_iters;
    s.independent = config.data.independent;
    s.b0 = config.b0;
    return s;
}

Trace synthetic_price(const RunConfig& config) {
    const auto& syn = config.data.synthetic;
    PriceSynthConfig p;
    p.profile = syn.profile;
    p.sigma = syn.price_sigma;
    p.days = syn.train_days + syn.eval_days;
    p.seed = config.seed;
    p.start = parse_timestamp(syn.start);
    return synth_prices(p);
}

Trace synthetic_demand(const RunConfig& config, std::size_t user) {
    const auto& syn = config.data.synthetic;
    // Independent stream per user, derived from the run seed.
    std::seed_seq seq{static_cast<std::uint32_t>(config.seed), static_cast<std::uint32_t>(config.seed >> 32),
                      static_cast<std::uint32_t>(user + 1)};
    std::array<std::uint32_t, 2> words{};
    seq.generate(words.begin(), words.end());
    DemandSynthConfig d;
    d.occupants = syn.occupants;
    d.days = syn.train_days + syn.eval_days;
    d.noise = syn.demand_noise;
    d.resolution_minutes = syn.resolution_minutes;
    d.seed = (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
    d.start = parse_timestamp(syn.start);
    return synth_demand(d);
}

std::pair<Trace, Trace> split_days(const Trace& trace, int train_days) {
    std::pair<Trace, Trace> out;
    if (trace.empty()) return out;
    const TimePoint cut = std::chrono::floor<std::chrono::days>(trace.records.front().time) + std::chrono::days{train_days};
    for (const auto& r : trace.records) (r.time < cut ? out.first : out.second).records.push_back(r);
    return out;
}

namespace {

Trace hourly_demand(const Trace& raw, double step) {
    // Same aggregation and rounding path as a demand file.
    return parse_trace(format_trace(raw, TraceKind::demand), TraceKind::demand, {step, FillRule::fail}).trace;
}

}  // namespace

Dataset load_dataset(const RunConfig& config, std::size_t users) {
    if (users == 0) throw ValidationError("at least one user is needed");
    Dataset ds;
    if (config.data.from_files()) {
        if (config.data.demand_train.size() < users)
            throw ValidationError("configuration lists " + std::to_string(config.data.demand_train.size()) +
                                  " demand traces but " + std::to_string(users) + " users are needed");
        const LoadOptions price_opts{config.price_step, config.data.fill};
        const LoadOptions demand_opts{config.demand_step, config.data.fill};
        auto absorb = [&ds](LoadResult r) {
            ds.clamp_warnings += r.clamp_warnings;
            ds.filled_samples += r.filled_samples;
            return std::move(r.trace);
        };
        ds.price_train = absorb(load_trace(*config.data.price_train, TraceKind::price, price_opts));
        ds.price_eval = absorb(load_trace(*config.data.price_eval, TraceKind::price, price_opts));
        for (std::size_t u = 0; u < users; ++u) {
            ds.demand_train.push_back(absorb(load_trace(config.data.demand_train[u], TraceKind::demand, demand_opts)));
            ds.demand_eval.push_back(absorb(load_trace(config.data.demand_eval[u], TraceKind::demand, demand_opts)));
        }
    } else {
        const int train_days = config.data.synthetic.train_days;
        auto prices = split_days(round_trace(synthetic_price(config), config.price_step), train_days);
        ds.price_train = std::move(prices.first);
        ds.price_eval = std::move(prices.second);
        for (std::size_t u = 0; u < users; ++u) {
            auto demand = split_days(hourly_demand(synthetic_demand(config, u), config.demand_step), train_days);
            ds.demand_train.push_back(std::move(demand.first));
            ds.demand_eval.push_back(std::move(demand.second));
        }
    }
    if (ds.price_eval.empty() || ds.demand_eval.front().empty()) throw ValidationError("evaluation traces contain no rows");
    return ds;
}

Mdp build_model(const RunConfig& config) {
    const BatteryParams params = battery_params(config);
    const auto& p = config.process;
    switch (p.kind) {
        case ModelKind::iid: {
            Distribution price = p.price;
            Distribution demand = p.demand;
            return build_iid(price, demand, params, config.alpha, config.battery_step);
        }
        case ModelKind::markov:
            return build_markov_prices(p.price_levels, p.transition, p.level_demand, params, config.alpha,
                                       config.battery_step);
        case ModelKind::hourly: break;
    }
    const Dataset ds = load_dataset(config, 1);
    const HourlyEmpirical empirical =
        fit_hourly(ds.price_train, ds.demand_train.front(), config.price_step, config.demand_step, config.data.independent);
    return build_hourly(empirical, params, config.alpha, config.battery_step);
}

}  // namespace battctl
