// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
// failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <numeric>
#include <set>
#include <sstream>
#include <string>

#include "battctl/commands.hpp"
#include "battctl/config.hpp"
#include "battctl/error.hpp"
#include "battctl/parallel.hpp"
#include "battctl/sim.hpp"
#include "battctl/solver.hpp"
#include "battctl/thresholds.hpp"
#include "support.hpp"

using namespace battctl;
namespace fs = std::filesystem;

namespace {

const fs::path kConfigs = BATTCTL_CONFIG_DIR;

struct Outcome {
    bool pass = true;
    std::string detail;
};

// Outcome of the criterion being run; the first failed expectation is kept
// as the detail.
Outcome* current = nullptr;

void expect(bool ok, const std::string& what) {
    if (ok) return;
    if (current->pass) current->detail = what;
    current->pass = false;
}

std::string num(double v) {
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

std::string example_thresholds() {
    for (double alpha : {0.75, 0.9, 0.99}) {
        const Mdp mdp = testing::example_one(alpha);
        const ThresholdTable t = extract(mdp, policy_iteration(mdp).policy);
        const std::vector<double> expected = {1, 0, 1, 0};
        for (std::size_t x = 0; x < 4; ++x) {
            expect(t.entries[x].beta_minus == expected[x] && t.entries[x].beta_plus == expected[x],
                   "alpha " + num(alpha) + ": state " + std::to_string(x + 1) + " has (" +
                       num(t.entries[x].beta_minus) + ", " + num(t.entries[x].beta_plus) + ")");
        }
    }
    return "thresholds (1,0,1,0) at alpha 0.75, 0.9, 0.99";
}

constexpr std::uint64_t kInstances = 60;

std::string threshold_structure() {
    std::size_t cells = 0;
    for (std::uint64_t seed = 0; seed < kInstances; ++seed) {
        const Mdp mdp = testing::random_instance(seed);
        const Policy policy = policy_iteration(mdp).policy;
        try {
            const ThresholdTable t = extract(mdp, policy);
            const auto bad = structure_violations(mdp, policy, t);
            expect(bad.empty(), "seed " + std::to_string(seed) + ": " + std::to_string(bad.size()) + " violating cells");
        } catch (const StructureError& e) {
            expect(false, "seed " + std::to_string(seed) + ": " + e.what());
        }
        cells += mdp.num_states() * mdp.num_levels();
    }
    return std::to_string(kInstances) + " instances, " + std::to_string(cells) + " cells, zero violations";
}

std::string value_shape() {
    for (std::uint64_t seed = 0; seed < kInstances; ++seed) {
        const Mdp mdp = testing::random_instance(seed);
        const SolveResult r = policy_iteration(mdp);
        const auto bad = shape_violations(mdp, r.value, convexity_tolerance(mdp));
        expect(bad.empty(), "seed " + std::to_string(seed) + ": " + (bad.empty() ? "" : bad.front().kind) + " at state " +
                                (bad.empty() ? "" : std::to_string(bad.front().state)));
    }
    return "J non-increasing and discretely convex within 1e-7 * max price";
}

std::string equal_thresholds() {
    std::size_t checked = 0;
    auto check = [&](const Mdp& mdp, const std::string& label) {
        if (!mdp.params.efficient()) return;
        ++checked;
        const ThresholdTable t = extract(mdp, policy_iteration(mdp).policy);
        for (const auto& e : t.entries)
            expect(e.beta_minus == e.beta_plus, label + ": beta- " + num(e.beta_minus) + " != beta+ " + num(e.beta_plus));
    };
    for (std::uint64_t seed = 0; seed < kInstances; ++seed)
        check(testing::random_instance(seed), "seed " + std::to_string(seed));
    for (std::uint64_t seed = 1000; seed < 1020; ++seed)
        check(testing::random_instance(seed, {.efficient = true}), "efficient seed " + std::to_string(seed));
    return std::to_string(checked) + " efficient instances";
}

std::string oracle_equivalence() {
    const double tol = 1e-6;
    for (std::uint64_t seed = 200; seed < 210; ++seed) {
        const Mdp mdp = testing::random_instance(seed, {.max_levels = 17});
        const auto horizon = static_cast<std::size_t>(std::ceil(std::log(1e-8) / std::log(mdp.alpha)));
        const SolveResult vi = value_iteration(mdp, tol);
        const SolveResult pi = policy_iteration(mdp);
        const ValueFunction fh = finite_horizon_oracle(mdp, horizon);
        // Stopping rule of value iteration: distance to the fixed point <= tol / 2.
        // Horizon n from zero: distance <= alpha^n * sup J <= 1e-8 * value bound.
        const double fh_bound = std::pow(mdp.alpha, static_cast<double>(horizon)) * value_bound(mdp);
        const double slack = 1e-9 * value_bound(mdp);
        const std::string label = "seed " + std::to_string(seed);
        expect(vi.value.distance(pi.value) <= tol / 2 + slack, label + ": vi/pi " + num(vi.value.distance(pi.value)));
        expect(fh.distance(pi.value) <= fh_bound + slack, label + ": oracle/pi " + num(fh.distance(pi.value)));
        expect(fh.distance(vi.value) <= fh_bound + tol / 2 + slack, label + ": oracle/vi " + num(fh.distance(vi.value)));
    }
    return "10 instances, value iteration, policy iteration and horizon oracle within the geometric bounds";
}

std::string propositions() {
    std::size_t max_price_states = 0;
    for (std::uint64_t seed = 300; seed < 330; ++seed) {
        const Mdp mdp = testing::random_instance(seed, {.efficient = true});
        const ThresholdTable t = extract(mdp, policy_iteration(mdp).policy);
        for (std::size_t x = 0; x < mdp.num_states(); ++x) {
            if (mdp.states[x].price != mdp.max_price()) continue;
            ++max_price_states;
            expect(t.entries[x].beta_minus == 0.0, "(a) seed " + std::to_string(seed) + " state " + std::to_string(x) +
                                                       " has threshold " + num(t.entries[x].beta_minus));
        }
    }
    std::size_t low_discount = 0;
    for (std::uint64_t seed = 400; seed < 420; ++seed) {
        // Prices lie in [5, 40], so alpha < 1/8 is below every min/max price ratio.
        const Mdp mdp = testing::random_instance(seed, {.efficient = true, .alpha_lo = 0.01, .alpha_hi = 0.12});
        if (!(mdp.alpha < mdp.min_price() / mdp.max_price())) continue;
        ++low_discount;
        const ThresholdTable t = extract(mdp, policy_iteration(mdp).policy);
        for (const auto& e : t.entries)
            expect(e.beta_minus == 0.0, "(b) seed " + std::to_string(seed) + " threshold " + num(e.beta_minus));
    }
    std::size_t iid = 0;
    for (std::uint64_t seed = 500; seed < 530; ++seed) {
        const Mdp mdp = testing::random_instance(seed, {.iid = true, .efficient = true});
        ++iid;
        const ThresholdTable t = extract(mdp, policy_iteration(mdp).policy);
        const MonotonicityResult m = check_monotonicity(mdp, t);
        expect(m.monotone, "(c) seed " + std::to_string(seed) + ": state " + std::to_string(m.cheaper_state) +
                               " holds less than state " + std::to_string(m.dearer_state));
    }
    return "(a) " + std::to_string(max_price_states) + " max-price states, (b) " + std::to_string(low_discount) +
           " low-discount instances, (c) " + std::to_string(iid) + " i.i.d. instances";
}

std::string closed_form() {
    const double p = 10.0;
    const double d = 4.0;
    const double alpha = 0.9;
    const Mdp mdp = testing::constant_price(p, d, 4.0, alpha);
    const ValueFunction fh = finite_horizon_oracle(mdp, 10000);
    const SolveResult pi = policy_iteration(mdp);
    double worst = 0.0;
    for (std::size_t i = 0; i < mdp.num_levels(); ++i) {
        const double closed = d * p / (1 - alpha) - mdp.level(i) * p;
        const double fh_err = std::abs(fh(0, i) - closed) / closed;
        const double pi_err = std::abs(pi.value(0, i) - closed) / closed;
        expect(fh_err <= 1e-9, "horizon recursion deviates from the closed form by " + num(fh_err));
        expect(pi_err <= 1e-5, "solver deviates from the closed form by " + num(pi_err));
        worst = std::max(worst, pi_err);
    }
    return "max relative error " + num(worst);
}

RunConfig synthetic_config() { return load_config(kConfigs / "synthetic.json"); }

std::string experiment() {
    const RunConfig config = synthetic_config();
    const Dataset data = load_dataset(config, 1);
    const ExperimentSetup setup = experiment_setup(config);
    const SweepResult s = size_sweep({data.price_train, data.demand_train[0]}, {data.price_eval, data.demand_eval[0]},
                                     config.sweep_sizes, setup);
    std::string savings;
    for (std::size_t k = 0; k < s.points.size(); ++k) {
        const auto& pt = s.points[k];
        savings += (k ? " " : "") + num(100.0 * pt.savings) + "%";
        expect(pt.savings >= 0.0, "(a) negative savings at " + num(pt.b_max) + " kWh");
        if (k > 0)
            expect(pt.savings >= s.points[k - 1].savings - 0.005,
                   "(b) savings drop from " + num(s.points[k - 1].b_max) + " to " + num(pt.b_max) + " kWh");
    }
    const double top = s.points.back().savings;
    const double next = s.points[s.points.size() - 2].savings;
    expect(std::abs(top - next) <= 1e-3 * std::abs(top), "(c) top two sizes differ: " + num(next) + " vs " + num(top));

    // Cheap hours: the twelve hours with the lowest mean evaluation price.
    const auto price = hourly_mean(data.price_eval);
    std::vector<int> hours(kHoursPerDay);
    std::iota(hours.begin(), hours.end(), 0);
    std::stable_sort(hours.begin(), hours.end(), [&](int a, int b) {
        return price[static_cast<std::size_t>(a)] < price[static_cast<std::size_t>(b)];
    });
    auto share = [&](const std::array<double, kHoursPerDay>& buy) {
        double cheap = 0.0;
        for (int k = 0; k < kHoursPerDay / 2; ++k) cheap += buy[static_cast<std::size_t>(hours[static_cast<std::size_t>(k)])];
        const double total = std::accumulate(buy.begin(), buy.end(), 0.0);
        return total > 0.0 ? cheap / total : 0.0;
    };
    const double with_storage = share(s.points.back().run.per_hour_purchases);
    const double without = share(s.baseline_per_hour);
    expect(with_storage > without, "(d) cheap-hour share " + num(with_storage) + " vs baseline " + num(without));
    return "savings " + savings + ", cheap-hour share " + num(100 * with_storage) + "% vs " + num(100 * without) + "%";
}

std::string pooling() {
    const RunConfig config = synthetic_config();
    const Dataset data = load_dataset(config, 4);
    const ExperimentSetup setup = experiment_setup(config);
    std::string summary;
    for (std::size_t n : {1, 2, 4}) {
        const std::vector<Trace> train(data.demand_train.begin(), data.demand_train.begin() + static_cast<long>(n));
        const std::vector<Trace> eval(data.demand_eval.begin(), data.demand_eval.begin() + static_cast<long>(n));
        const PoolResult r = pool(data.price_train, data.price_eval, train, eval, config.battery.b_max, setup);
        const double gap = (r.cost_pooled - r.cost_individual) / r.cost_individual;
        if (n == 1)
            expect(r.cost_pooled == r.cost_individual, "n=1: pooled " + num(r.cost_pooled) + " vs " + num(r.cost_individual));
        else
            expect(std::abs(gap) <= 0.05, "n=" + std::to_string(n) + ": relative gap " + num(gap));
        summary += (summary.empty() ? "" : ", ") + ("n=" + std::to_string(n) + " gap " + num(100 * gap) + "%");
    }
    return summary;
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string determinism() {
    const fs::path root = fs::temp_directory_path() / "battctl_acceptance_determinism";
    fs::remove_all(root);
    std::size_t files = 0;
    auto produce = [&](unsigned threads) {
        set_worker_threads(threads);
        const fs::path dir = root / std::to_string(threads);
        std::ostringstream sink;
        RunConfig example = load_config(kConfigs / "example1.json");
        for (double alpha : {0.75, 0.9, 0.99}) {
            example.alpha = alpha;
            cmd_solve(example, {.out_dir = dir / ("example_" + num(alpha))}, sink);
        }
        cmd_sweep(synthetic_config(), {.out_dir = dir / "sweep", .trajectories = true}, sink);
        return dir;
    };
    const fs::path one = produce(1);
    const fs::path eight = produce(8);
    set_worker_threads(0);
    std::set<fs::path> names;
    for (const auto& e : fs::recursive_directory_iterator(one))
        if (e.is_regular_file()) names.insert(fs::relative(e.path(), one));
    for (const auto& e : fs::recursive_directory_iterator(eight))
        if (e.is_regular_file()) expect(names.count(fs::relative(e.path(), eight)) == 1, "extra file " + e.path().string());
    for (const auto& name : names) {
        ++files;
        expect(fs::exists(eight / name) && read_file(one / name) == read_file(eight / name),
               "artifact differs: " + name.string());
    }
    fs::remove_all(root);
    return std::to_string(files) + " artifacts byte-identical with 1 and 8 threads";
}

struct Criterion {
    const char* name;
    std::function<std::string()> run;
    double time_limit_s;  // 0: none
};

}  // namespace

int main() {
    const std::vector<Criterion> criteria = {
        {"1 example chain thresholds", example_thresholds, 1.0},
        {"2 threshold structure", threshold_structure, 60.0},
        {"3 value function shape", value_shape, 0.0},
        {"4 equal thresholds for an efficient battery", equal_thresholds, 0.0},
        {"5 oracle equivalence", oracle_equivalence, 0.0},
        {"6 zero thresholds and price monotonicity", propositions, 0.0},
        {"7 constant-price closed form", closed_form, 0.0},
        {"8 synthetic experiment properties", experiment, 600.0},
        {"9 pooling", pooling, 0.0},
        {"10 determinism across thread counts", determinism, 0.0},
    };
    int failures = 0;
    for (const auto& c : criteria) {
        Outcome outcome;
        current = &outcome;
        std::string summary;
        const auto start = std::chrono::steady_clock::now();
        try {
            summary = c.run();
        } catch (const std::exception& e) {
            outcome.pass = false;
            outcome.detail = std::string("exception: ") + e.what();
        }
        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (outcome.pass && c.time_limit_s > 0.0 && seconds > c.time_limit_s) {
            outcome.pass = false;
            outcome.detail = "took " + num(seconds) + " s, limit " + num(c.time_limit_s) + " s";
        }
        if (!outcome.pass) ++failures;
        std::printf("%s  %-46s %s (%.2f s)\n", outcome.pass ? "PASS" : "FAIL", c.name,
                    outcome.pass ? summary.c_str() : outcome.detail.c_str(), seconds);
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
    return failures == 0 ? 0 : 1;
}
