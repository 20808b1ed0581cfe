#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "battctl/mdp.hpp"

namespace battctl {

/// Civil (zone-less) time point at second resolution.
using TimePoint = std::chrono::sys_seconds;

/// Parses "YYYY-MM-DDTHH:MM[:SS]" (a space may replace the T).
TimePoint parse_timestamp(const std::string& text);
/// Formats as "YYYY-MM-DDTHH:MM", adding ":SS" only when seconds are non-zero.
std::string format_timestamp(TimePoint t);
int hour_of_day(TimePoint t);

struct Record {
    TimePoint time;
    double value = 0.0;
};

/// Time-ordered series at a fixed period.
struct Trace {
    std::vector<Record> records;

    std::size_t size() const { return records.size(); }
    bool empty() const { return records.empty(); }
};

enum class TraceKind { price, demand };

/// How gaps in a series are handled.
enum class FillRule { fail, hold };

struct LoadOptions {
    double step = 0.0;  // grid spacing; 0 keeps raw values
    FillRule fill = FillRule::fail;
};

struct LoadResult {
    Trace trace;                       // hourly, values rounded to the grid
    std::size_t clamp_warnings = 0;    // values clamped into the grid (negative readings)
    std::size_t filled_samples = 0;    // gaps filled by FillRule::hold
};

/// Reads a two-column CSV (timestamp, value) with a header row. Prices must
/// be hourly; demand may be any fixed sub-hourly period and is summed to
/// hourly totals before rounding. Throws ParseError on malformed rows and
/// ValidationError on non-monotone timestamps, gaps or incomplete hours.
LoadResult load_trace(const std::filesystem::path& path, TraceKind kind, const LoadOptions& options = {});

/// Same as load_trace but from an in-memory CSV document.
LoadResult parse_trace(const std::string& csv, TraceKind kind, const LoadOptions& options = {});

const char* csv_header(TraceKind kind);

/// Writes a trace in the format load_trace reads.
void write_trace(const std::filesystem::path& path, const Trace& trace, TraceKind kind);
std::string format_trace(const Trace& trace, TraceKind kind);

/// Shortest decimal text that reads back to the same double.
std::string format_number(double v);

/// Per hour-of-day histogram of (price, demand) cells over aligned traces.
/// With independent set the joint is replaced by the product of marginals.
/// Throws ValidationError when traces are misaligned or an hour is empty.
HourlyEmpirical fit_hourly(const Trace& price, const Trace& demand, double price_step, double demand_step,
                           bool independent = false);

/// Rounds every value of a trace to the grid.
Trace round_trace(const Trace& trace, double step);

/// Element-wise sum of aligned traces (aggregate demand of several homes).
Trace sum_traces(const std::vector<Trace>& traces);

struct PricePeak {
    double hour = 0.0;
    double height = 0.0;  // ct/kWh added at the peak hour
    double width = 1.0;   // hours (Gaussian standard deviation)
};

/// Daily price shape: a sinusoid lowest at trough_hour plus Gaussian peaks.
/// The defaults give cheap nights and a peaked day between roughly 9 a.m. and
/// 10 p.m.
struct PriceProfile {
    double base = 18.0;       // ct/kWh, daily mean of the sinusoid
    double amplitude = 6.0;   // ct/kWh
    double trough_hour = 4.0;
    std::vector<PricePeak> peaks = {{11.0, 4.0, 1.5}, {19.0, 7.0, 1.5}};

    double mean(int hour) const;
};

struct PriceSynthConfig {
    PriceProfile profile;
    double sigma = 0.2;  // lognormal multiplicative noise, mean preserving
    int days = 31;
    std::uint64_t seed = 1;
    TimePoint start = parse_timestamp("2011-01-01T00:00");
};

/// Hourly synthetic prices. Pure function of the configuration.
Trace synth_prices(const PriceSynthConfig& config);

/// Canonical hourly demand of a one-occupant home, kWh. Morning and evening
/// peaks; sums to kCanonicalDailyKwh.
const std::vector<double>& canonical_demand_profile();
inline constexpr double kCanonicalDailyKwh = 3.6;

struct DemandSynthConfig {
    int occupants = 4;
    int days = 31;
    double noise = 0.3;           // lognormal sigma of each hourly total
    int resolution_minutes = 60;  // sample period, must divide 60
    std::uint64_t seed = 1;
    TimePoint start = parse_timestamp("2011-01-01T00:00");
};

/// Synthetic household demand: the canonical profile scaled by occupants,
/// with mean-preserving noise per hour split across sub-hourly samples.
/// A simple stand-in for a full appliance-level load model.
Trace synth_demand(const DemandSynthConfig& config);

}  // namespace battctl
