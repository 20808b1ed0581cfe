#include "battctl/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numbers>
#include <random>
#include <sstream>

#include "battctl/error.hpp"

namespace battctl {

namespace {

using namespace std::chrono;

constexpr long kSecondsPerHour = 3600;

std::string trim(std::string s) {
    const auto not_space = [](unsigned char c) { return !std::isspace(c); };
    s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
    s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
    return s;
}

double parse_value(const std::string& text, std::size_t line) {
    double v = 0.0;
    const char* first = text.data();
    const char* last = text.data() + text.size();
    if (!text.empty() && *first == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last || !std::isfinite(v))
        throw ParseError("malformed number '" + text + "'", line);
    return v;
}

struct RawRow {
    TimePoint time;
    double value = 0.0;
    std::size_t line = 0;
};

std::vector<RawRow> read_rows(std::istream& in) {
    std::vector<RawRow> rows;
    std::string line;
    std::size_t number = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++number;
        if (number == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
        line = trim(line);
        if (line.empty()) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos || line.find(',', comma + 1) != std::string::npos)
            throw ParseError("expected exactly two comma-separated columns", number);
        const std::string first = trim(line.substr(0, comma));
        const std::string second = trim(line.substr(comma + 1));
        if (!header_seen) {
            if (first != "timestamp") throw ParseError("header row must start with 'timestamp'", number);
            header_seen = true;
            continue;
        }
        RawRow row;
        try {
            row.time = parse_timestamp(first);
        } catch (const ValidationError& e) {
            throw ParseError(e.what(), number);
        }
        row.value = parse_value(second, number);
        row.line = number;
        rows.push_back(row);
    }
    if (!header_seen) throw ParseError("missing header row", number == 0 ? 1 : number);
    return rows;
}

void check_monotone(const std::vector<RawRow>& rows) {
    for (std::size_t k = 1; k < rows.size(); ++k)
        if (rows[k].time <= rows[k - 1].time)
            throw ValidationError("non-monotone timestamps at line " + std::to_string(rows[k].line) + " (" +
                                  format_timestamp(rows[k].time) + ")");
}

// Rows at a fixed period; gaps are an error or are filled with the previous value.
std::vector<RawRow> regularize(const std::vector<RawRow>& rows, long period, FillRule fill, std::size_t& filled) {
    std::vector<RawRow> out;
    out.reserve(rows.size());
    for (std::size_t k = 0; k < rows.size(); ++k) {
        if (k > 0) {
            const long gap = (rows[k].time - rows[k - 1].time).count();
            if (gap % period != 0)
                throw ValidationError("irregular sample period at line " + std::to_string(rows[k].line));
            if (gap > period) {
                if (fill == FillRule::fail)
                    throw ValidationError("missing samples before line " + std::to_string(rows[k].line) + " (" +
                                          format_timestamp(rows[k].time) + "); use fill=hold to repeat values");
                for (long t = period; t < gap; t += period) {
                    RawRow copy = out.back();
                    copy.time = rows[k - 1].time + seconds(t);
                    out.push_back(copy);
                    ++filled;
                }
            }
        }
        out.push_back(rows[k]);
    }
    return out;
}

double clamp_value(double v, std::size_t& warnings) {
    if (v < 0.0) {
        ++warnings;
        return 0.0;
    }
    return v;
}

LoadResult build_trace(const std::vector<RawRow>& raw, TraceKind kind, const LoadOptions& options) {
    LoadResult result;
    check_monotone(raw);
    if (raw.empty()) return result;

    if (kind == TraceKind::price) {
        for (const auto& r : raw)
            if (r.time.time_since_epoch().count() % kSecondsPerHour != 0)
                throw ValidationError("price trace must be hourly (line " + std::to_string(r.line) + ")");
        for (const auto& r : regularize(raw, kSecondsPerHour, options.fill, result.filled_samples))
            result.trace.records.push_back({r.time, clamp_value(r.value, result.clamp_warnings)});
    } else {
        const long period = raw.size() > 1 ? (raw[1].time - raw[0].time).count() : kSecondsPerHour;
        if (period <= 0 || kSecondsPerHour % period != 0)
            throw ValidationError("demand sample period must divide one hour");
        const auto rows = regularize(raw, period, options.fill, result.filled_samples);
        const long per_hour = kSecondsPerHour / period;
        if (rows.front().time.time_since_epoch().count() % kSecondsPerHour != 0)
            throw ValidationError("demand trace must start on the hour (line " + std::to_string(rows.front().line) + ")");
        if (rows.size() % static_cast<std::size_t>(per_hour) != 0)
            throw ValidationError("demand trace ends with an incomplete hour");
        for (std::size_t k = 0; k < rows.size(); k += static_cast<std::size_t>(per_hour)) {
            double total = 0.0;
            for (long m = 0; m < per_hour; ++m) total += rows[k + static_cast<std::size_t>(m)].value;
            result.trace.records.push_back({rows[k].time, clamp_value(total, result.clamp_warnings)});
        }
    }
    if (options.step > 0.0) result.trace = round_trace(result.trace, options.step);
    return result;
}

}  // namespace

TimePoint parse_timestamp(const std::string& text) {
    int y = 0, mo = 0, d = 0, h = 0, mi = 0, s = 0;
    char sep = 0;
    int consumed = 0;
    const int n = std::sscanf(text.c_str(), "%4d-%2d-%2d%c%2d:%2d%n", &y, &mo, &d, &sep, &h, &mi, &consumed);
    bool ok = n == 6 && (sep == 'T' || sep == ' ');
    std::size_t pos = static_cast<std::size_t>(consumed);
    if (ok && pos < text.size()) {
        int extra = 0;
        ok = std::sscanf(text.c_str() + pos, ":%2d%n", &s, &extra) == 1 && pos + static_cast<std::size_t>(extra) == text.size();
    }
    const year_month_day date{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
    if (!ok || !date.ok() || h < 0 || h > 23 || mi < 0 || mi > 59 || s < 0 || s > 59)
        throw ValidationError("malformed timestamp '" + text + "'");
    return sys_days{date} + hours{h} + minutes{mi} + seconds{s};
}

std::string format_timestamp(TimePoint t) {
    const auto day_point = floor<days>(t);
    const year_month_day date{day_point};
    const hh_mm_ss tod{t - day_point};
    char buf[64];
    if (tod.seconds().count() != 0)
        std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02ld:%02ld:%02ld", static_cast<int>(date.year()),
                      static_cast<unsigned>(date.month()), static_cast<unsigned>(date.day()),
                      static_cast<long>(tod.hours().count()), static_cast<long>(tod.minutes().count()),
                      static_cast<long>(tod.seconds().count()));
    else
        std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02ld:%02ld", static_cast<int>(date.year()),
                      static_cast<unsigned>(date.month()), static_cast<unsigned>(date.day()),
                      static_cast<long>(tod.hours().count()), static_cast<long>(tod.minutes().count()));
    return buf;
}

int hour_of_day(TimePoint t) {
    const hh_mm_ss tod{t - floor<days>(t)};
    return static_cast<int>(tod.hours().count());
}

std::string format_number(double v) {
    if (v == 0.0) return "0";
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

const char* csv_header(TraceKind kind) {
    return kind == TraceKind::price ? "timestamp,price_ct_per_kwh" : "timestamp,demand_kwh";
}

LoadResult parse_trace(const std::string& csv, TraceKind kind, const LoadOptions& options) {
    std::istringstream in(csv);
    return build_trace(read_rows(in), kind, options);
}

LoadResult load_trace(const std::filesystem::path& path, TraceKind kind, const LoadOptions& options) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open trace file " + path.string());
    return build_trace(read_rows(in), kind, options);
}

std::string format_trace(const Trace& trace, TraceKind kind) {
    std::string out = csv_header(kind);
    out += '\n';
    for (const auto& r : trace.records) {
        out += format_timestamp(r.time);
        out += ',';
        out += format_number(r.value);
        out += '\n';
    }
    return out;
}

void write_trace(const std::filesystem::path& path, const Trace& trace, TraceKind kind) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write trace file " + path.string());
    out << format_trace(trace, kind);
}

Trace round_trace(const Trace& trace, double step) {
    Trace out = trace;
    for (auto& r : out.records) r.value = snap(r.value, step);
    return out;
}

Trace sum_traces(const std::vector<Trace>& traces) {
    if (traces.empty()) return {};
    Trace out = traces.front();
    for (std::size_t k = 1; k < traces.size(); ++k) {
        if (traces[k].size() != out.size()) throw ValidationError("cannot sum traces of different length");
        for (std::size_t t = 0; t < out.size(); ++t) {
            if (traces[k].records[t].time != out.records[t].time)
                throw ValidationError("cannot sum traces with different timestamps");
            out.records[t].value += traces[k].records[t].value;
        }
    }
    return out;
}

HourlyEmpirical fit_hourly(const Trace& price, const Trace& demand, double price_step, double demand_step,
                           bool independent) {
    if (price.size() != demand.size()) throw ValidationError("price and demand traces cover different hours");
    std::array<std::map<std::pair<long, long>, std::size_t>, kHoursPerDay> joint;
    std::array<std::size_t, kHoursPerDay> totals{};
    for (std::size_t t = 0; t < price.size(); ++t) {
        if (price.records[t].time != demand.records[t].time)
            throw ValidationError("price and demand traces are not aligned at " +
                                  format_timestamp(price.records[t].time));
        const auto h = static_cast<std::size_t>(hour_of_day(price.records[t].time));
        ++joint[h][{snap_index(price.records[t].value, price_step), snap_index(demand.records[t].value, demand_step)}];
        ++totals[h];
    }
    HourlyEmpirical out;
    for (std::size_t h = 0; h < kHoursPerDay; ++h) {
        if (totals[h] == 0) throw ValidationError("no observations for hour " + std::to_string(h));
        const double n = static_cast<double>(totals[h]);
        if (!independent) {
            for (const auto& [cell, count] : joint[h])
                out.hours[h].push_back({static_cast<double>(cell.first) * price_step,
                                        static_cast<double>(cell.second) * demand_step, static_cast<double>(count) / n});
            continue;
        }
        std::map<long, std::size_t> prices;
        std::map<long, std::size_t> demands;
        for (const auto& [cell, count] : joint[h]) {
            prices[cell.first] += count;
            demands[cell.second] += count;
        }
        for (const auto& [pk, pc] : prices)
            for (const auto& [dk, dc] : demands)
                out.hours[h].push_back({static_cast<double>(pk) * price_step, static_cast<double>(dk) * demand_step,
                                        (static_cast<double>(pc) / n) * (static_cast<double>(dc) / n)});
    }
    return out;
}

double PriceProfile::mean(int hour) const {
    const double h = static_cast<double>(hour);
    double m = base - amplitude * std::cos(2.0 * std::numbers::pi * (h - trough_hour) / 24.0);
    for (const auto& peak : peaks) {
        double d = std::fmod(std::abs(h - peak.hour), 24.0);
        d = std::min(d, 24.0 - d);
        m += peak.height * std::exp(-0.5 * (d / peak.width) * (d / peak.width));
    }
    return std::max(0.0, m);
}

Trace synth_prices(const PriceSynthConfig& config) {
    if (config.sigma < 0.0) throw ValidationError("price noise sigma must be non-negative");
    if (config.days < 1) throw ValidationError("synthetic price trace needs at least one day");
    std::mt19937_64 rng(config.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Trace out;
    out.records.reserve(static_cast<std::size_t>(config.days) * kHoursPerDay);
    for (int d = 0; d < config.days; ++d) {
        for (int h = 0; h < kHoursPerDay; ++h) {
            const TimePoint t = config.start + hours{d * kHoursPerDay + h};
            const double z = normal(rng);
            const double noise = std::exp(config.sigma * z - 0.5 * config.sigma * config.sigma);
            out.records.push_back({t, config.profile.mean(hour_of_day(t)) * noise});
        }
    }
    return out;
}

const std::vector<double>& canonical_demand_profile() {
    static const std::vector<double> profile = {
        0.06, 0.06, 0.06, 0.06, 0.06, 0.06,  // night
        0.15, 0.30, 0.25, 0.12,              // morning peak
        0.10, 0.10, 0.10, 0.10, 0.10, 0.10,  // daytime
        0.15, 0.25, 0.35, 0.35, 0.30, 0.22,  // evening peak
        0.12, 0.08};
    return profile;
}

Trace synth_demand(const DemandSynthConfig& config) {
    if (config.occupants < 1) throw ValidationError("synthetic demand needs at least one occupant");
    if (config.days < 1) throw ValidationError("synthetic demand trace needs at least one day");
    if (config.noise < 0.0) throw ValidationError("demand noise must be non-negative");
    if (config.resolution_minutes < 1 || 60 % config.resolution_minutes != 0)
        throw ValidationError("demand resolution must divide 60 minutes");
    const auto& profile = canonical_demand_profile();
    const int per_hour = 60 / config.resolution_minutes;
    const double s = config.noise;
    std::mt19937_64 rng(config.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Trace out;
    for (int d = 0; d < config.days; ++d) {
        for (int h = 0; h < kHoursPerDay; ++h) {
            const TimePoint hour_start = config.start + hours{d * kHoursPerDay + h};
            const double hourly = static_cast<double>(config.occupants) *
                                  profile[static_cast<std::size_t>(hour_of_day(hour_start))] *
                                  std::exp(s * normal(rng) - 0.5 * s * s);
            std::vector<double> weights(static_cast<std::size_t>(per_hour), 1.0);
            if (per_hour > 1 && s > 0.0)
                for (auto& w : weights) w = std::exp(s * normal(rng));
            double total = 0.0;
            for (double w : weights) total += w;
            for (int m = 0; m < per_hour; ++m)
                out.records.push_back({hour_start + minutes{m * config.resolution_minutes},
                                       hourly * weights[static_cast<std::size_t>(m)] / total});
        }
    }
    return out;
}

}  // namespace battctl
