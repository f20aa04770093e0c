#include "gridcast/dataio.hpp"

#include "gridcast/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>
#include <system_error>

namespace gridcast {

namespace fs = std::filesystem;

namespace {

std::string read_file_bytes(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw DataError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad())
        throw DataError("read error on " + path.string());
    return std::move(ss).str();
}

[[noreturn]] void fail(const fs::path& path, std::size_t line,
                       const std::string& msg) {
    throw DataError(path.string() + ":" + std::to_string(line) + ": " + msg);
}

// Lines of a CSV file, stripped of trailing \r.  Index 0 is the header.
std::vector<std::string> read_lines(const fs::path& path) {
    const std::string bytes = read_file_bytes(path);
    std::vector<std::string> lines;
    std::size_t pos = 0;
    while (pos < bytes.size()) {
        std::size_t nl = bytes.find('\n', pos);
        if (nl == std::string::npos)
            nl = bytes.size();
        std::size_t end = nl;
        if (end > pos && bytes[end - 1] == '\r')
            --end;
        lines.emplace_back(bytes, pos, end - pos);
        pos = nl + 1;
    }
    while (!lines.empty() && lines.back().empty())
        lines.pop_back();
    if (lines.empty())
        throw DataError(path.string() + ": empty file");
    return lines;
}

// Fields never contain commas or quotes, so a plain split suffices.
std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (true) {
        std::size_t comma = line.find(',', pos);
        if (comma == std::string::npos) {
            out.emplace_back(line, pos);
            return out;
        }
        out.emplace_back(line, pos, comma - pos);
        pos = comma + 1;
    }
}

double parse_double_field(const fs::path& path, std::size_t line,
                          const std::string& field, const char* what) {
    double v = 0.0;
    const char* first = field.data();
    const char* last = first + field.size();
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc{} || ptr != last || !std::isfinite(v))
        fail(path, line, std::string("invalid ") + what + " '" + field + "'");
    return v;
}

void expect_field_count(const fs::path& path, std::size_t line,
                        const std::vector<std::string>& fields,
                        std::size_t expected) {
    if (fields.size() != expected)
        fail(path, line,
             "expected " + std::to_string(expected) + " fields, found " +
                 std::to_string(fields.size()));
}

void expect_header(const fs::path& path, const std::string& got,
                   const std::string& want) {
    if (got != want)
        fail(path, 1, "expected header '" + want + "'");
}

std::string fmt_exact(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string fmt_short(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

void append_le32(std::string& s, std::int32_t v) {
    const auto u = static_cast<std::uint32_t>(v);
    for (int k = 0; k < 4; ++k)
        s.push_back(static_cast<char>((u >> (8 * k)) & 0xff));
}

void append_f64(std::string& s, double v) {
    std::uint64_t u = 0;
    std::memcpy(&u, &v, 8);
    for (int k = 0; k < 8; ++k)
        s.push_back(static_cast<char>((u >> (8 * k)) & 0xff));
}

// Bounds-checked little-endian cursor over a byte buffer.
struct ByteCursor {
    const fs::path& path;
    const std::string& bytes;
    std::size_t pos = 0;

    void need(std::size_t n) const {
        if (pos + n > bytes.size())
            throw DataError(path.string() + ": truncated grid file");
    }
    std::int32_t take_i32() {
        need(4);
        std::uint32_t u = 0;
        for (int k = 0; k < 4; ++k)
            u |= static_cast<std::uint32_t>(
                     static_cast<unsigned char>(bytes[pos + k]))
                 << (8 * k);
        pos += 4;
        return static_cast<std::int32_t>(u);
    }
    double take_f64() {
        need(8);
        std::uint64_t u = 0;
        for (int k = 0; k < 8; ++k)
            u |= static_cast<std::uint64_t>(
                     static_cast<unsigned char>(bytes[pos + k]))
                 << (8 * k);
        pos += 8;
        double v = 0.0;
        std::memcpy(&v, &u, 8);
        return v;
    }
};

} // namespace

void atomic_write_file(const fs::path& path, std::string_view bytes) {
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw DataError("cannot open " + tmp.string() + " for writing");
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        out.flush();
        if (!out) {
            std::error_code ec;
            fs::remove(tmp, ec);
            throw DataError("write error on " + tmp.string());
        }
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        std::error_code ec2;
        fs::remove(tmp, ec2);
        throw DataError("cannot rename " + tmp.string() + " to " +
                        path.string() + ": " + ec.message());
    }
}

CovariateGrid read_grid(const fs::path& path, bool require_positive) {
    const std::string bytes = read_file_bytes(path);
    ByteCursor cur{path, bytes};
    cur.need(4);
    if (bytes.compare(0, 4, "GCG1") != 0)
        throw DataError(path.string() + ": not a GCG1 grid file");
    cur.pos = 4;
    CovariateGrid g;
    g.nx = cur.take_i32();
    g.ny = cur.take_i32();
    g.x0 = cur.take_f64();
    g.y0 = cur.take_f64();
    g.dx = cur.take_f64();
    g.dy = cur.take_f64();
    if (g.nx < 1 || g.ny < 1 ||
        static_cast<std::int64_t>(g.nx) * g.ny > 50'000'000)
        throw DataError(path.string() + ": bad grid dimensions " +
                        std::to_string(g.nx) + "x" + std::to_string(g.ny));
    if (!std::isfinite(g.x0) || !std::isfinite(g.y0) || !std::isfinite(g.dx) ||
        !std::isfinite(g.dy) || g.dx <= 0.0 || g.dy <= 0.0)
        throw DataError(path.string() + ": bad grid geometry");
    const std::size_t n = static_cast<std::size_t>(g.nx) * g.ny;
    if (bytes.size() != cur.pos + 8 * n)
        throw DataError(path.string() + ": grid payload size mismatch");
    g.values.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double v = cur.take_f64();
        if (!std::isfinite(v))
            throw DataError(path.string() + ": non-finite grid value at index " +
                            std::to_string(i));
        if (require_positive && v <= 0.0)
            throw DataError(path.string() + ": non-positive covariate value at index " +
                            std::to_string(i));
        g.values[i] = v;
    }
    return g;
}

void write_grid(const fs::path& path, const CovariateGrid& grid) {
    if (grid.nx < 1 || grid.ny < 1 ||
        grid.values.size() != static_cast<std::size_t>(grid.nx) * grid.ny)
        throw InvalidArgument("grid dimensions do not match value count");
    if (!(grid.dx > 0.0) || !(grid.dy > 0.0) || !std::isfinite(grid.x0) ||
        !std::isfinite(grid.y0))
        throw InvalidArgument("invalid grid geometry");
    std::string out;
    out.reserve(44 + 8 * grid.values.size());
    out += "GCG1";
    append_le32(out, grid.nx);
    append_le32(out, grid.ny);
    append_f64(out, grid.x0);
    append_f64(out, grid.y0);
    append_f64(out, grid.dx);
    append_f64(out, grid.dy);
    for (double v : grid.values) {
        if (!std::isfinite(v))
            throw InvalidArgument("non-finite grid value");
        append_f64(out, v);
    }
    atomic_write_file(path, out);
}

LoadResult load_dataset(const fs::path& stations_csv,
                        const fs::path& forecasts_csv,
                        const fs::path& observations_csv,
                        const LoadOptions& opt) {
    if (opt.min_days_per_year < 0)
        throw InvalidArgument("min_days_per_year must be >= 0");

    const auto st_lines = read_lines(stations_csv);
    expect_header(stations_csv, st_lines[0], "station_id,x_km,y_km,wbar");
    std::vector<Site> sites;
    std::set<std::string> seen_ids;
    for (std::size_t i = 1; i < st_lines.size(); ++i) {
        const auto f = split_fields(st_lines[i]);
        expect_field_count(stations_csv, i + 1, f, 4);
        if (f[0].empty())
            fail(stations_csv, i + 1, "empty station_id");
        if (!seen_ids.insert(f[0]).second)
            fail(stations_csv, i + 1, "duplicate station '" + f[0] + "'");
        Site s;
        s.id = f[0];
        s.x = parse_double_field(stations_csv, i + 1, f[1], "x_km");
        s.y = parse_double_field(stations_csv, i + 1, f[2], "y_km");
        s.wbar = parse_double_field(stations_csv, i + 1, f[3], "wbar");
        if (s.wbar <= 0.0)
            fail(stations_csv, i + 1, "wbar must be positive");
        sites.push_back(std::move(s));
    }
    if (sites.empty())
        throw DataError(stations_csv.string() + ": no stations");

    const auto fc_lines = read_lines(forecasts_csv);
    {
        const auto h = split_fields(fc_lines[0]);
        if (h.size() < 4 || h[0] != "station_id" || h[1] != "date" ||
            h[2] != "hour")
            fail(forecasts_csv, 1,
                 "expected header 'station_id,date,hour,f1..fm'");
        for (std::size_t k = 3; k < h.size(); ++k)
            if (h[k] != "f" + std::to_string(k - 2))
                fail(forecasts_csv, 1, "expected member column f" +
                                           std::to_string(k - 2) + ", found '" +
                                           h[k] + "'");
    }
    const std::size_t m = split_fields(fc_lines[0]).size() - 3;
    std::vector<EnsembleForecast> forecasts;
    forecasts.reserve(fc_lines.size() - 1);
    std::set<std::string> seen_fc_keys;
    for (std::size_t i = 1; i < fc_lines.size(); ++i) {
        const auto f = split_fields(fc_lines[i]);
        expect_field_count(forecasts_csv, i + 1, f, 3 + m);
        if (!seen_ids.count(f[0]))
            fail(forecasts_csv, i + 1, "unknown station '" + f[0] + "'");
        if (!seen_fc_keys.insert(f[0] + '|' + f[1] + '|' + f[2]).second)
            fail(forecasts_csv, i + 1, "duplicate forecast row");
        std::vector<double> members(m);
        for (std::size_t k = 0; k < m; ++k)
            members[k] =
                parse_double_field(forecasts_csv, i + 1, f[3 + k], "member");
        try {
            forecasts.push_back(EnsembleForecast::make(
                f[0], parse_date(f[1]), parse_hour(f[2]), std::move(members)));
        } catch (const Error& e) {
            fail(forecasts_csv, i + 1, e.what());
        }
    }

    struct ObsRow {
        std::string id;
        Date date{};
        Hour hour = Hour::h06;
        double value = 0.0;
    };
    const auto ob_lines = read_lines(observations_csv);
    expect_header(observations_csv, ob_lines[0], "station_id,date,hour,obs");
    std::vector<ObsRow> obs;
    obs.reserve(ob_lines.size() - 1);
    std::set<std::string> seen_ob_keys;
    for (std::size_t i = 1; i < ob_lines.size(); ++i) {
        const auto f = split_fields(ob_lines[i]);
        expect_field_count(observations_csv, i + 1, f, 4);
        if (!seen_ids.count(f[0]))
            fail(observations_csv, i + 1, "unknown station '" + f[0] + "'");
        if (!seen_ob_keys.insert(f[0] + '|' + f[1] + '|' + f[2]).second)
            fail(observations_csv, i + 1, "duplicate observation row");
        if (f[3].empty())
            continue; // missing observation
        ObsRow r;
        r.id = f[0];
        try {
            r.date = parse_date(f[1]);
            r.hour = parse_hour(f[2]);
        } catch (const Error& e) {
            fail(observations_csv, i + 1, e.what());
        }
        r.value = parse_double_field(observations_csv, i + 1, f[3], "obs");
        if (r.value < 0.0)
            fail(observations_csv, i + 1, "negative observation");
        obs.push_back(std::move(r));
    }

    auto build = [&](const std::set<std::string>& excluded) {
        ForecastDataset d;
        for (const auto& s : sites)
            if (!excluded.count(s.id))
                d.add_station(s);
        for (const auto& fc : forecasts)
            if (!excluded.count(fc.station_id)) {
                try {
                    d.add_forecast(fc);
                } catch (const Error& e) {
                    throw DataError(forecasts_csv.string() + ": " + e.what());
                }
            }
        for (const auto& r : obs)
            if (!excluded.count(r.id)) {
                try {
                    d.add_observation(r.id, r.date, r.hour, r.value);
                } catch (const Error& e) {
                    throw DataError(observations_csv.string() + ": " + e.what());
                }
            }
        return d;
    };

    LoadResult result{build({}), {}};
    if (opt.min_days_per_year > 0 && result.data.observation_count() > 0) {
        Date lo = obs.front().date, hi = obs.front().date;
        for (const auto& r : obs) {
            lo = std::min(lo, r.date);
            hi = std::max(hi, r.date);
        }
        const int year_lo = int(std::chrono::year_month_day{lo}.year());
        const int year_hi = int(std::chrono::year_month_day{hi}.year());
        const auto counts = result.data.obs_days_per_year();
        std::set<std::string> excluded;
        for (const auto& s : sites) {
            const int idx = result.data.station_index(s.id);
            const auto it = counts.find(idx);
            for (int y = year_lo; y <= year_hi; ++y) {
                int n = 0;
                if (it != counts.end()) {
                    const auto yit = it->second.find(y);
                    if (yit != it->second.end())
                        n = yit->second;
                }
                if (n < opt.min_days_per_year) {
                    excluded.insert(s.id);
                    break;
                }
            }
        }
        if (excluded.size() == sites.size())
            throw DataError("station density rule excluded every station; "
                            "lower the threshold or pass 0 to disable it");
        if (!excluded.empty()) {
            result.data = build(excluded);
            result.excluded_stations.assign(excluded.begin(), excluded.end());
        }
    }
    return result;
}

void write_stations_csv(const fs::path& path,
                        const std::vector<Site>& stations) {
    std::string out = "station_id,x_km,y_km,wbar\n";
    for (const auto& s : stations) {
        out += s.id;
        out += ',';
        out += fmt_exact(s.x);
        out += ',';
        out += fmt_exact(s.y);
        out += ',';
        out += fmt_exact(s.wbar);
        out += '\n';
    }
    atomic_write_file(path, out);
}

namespace {

// Station-major, then date, then hour: a deterministic row order that
// matches the panel iteration used throughout.
template <typename Fn>
void for_each_key(const ForecastDataset& data, Fn&& fn) {
    if (data.forecast_count() == 0)
        return;
    const int nsta = static_cast<int>(data.stations().size());
    for (int s = 0; s < nsta; ++s)
        for (Date d = data.first_date(); d <= data.last_date();
             d += std::chrono::days{1})
            for (Hour h : all_hours)
                if (const EnsembleForecast* fc = data.forecast(s, d, h))
                    fn(s, d, h, *fc);
}

} // namespace

void write_forecasts_csv(const fs::path& path, const ForecastDataset& data) {
    std::string out = "station_id,date,hour";
    for (int k = 1; k <= data.member_count(); ++k)
        out += ",f" + std::to_string(k);
    out += '\n';
    for_each_key(data, [&](int, Date d, Hour h, const EnsembleForecast& fc) {
        out += fc.station_id;
        out += ',';
        out += format_date(d);
        out += ',';
        out += format_hour(h);
        for (double v : fc.members) {
            out += ',';
            out += fmt_exact(v);
        }
        out += '\n';
    });
    atomic_write_file(path, out);
}

void write_observations_csv(const fs::path& path, const ForecastDataset& data) {
    std::string out = "station_id,date,hour,obs\n";
    for_each_key(data, [&](int s, Date d, Hour h, const EnsembleForecast& fc) {
        out += fc.station_id;
        out += ',';
        out += format_date(d);
        out += ',';
        out += format_hour(h);
        out += ',';
        if (const auto y = data.observation(s, d, h))
            out += fmt_exact(*y);
        out += '\n';
    });
    atomic_write_file(path, out);
}

void write_local_params_csv(const fs::path& path, const EmosModel& model) {
    std::string out = "station_id,a,b,xi2\n";
    for (const auto& [id, p] : model.local) {
        out += id;
        out += ',';
        out += fmt_exact(p.a);
        out += ',';
        out += fmt_exact(p.b);
        out += ',';
        out += fmt_exact(p.xi2);
        out += '\n';
    }
    atomic_write_file(path, out);
}

void write_regional_params_csv(const fs::path& path, const EmosModel& model) {
    std::string out = "family,hour,window,c,d";
    for (std::size_t k = 1; k <= model.regional.weights.size(); ++k)
        out += ",w" + std::to_string(k);
    out += '\n';
    out += family_name(model.family);
    out += ',';
    out += format_hour(model.hour);
    out += ',';
    out += std::to_string(model.training_window_days);
    out += ',';
    out += fmt_exact(model.regional.c);
    out += ',';
    out += fmt_exact(model.regional.d);
    for (double w : model.regional.weights) {
        out += ',';
        out += fmt_exact(w);
    }
    out += '\n';
    atomic_write_file(path, out);
}

EmosModel read_model(const fs::path& local_csv, const fs::path& regional_csv) {
    EmosModel model;

    const auto rg_lines = read_lines(regional_csv);
    {
        const auto h = split_fields(rg_lines[0]);
        if (h.size() < 6 || h[0] != "family" || h[1] != "hour" ||
            h[2] != "window" || h[3] != "c" || h[4] != "d")
            fail(regional_csv, 1,
                 "expected header 'family,hour,window,c,d,w1..wm'");
        for (std::size_t k = 5; k < h.size(); ++k)
            if (h[k] != "w" + std::to_string(k - 4))
                fail(regional_csv, 1, "expected weight column w" +
                                          std::to_string(k - 4) + ", found '" +
                                          h[k] + "'");
        if (rg_lines.size() != 2)
            throw DataError(regional_csv.string() +
                            ": expected exactly one parameter row");
        const auto f = split_fields(rg_lines[1]);
        expect_field_count(regional_csv, 2, f, h.size());
        try {
            model.family = parse_family(f[0]);
            model.hour = parse_hour(f[1]);
        } catch (const Error& e) {
            fail(regional_csv, 2, e.what());
        }
        {
            int w = 0;
            auto [ptr, ec] = std::from_chars(f[2].data(),
                                             f[2].data() + f[2].size(), w);
            if (ec != std::errc{} || ptr != f[2].data() + f[2].size() || w < 1)
                fail(regional_csv, 2, "invalid window '" + f[2] + "'");
            model.training_window_days = w;
        }
        model.regional.c = parse_double_field(regional_csv, 2, f[3], "c");
        model.regional.d = parse_double_field(regional_csv, 2, f[4], "d");
        if (model.regional.c <= 0.0 || model.regional.d < 0.0)
            fail(regional_csv, 2, "variance coefficients out of range");
        double wsum = 0.0;
        for (std::size_t k = 5; k < f.size(); ++k) {
            const double w =
                parse_double_field(regional_csv, 2, f[k], "weight");
            if (w < 0.0)
                fail(regional_csv, 2, "negative member weight");
            model.regional.weights.push_back(w);
            wsum += w;
        }
        if (std::abs(wsum - 1.0) > 1e-6)
            fail(regional_csv, 2, "member weights must sum to 1");
    }

    const auto lc_lines = read_lines(local_csv);
    expect_header(local_csv, lc_lines[0], "station_id,a,b,xi2");
    for (std::size_t i = 1; i < lc_lines.size(); ++i) {
        const auto f = split_fields(lc_lines[i]);
        expect_field_count(local_csv, i + 1, f, 4);
        LocalParams p;
        p.station_id = f[0];
        p.a = parse_double_field(local_csv, i + 1, f[1], "a");
        p.b = parse_double_field(local_csv, i + 1, f[2], "b");
        p.xi2 = parse_double_field(local_csv, i + 1, f[3], "xi2");
        if (p.b < 0.0 || p.xi2 <= 0.0)
            fail(local_csv, i + 1, "local parameters out of range");
        if (!model.local.emplace(p.station_id, p).second)
            fail(local_csv, i + 1, "duplicate station '" + p.station_id + "'");
    }
    if (model.local.empty())
        throw DataError(local_csv.string() + ": no stations");
    return model;
}

void write_predictions_csv(const fs::path& path, Family family,
                           const std::vector<PredictionRow>& rows) {
    std::string out = "station_id,date,hour,family,mu,sigma2\n";
    for (const auto& r : rows) {
        out += r.station_id;
        out += ',';
        out += format_date(r.date);
        out += ',';
        out += format_hour(r.hour);
        out += ',';
        out += family_name(family);
        out += ',';
        out += fmt_exact(r.mu);
        out += ',';
        out += fmt_exact(r.sigma2);
        out += '\n';
    }
    atomic_write_file(path, out);
}

void write_report_csv(const fs::path& path, const VerificationReport& report) {
    std::string out =
        "method,station_id,replicate,hour,n,avg_crps,pit_mean,pit_mad\n";
    for (const auto& r : report.rows) {
        out += r.method;
        out += ',';
        out += r.station_id;
        out += ',';
        if (r.replicate >= 0)
            out += std::to_string(r.replicate);
        out += ',';
        out += format_hour(r.hour);
        out += ',';
        out += std::to_string(r.n);
        out += ',';
        out += fmt_short(r.avg_crps);
        out += ',';
        out += fmt_short(r.pit_mean);
        out += ',';
        out += fmt_short(r.pit_mad);
        out += '\n';
    }
    atomic_write_file(path, out);
}

void write_pit_samples_csv(const fs::path& path,
                           const VerificationReport& report) {
    std::string out = "method,station_id,date,hour,pit\n";
    for (const auto& mp : report.pit_samples)
        for (const auto& s : mp.samples) {
            out += mp.method;
            out += ',';
            out += s.station_id;
            out += ',';
            out += format_date(s.date);
            out += ',';
            out += format_hour(s.hour);
            out += ',';
            out += fmt_short(s.pit);
            out += '\n';
        }
    atomic_write_file(path, out);
}

void write_skipped_csv(const fs::path& path,
                       const VerificationReport& report) {
    std::string out = "station_id,skipped_station_days\n";
    for (const auto& s : report.skipped) {
        out += s.station_id;
        out += ',';
        out += std::to_string(s.station_days);
        out += '\n';
    }
    atomic_write_file(path, out);
}

} // namespace gridcast
