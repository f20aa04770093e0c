#include "gridcast/data.hpp"
#include "gridcast/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>

namespace gridcast {

Date parse_date(const std::string& text) {
    // Strict YYYY-MM-DD.
    if (text.size() != 10 || text[4] != '-' || text[7] != '-')
        throw DataError("bad date '" + text + "' (expected YYYY-MM-DD)");
    int y = 0, m = 0, d = 0;
    auto num = [&](int from, int to, int& out) {
        auto res = std::from_chars(text.data() + from, text.data() + to, out);
        return res.ec == std::errc() && res.ptr == text.data() + to;
    };
    if (!num(0, 4, y) || !num(5, 7, m) || !num(8, 10, d))
        throw DataError("bad date '" + text + "' (expected YYYY-MM-DD)");
    const std::chrono::year_month_day ymd{std::chrono::year{y},
                                          std::chrono::month{unsigned(m)},
                                          std::chrono::day{unsigned(d)}};
    if (!ymd.ok())
        throw DataError("invalid calendar date '" + text + "'");
    return std::chrono::sys_days{ymd};
}

std::string format_date(Date d) {
    const std::chrono::year_month_day ymd{d};
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", int(ymd.year()),
                  unsigned(ymd.month()), unsigned(ymd.day()));
    return buf;
}

Hour parse_hour(const std::string& text) {
    if (text == "06" || text == "6") return Hour::h06;
    if (text == "12") return Hour::h12;
    if (text == "18") return Hour::h18;
    throw DataError("bad forecast hour '" + text + "' (expected 06, 12 or 18)");
}

std::string format_hour(Hour h) {
    switch (h) {
    case Hour::h06: return "06";
    case Hour::h12: return "12";
    case Hour::h18: return "18";
    }
    throw InvalidArgument("unknown hour");
}

EnsembleForecast EnsembleForecast::make(std::string station_id, Date date,
                                        Hour hour, std::vector<double> members) {
    if (members.empty())
        throw DataError("forecast for " + station_id + " has no members");
    for (double v : members) {
        if (!std::isfinite(v) || v < 0.0)
            throw DataError("forecast member for " + station_id + " on " +
                            format_date(date) + " is negative or non-finite");
    }
    // Accumulated as sum of v/m so that a uniformly weighted dot
    // product over the members reproduces the mean bit for bit.
    const double inv_m = 1.0 / static_cast<double>(members.size());
    double mean = 0.0;
    for (double v : members) mean += v * inv_m;
    double var = 0.0;
    for (double v : members) var += (v - mean) * (v - mean);
    var /= static_cast<double>(members.size());
    EnsembleForecast fc;
    fc.station_id = std::move(station_id);
    fc.valid_date = date;
    fc.hour = hour;
    fc.members = std::move(members);
    fc.ens_mean = mean;
    fc.ens_var = var;
    return fc;
}

std::uint64_t ForecastDataset::key(int station_idx, Date date, Hour hour) {
    const std::int64_t serial = date.time_since_epoch().count();
    const std::uint64_t day = static_cast<std::uint64_t>(serial + (1 << 19));
    const std::uint64_t h = hour == Hour::h06 ? 0 : hour == Hour::h12 ? 1 : 2;
    return (static_cast<std::uint64_t>(station_idx) << 24) | (day << 2) | h;
}

int ForecastDataset::add_station(const Site& s) {
    if (s.id.empty()) throw DataError("station with empty id");
    if (!std::isfinite(s.x) || !std::isfinite(s.y))
        throw DataError("station " + s.id + " has non-finite coordinates");
    if (!(s.wbar > 0.0))
        throw DataError("station " + s.id + " needs positive mean wind speed");
    auto [it, inserted] = index_.emplace(s.id, static_cast<int>(stations_.size()));
    if (!inserted)
        throw DataError("duplicate station id " + s.id);
    stations_.push_back(s);
    return it->second;
}

int ForecastDataset::station_index(const std::string& id) const {
    auto it = index_.find(id);
    return it == index_.end() ? -1 : it->second;
}

void ForecastDataset::add_forecast(EnsembleForecast fc) {
    const int idx = station_index(fc.station_id);
    if (idx < 0)
        throw DataError("forecast references unknown station " + fc.station_id);
    const int m = static_cast<int>(fc.members.size());
    if (m_ == 0) {
        m_ = m;
    } else if (m != m_) {
        throw DataError("forecast for " + fc.station_id + " on " +
                        format_date(fc.valid_date) + " has " + std::to_string(m) +
                        " members, expected " + std::to_string(m_));
    }
    if (forecasts_.empty()) {
        first_ = last_ = fc.valid_date;
    } else {
        first_ = std::min(first_, fc.valid_date);
        last_ = std::max(last_, fc.valid_date);
    }
    const std::uint64_t k = key(idx, fc.valid_date, fc.hour);
    if (!forecasts_.emplace(k, std::move(fc)).second)
        throw DataError("duplicate forecast row");
}

void ForecastDataset::add_observation(const std::string& station_id, Date date,
                                      Hour hour, double value) {
    const int idx = station_index(station_id);
    if (idx < 0)
        throw DataError("observation references unknown station " + station_id);
    if (!std::isfinite(value) || value < 0.0)
        throw DataError("observation for " + station_id + " on " +
                        format_date(date) + " is negative or non-finite");
    if (!observations_.emplace(key(idx, date, hour), value).second)
        throw DataError("duplicate observation row");
}

const EnsembleForecast* ForecastDataset::forecast(int station_idx, Date date,
                                                  Hour hour) const {
    auto it = forecasts_.find(key(station_idx, date, hour));
    return it == forecasts_.end() ? nullptr : &it->second;
}

std::optional<double> ForecastDataset::observation(int station_idx, Date date,
                                                   Hour hour) const {
    auto it = observations_.find(key(station_idx, date, hour));
    if (it == observations_.end()) return std::nullopt;
    return it->second;
}

std::unordered_map<int, std::unordered_map<int, int>>
ForecastDataset::obs_days_per_year() const {
    // Count distinct (date) per station/year with at least one
    // nonmissing observation at any hour.
    std::unordered_map<std::uint64_t, bool> seen;
    std::unordered_map<int, std::unordered_map<int, int>> counts;
    for (const auto& [k, v] : observations_) {
        (void)v;
        const std::uint64_t day_key = k >> 2; // strip hour
        if (seen.emplace(day_key, true).second) {
            const int idx = static_cast<int>(k >> 24);
            const std::int64_t serial =
                static_cast<std::int64_t>((k >> 2) & ((1 << 22) - 1)) - (1 << 19);
            const std::chrono::year_month_day ymd{
                Date{std::chrono::days{serial}}};
            counts[idx][int(ymd.year())] += 1;
        }
    }
    return counts;
}

bool CovariateGrid::contains(double x, double y) const {
    return x >= x0 && y >= y0 && x <= x0 + (nx - 1) * dx && y <= y0 + (ny - 1) * dy;
}

double bilinear(const CovariateGrid& grid, double x, double y) {
    if (grid.nx < 2 || grid.ny < 2)
        throw DataError("covariate grid needs at least 2x2 nodes");
    if (!grid.contains(x, y))
        throw DataError("point outside covariate grid");
    const double fx = (x - grid.x0) / grid.dx;
    const double fy = (y - grid.y0) / grid.dy;
    int ix = std::min(static_cast<int>(fx), grid.nx - 2);
    int iy = std::min(static_cast<int>(fy), grid.ny - 2);
    const double tx = fx - ix;
    const double ty = fy - iy;
    const double v00 = grid.at(ix, iy), v10 = grid.at(ix + 1, iy);
    const double v01 = grid.at(ix, iy + 1), v11 = grid.at(ix + 1, iy + 1);
    return (1.0 - tx) * (1.0 - ty) * v00 + tx * (1.0 - ty) * v10 +
           (1.0 - tx) * ty * v01 + tx * ty * v11;
}

} // namespace gridcast
