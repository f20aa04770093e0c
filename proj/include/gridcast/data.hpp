#ifndef GRIDCAST_DATA_HPP
#define GRIDCAST_DATA_HPP

// In-memory data model: dates, forecast hours, ensemble forecasts,
// the station/forecast/observation panels, and the covariate grid.

#include "gridcast/site.hpp"

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace gridcast {

using Date = std::chrono::sys_days;

// Parses strict ISO-8601 calendar dates (YYYY-MM-DD).
Date parse_date(const std::string& text);
std::string format_date(Date d);

enum class Hour { h06 = 6, h12 = 12, h18 = 18 };

inline constexpr Hour all_hours[3] = {Hour::h06, Hour::h12, Hour::h18};

Hour parse_hour(const std::string& text);
std::string format_hour(Hour h);

struct EnsembleForecast {
    std::string station_id;
    Date valid_date{};
    Hour hour = Hour::h06;
    std::vector<double> members;
    double ens_mean = 0.0;
    double ens_var = 0.0; // population form, divisor m

    // Validates members (finite, >= 0) and fills the derived moments.
    static EnsembleForecast make(std::string station_id, Date date, Hour hour,
                                 std::vector<double> members);
};

// Station network plus (station, date, hour)-keyed forecast and
// observation panels.  Member count m is constant across the dataset.
class ForecastDataset {
public:
    int add_station(const Site& s); // returns station index
    const std::vector<Site>& stations() const { return stations_; }
    const Site& station(int idx) const { return stations_[idx]; }
    int station_index(const std::string& id) const; // -1 if unknown

    void add_forecast(EnsembleForecast fc);
    void add_observation(const std::string& station_id, Date date, Hour hour,
                         double value);

    const EnsembleForecast* forecast(int station_idx, Date date, Hour hour) const;
    std::optional<double> observation(int station_idx, Date date, Hour hour) const;

    int member_count() const { return m_; }
    std::size_t forecast_count() const { return forecasts_.size(); }
    std::size_t observation_count() const { return observations_.size(); }

    // Inclusive date range over all forecasts; meaningless when empty.
    Date first_date() const { return first_; }
    Date last_date() const { return last_; }

    // Number of nonmissing observations per station and calendar year.
    // Used by the station-density exclusion rule.
    std::unordered_map<int, std::unordered_map<int, int>> obs_days_per_year() const;

private:
    static std::uint64_t key(int station_idx, Date date, Hour hour);

    std::vector<Site> stations_;
    std::unordered_map<std::string, int> index_;
    std::unordered_map<std::uint64_t, EnsembleForecast> forecasts_;
    std::unordered_map<std::uint64_t, double> observations_;
    int m_ = 0;
    Date first_{}, last_{};
};

// Regular grid of the w-bar covariate (and of gridded outputs).
// Row-major values, x varying fastest.
struct CovariateGrid {
    int nx = 0, ny = 0;
    double x0 = 0.0, y0 = 0.0;
    double dx = 1.0, dy = 1.0;
    std::vector<double> values;

    double at(int ix, int iy) const { return values[iy * nx + ix]; }
    double x_of(int ix) const { return x0 + ix * dx; }
    double y_of(int iy) const { return y0 + iy * dy; }
    bool contains(double x, double y) const;
};

// Standard bilinear interpolation; throws for points outside the grid
// bounding box (no extrapolation).
double bilinear(const CovariateGrid& grid, double x, double y);

} // namespace gridcast

#endif
