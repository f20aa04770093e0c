#ifndef GRIDCAST_DATAIO_HPP
#define GRIDCAST_DATAIO_HPP

// File formats: the CSV panels (stations, forecasts, observations),
// fitted-parameter and verification CSVs, and the GCG1 binary grid
// container.  Writers go through a sibling temp file and an atomic
// rename so a crash never leaves a torn file behind.

#include "gridcast/data.hpp"
#include "gridcast/emos.hpp"
#include "gridcast/verification.hpp"

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace gridcast {

void atomic_write_file(const std::filesystem::path& path, std::string_view bytes);

// GCG1 layout, little-endian: magic "GCG1", int32 nx, int32 ny,
// float64 x0, y0, dx, dy, then nx*ny float64 values row-major with x
// varying fastest.  Values must be finite; require_positive adds the
// covariate-grid invariant (strictly positive values).
CovariateGrid read_grid(const std::filesystem::path& path,
                        bool require_positive = false);
void write_grid(const std::filesystem::path& path, const CovariateGrid& grid);

struct LoadOptions {
    // A station is excluded when some calendar year intersecting the
    // observation span has fewer nonmissing days than this; 0 disables.
    int min_days_per_year = 200;
};

struct LoadResult {
    ForecastDataset data;
    std::vector<std::string> excluded_stations; // density rule, sorted
};

// Reads the three panels.  stations.csv: station_id,x_km,y_km,wbar.
// forecasts.csv: station_id,date,hour,f1..fm (m fixed by the header).
// observations.csv: station_id,date,hour,obs with an empty obs field
// meaning missing.  Malformed input raises a data error naming the
// file and line.
LoadResult load_dataset(const std::filesystem::path& stations_csv,
                        const std::filesystem::path& forecasts_csv,
                        const std::filesystem::path& observations_csv,
                        const LoadOptions& opt = {});

void write_stations_csv(const std::filesystem::path& path,
                        const std::vector<Site>& stations);
void write_forecasts_csv(const std::filesystem::path& path,
                         const ForecastDataset& data);
// One row per forecast key; a missing observation is an empty field.
void write_observations_csv(const std::filesystem::path& path,
                            const ForecastDataset& data);

// Fitted-parameter files.  local.csv: station_id,a,b,xi2 (one row per
// station that survived the skip rule).  regional.csv: a single row
// family,hour,window,c,d,w1..wm.  Values round-trip bit-exactly.
void write_local_params_csv(const std::filesystem::path& path,
                            const EmosModel& model);
void write_regional_params_csv(const std::filesystem::path& path,
                               const EmosModel& model);
EmosModel read_model(const std::filesystem::path& local_csv,
                     const std::filesystem::path& regional_csv);

struct PredictionRow {
    std::string station_id;
    Date date{};
    Hour hour = Hour::h06;
    double mu = 0.0;
    double sigma2 = 0.0;
};

void write_predictions_csv(const std::filesystem::path& path, Family family,
                           const std::vector<PredictionRow>& rows);

void write_report_csv(const std::filesystem::path& path,
                      const VerificationReport& report);
void write_pit_samples_csv(const std::filesystem::path& path,
                           const VerificationReport& report);
void write_skipped_csv(const std::filesystem::path& path,
                       const VerificationReport& report);

} // namespace gridcast

#endif
