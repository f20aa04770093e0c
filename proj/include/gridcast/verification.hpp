#ifndef GRIDCAST_VERIFICATION_HPP
#define GRIDCAST_VERIFICATION_HPP

// Scoring and calibration diagnostics: probability integral transforms,
// average CRPS, per-station and pooled reports, and the holdout
// experiment that scores interpolated predictive distributions at
// stations withheld from the kriging step.

#include "gridcast/data.hpp"
#include "gridcast/distributions.hpp"
#include "gridcast/geostat.hpp"

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace gridcast {

// PIT of a continuous predictive distribution: cdf(d, y).
// y < 0 is a domain error.
double pit(const PredictiveDistribution& d, double y);

// Randomized PIT of a discrete ensemble: a uniform draw between the
// left and right limits at y of the empirical CDF over the members
// augmented with y itself, which is exactly uniform on [0,1] when y is
// exchangeable with the members.
double pit_ensemble(std::span<const double> members, double y,
                    std::mt19937_64& rng);

struct PitSample {
    std::string station_id;
    Date date;
    Hour hour;
    double pit; // in [0,1]
};

struct PitSummary {
    std::string station_id; // empty when the samples span stations
    std::size_t n = 0;
    double pit_mean = 0.0; // calibrated target 0.5
    double pit_mad = 0.0;  // mean |pit - 0.5|, calibrated target 0.25
};

// Empty input is a domain error.
PitSummary pit_summary(const std::vector<PitSample>& samples);

struct DistObs {
    PredictiveDistribution dist;
    double obs;
};
struct EnsObs {
    std::vector<double> members;
    double obs;
};

// Arithmetic mean of per-pair CRPS. Empty input is a domain error.
double average_crps(std::span<const DistObs> pairs);
double average_crps(std::span<const EnsObs> pairs);

// Draws k distinct station indices by rejection sampling until all
// pairwise distances are at least min_distance_km. Throws DataError
// when no admissible set is found within the attempt budget.
std::vector<int> sample_holdout(const std::vector<Site>& stations, int k,
                                double min_distance_km, std::mt19937_64& rng);

struct VerifyConfig {
    std::vector<Family> families = {Family::truncated_logistic};
    std::vector<Hour> hours = {Hour::h06, Hour::h12, Hour::h18};
    int training_window_days = 70;
    Date first_day{}; // verification period, inclusive
    Date last_day{};
    // Interpolation models to score in the holdout experiment; the
    // first configured family supplies the interpolated distributions.
    std::vector<CovKind> cov_kinds;
    int holdout_size = 0; // > 0 switches to the holdout experiment
    int holdout_reps = 0;
    double min_holdout_km = 20.0;
    std::uint64_t seed = 0;
};

struct ReportRow {
    std::string method;     // "raw-ensemble", "local-<family>", "interp-<kind>"
    std::string station_id; // empty = pooled over stations
    int replicate = -1;     // holdout replicate, -1 outside the experiment
    Hour hour = Hour::h06;
    std::size_t n = 0;
    double avg_crps = 0.0;
    double pit_mean = 0.0;
    double pit_mad = 0.0;
};

struct SkippedCount {
    std::string station_id;
    std::size_t station_days = 0;
};

struct MethodPits {
    std::string method;
    std::vector<PitSample> samples;
};

// Matched-sample scores: a station-day enters the averages only when
// every compared method produced a forecast for it.
struct VerificationReport {
    std::vector<ReportRow> rows;
    std::vector<MethodPits> pit_samples; // full-network mode only
    std::vector<SkippedCount> skipped;
    std::size_t skipped_station_days = 0;
};

VerificationReport build_report(const ForecastDataset& data,
                                const VerifyConfig& cfg);

} // namespace gridcast

#endif
