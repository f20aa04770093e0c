#ifndef GRIDCAST_EMOS_HPP
#define GRIDCAST_EMOS_HPP

// Two-step ensemble post-processing: a simplified model fitted per
// station, then pooled member weights and variance coefficients fitted
// across all stations with the local parameters held fixed.

#include "gridcast/data.hpp"
#include "gridcast/distributions.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace gridcast {

struct TrainingPair {
    const EnsembleForecast* fc = nullptr;
    double obs = 0.0;
};

struct LocalParams {
    std::string station_id;
    double a = 0.0;   // additive bias, m/s
    double b = 1.0;   // multiplicative factor, >= 0
    double xi2 = 1.0; // local variance scale, >= eps
};

struct RegionalParams {
    std::vector<double> weights; // one per member, >= 0, sums to 1
    double c = 1.0;              // >= eps
    double d = 0.0;              // >= 0
};

struct EmosModel {
    Family family = Family::truncated_normal;
    Hour hour = Hour::h06;
    int training_window_days = 70;
    std::map<std::string, LocalParams> local;
    RegionalParams regional;
};

// Training pairs from the td calendar days immediately preceding
// target_date (exclusive) at the given hour.  Days with either the
// forecast or the observation missing are dropped.
std::vector<TrainingPair> assemble_training(const ForecastDataset& data,
                                            int station_idx, Date target_date,
                                            Hour hour, int td);

// Fits mu = a + b*f_mean, sigma2 = xi2 by mean-CRPS minimization.
// Returns nullopt (skip) when more than one third of the td requested
// pairs are missing.
std::optional<LocalParams> fit_local(std::string station_id,
                                     const std::vector<TrainingPair>& pairs,
                                     Family family, int td);

struct PooledPair {
    const EnsembleForecast* fc = nullptr;
    double obs = 0.0;
    const LocalParams* local = nullptr;
};

// Fits member weights and variance coefficients (w, c, d) over pooled
// station-days with local parameters fixed.
RegionalParams fit_regional(const std::vector<PooledPair>& pairs, Family family);

// Runs both steps over every station in the dataset.  Stations hit by
// the skip rule are absent from model.local.
EmosModel fit_emos(const ForecastDataset& data, Date target_date, Hour hour,
                   Family family, int td);

// Predictive distribution for one forecast:
//   mu = a + b * sum_k w_k f_k,  sigma2 = c*xi2 + d*S2.
// Throws a data error when the station has no local parameters.
PredictiveDistribution predict(const EmosModel& model,
                               const EnsembleForecast& fc);

} // namespace gridcast

#endif
