#include "gridcast/emos.hpp"
#include "gridcast/errors.hpp"
#include "gridcast/optimizer.hpp"
#include "gridcast/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace gridcast {

namespace {

constexpr double kEps = 1e-8;
constexpr double kInf = std::numeric_limits<double>::infinity();

double crps_for(Family f, double mu, double sigma2, double y) {
    switch (f) {
    case Family::truncated_normal: return crps_truncated_normal(mu, sigma2, y);
    case Family::gamma_mv: return crps_gamma(mu, sigma2, y);
    case Family::truncated_logistic: return crps_truncated_logistic(mu, sigma2, y);
    }
    throw InvalidArgument("unknown family");
}

OptimResult run_fit(const Objective& obj, std::vector<double> x0,
                    const Bounds& bounds) {
    OptimResult res = minimize_bounded(obj, std::move(x0), bounds, {});
    if (!std::isfinite(res.f))
        throw NumericalError("CRPS objective is not finite at the fitted point");
    return res;
}

} // namespace

std::vector<TrainingPair> assemble_training(const ForecastDataset& data,
                                            int station_idx, Date target_date,
                                            Hour hour, int td) {
    if (td < 1) throw InvalidArgument("training window must be at least 1 day");
    std::vector<TrainingPair> pairs;
    pairs.reserve(static_cast<std::size_t>(td));
    for (int back = td; back >= 1; --back) {
        const Date day = target_date - std::chrono::days{back};
        const EnsembleForecast* fc = data.forecast(station_idx, day, hour);
        if (!fc) continue;
        const auto obs = data.observation(station_idx, day, hour);
        if (!obs) continue;
        pairs.push_back({fc, *obs});
    }
    return pairs;
}

std::optional<LocalParams> fit_local(std::string station_id,
                                     const std::vector<TrainingPair>& pairs,
                                     Family family, int td) {
    if (td < 1) throw InvalidArgument("training window must be at least 1 day");
    const int missing = td - static_cast<int>(pairs.size());
    if (3 * missing > td) return std::nullopt;

    // Start at the raw ensemble mean with the residual variance.
    const double n = static_cast<double>(pairs.size());
    double rbar = 0.0;
    for (const auto& p : pairs) rbar += p.obs - p.fc->ens_mean;
    rbar /= n;
    double rvar = 0.0;
    for (const auto& p : pairs) {
        const double r = p.obs - p.fc->ens_mean - rbar;
        rvar += r * r;
    }
    rvar /= n;

    const bool gamma = family == Family::gamma_mv;
    std::vector<double> x0 = {gamma ? kEps : 0.0, 1.0, std::max(rvar, kEps)};
    Bounds bounds{{gamma ? kEps : -kInf, 0.0, kEps}, {kInf, kInf, kInf}};

    auto obj = [&](std::span<const double> x) {
        double total = 0.0;
        for (const auto& p : pairs)
            total += crps_for(family, x[0] + x[1] * p.fc->ens_mean, x[2], p.obs);
        return total / n;
    };
    OptimResult res = run_fit(obj, std::move(x0), bounds);

    LocalParams out;
    out.station_id = std::move(station_id);
    out.a = res.x[0];
    out.b = res.x[1];
    out.xi2 = res.x[2];
    return out;
}

RegionalParams fit_regional(const std::vector<PooledPair>& pairs, Family family) {
    if (pairs.empty())
        throw DataError("no pooled training pairs for the regional fit");
    const int m = static_cast<int>(pairs.front().fc->members.size());
    const double n = static_cast<double>(pairs.size());

    // x = (v_1..v_m, c, d); weights are v normalized inside the
    // objective so the optimizer only sees box constraints.
    auto eval = [&](std::span<const double> x) {
        double vsum = 0.0;
        for (int k = 0; k < m; ++k) vsum += x[k];
        if (vsum < 1e-12) return 1e300;
        const double c = x[m], d = x[m + 1];
        double total = 0.0;
        for (const auto& p : pairs) {
            double wf = 0.0;
            for (int k = 0; k < m; ++k) wf += x[k] * p.fc->members[k];
            wf /= vsum;
            const double mu = p.local->a + p.local->b * wf;
            const double sigma2 = c * p.local->xi2 + d * p.fc->ens_var;
            total += crps_for(family, mu, sigma2, p.obs);
        }
        return total / n;
    };

    std::vector<double> x0(static_cast<std::size_t>(m) + 2, 1.0 / m);
    x0[m] = 1.0;
    x0[m + 1] = 0.01;
    Bounds bounds{std::vector<double>(static_cast<std::size_t>(m) + 2, 0.0),
                  std::vector<double>(static_cast<std::size_t>(m) + 2, kInf)};
    bounds.lower[m] = kEps;
    OptimResult res = run_fit(eval, std::move(x0), bounds);

    // The fit must never be worse than the uniform-weight simplified
    // model (w = 1/m, c = 1, d = 0), which is feasible.
    std::vector<double> ref(static_cast<std::size_t>(m) + 2, 1.0 / m);
    ref[m] = 1.0;
    ref[m + 1] = 0.0;
    if (eval(ref) < res.f) res.x = ref;

    RegionalParams out;
    out.weights.assign(res.x.begin(), res.x.begin() + m);
    double vsum = 0.0;
    for (double v : out.weights) vsum += v;
    for (double& v : out.weights) v /= vsum;
    double wsum = 0.0;
    for (double v : out.weights) wsum += v;
    for (double& v : out.weights) v /= wsum; // second pass pins the sum to 1
    out.c = res.x[m];
    out.d = res.x[m + 1];
    return out;
}

EmosModel fit_emos(const ForecastDataset& data, Date target_date, Hour hour,
                   Family family, int td) {
    EmosModel model;
    model.family = family;
    model.hour = hour;
    model.training_window_days = td;

    const std::size_t nsta = data.stations().size();
    std::vector<std::vector<TrainingPair>> all_pairs(nsta);
    std::vector<std::optional<LocalParams>> fits(nsta);
    parallel_for(nsta, [&](std::size_t idx) {
        all_pairs[idx] = assemble_training(data, static_cast<int>(idx),
                                           target_date, hour, td);
        fits[idx] = fit_local(data.station(static_cast<int>(idx)).id,
                              all_pairs[idx], family, td);
    });

    std::map<std::string, std::vector<TrainingPair>> kept;
    for (std::size_t idx = 0; idx < nsta; ++idx) {
        if (!fits[idx]) continue;
        kept.emplace(fits[idx]->station_id, std::move(all_pairs[idx]));
        model.local.emplace(fits[idx]->station_id, std::move(*fits[idx]));
    }
    if (model.local.empty())
        throw DataError("every station was skipped for " +
                        format_date(target_date) + " " + format_hour(hour) +
                        " (insufficient training data)");

    std::vector<PooledPair> pooled;
    for (const auto& [id, lp] : model.local)
        for (const auto& p : kept[id])
            pooled.push_back({p.fc, p.obs, &lp});
    model.regional = fit_regional(pooled, family);
    return model;
}

PredictiveDistribution predict(const EmosModel& model,
                               const EnsembleForecast& fc) {
    auto it = model.local.find(fc.station_id);
    if (it == model.local.end())
        throw DataError("no local parameters for station " + fc.station_id);
    const LocalParams& lp = it->second;
    const RegionalParams& rp = model.regional;
    if (rp.weights.size() != fc.members.size())
        throw DataError("forecast member count does not match fitted weights");
    double wf = 0.0;
    for (std::size_t k = 0; k < rp.weights.size(); ++k)
        wf += rp.weights[k] * fc.members[k];
    const double mu = lp.a + lp.b * wf;
    const double sigma2 = rp.c * lp.xi2 + rp.d * fc.ens_var;
    return make_distribution(model.family, mu, sigma2);
}

} // namespace gridcast
