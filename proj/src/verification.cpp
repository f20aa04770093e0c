#include "gridcast/verification.hpp"

#include "gridcast/emos.hpp"
#include "gridcast/errors.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <utility>

namespace gridcast {

namespace {

double uniform01(std::mt19937_64& rng) {
    return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

// Unbiasedness is irrelevant here; what matters is that the sequence is
// fully determined by the engine state.
std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t n) {
    return rng() % n;
}

std::pair<double, double> dist_params(const PredictiveDistribution& d) {
    return std::visit(
        [](const auto& p) { return std::pair<double, double>(p.mu, p.sigma2); },
        d);
}

} // namespace

double pit(const PredictiveDistribution& d, double y) {
    if (!(y >= 0.0))
        throw InvalidArgument("pit: observation must be nonnegative");
    return cdf(d, y);
}

double pit_ensemble(std::span<const double> members, double y,
                    std::mt19937_64& rng) {
    if (members.empty())
        throw InvalidArgument("pit_ensemble: empty ensemble");
    if (!(y >= 0.0))
        throw InvalidArgument("pit_ensemble: observation must be nonnegative");
    // Empirical CDF of the members augmented with y itself; for a
    // continuous observation the jump at y then always has width
    // 1/(m+1), giving an exactly uniform PIT under exchangeability.
    // The member-only CDF would collapse to a point mass at #(f<y)/m.
    const double m1 = static_cast<double>(members.size()) + 1.0;
    double below = 0.0, at_or_below = 1.0; // y counts itself
    for (double f : members) {
        if (f < y) below += 1.0;
        if (f <= y) at_or_below += 1.0;
    }
    const double lo = below / m1;
    const double hi = at_or_below / m1;
    return lo + uniform01(rng) * (hi - lo);
}

PitSummary pit_summary(const std::vector<PitSample>& samples) {
    if (samples.empty()) throw InvalidArgument("pit_summary: empty input");
    PitSummary out;
    out.station_id = samples.front().station_id;
    out.n = samples.size();
    double mean = 0.0, mad = 0.0;
    for (const auto& s : samples) {
        mean += s.pit;
        mad += std::abs(s.pit - 0.5);
        if (s.station_id != out.station_id) out.station_id.clear();
    }
    out.pit_mean = mean / static_cast<double>(out.n);
    out.pit_mad = mad / static_cast<double>(out.n);
    return out;
}

double average_crps(std::span<const DistObs> pairs) {
    if (pairs.empty()) throw InvalidArgument("average_crps: empty sample");
    double acc = 0.0;
    for (const auto& p : pairs) acc += crps(p.dist, p.obs);
    return acc / static_cast<double>(pairs.size());
}

double average_crps(std::span<const EnsObs> pairs) {
    if (pairs.empty()) throw InvalidArgument("average_crps: empty sample");
    double acc = 0.0;
    for (const auto& p : pairs) acc += crps_ensemble(p.members, p.obs);
    return acc / static_cast<double>(pairs.size());
}

std::vector<int> sample_holdout(const std::vector<Site>& stations, int k,
                                double min_distance_km, std::mt19937_64& rng) {
    const int n = static_cast<int>(stations.size());
    if (k < 1) throw InvalidArgument("sample_holdout: k must be positive");
    if (k > n)
        throw DataError("sample_holdout: requested more stations than exist");

    std::vector<int> pool(n);
    const double min2 = min_distance_km * min_distance_km;
    for (int attempt = 0; attempt < 500; ++attempt) {
        for (int i = 0; i < n; ++i) pool[i] = i;
        // Partial Fisher-Yates: the first k entries are the candidate set.
        for (int i = 0; i < k; ++i)
            std::swap(pool[i], pool[i + static_cast<int>(bounded(
                                            rng, static_cast<std::uint64_t>(
                                                     n - i)))]);
        bool ok = true;
        for (int i = 0; i < k && ok; ++i)
            for (int j = i + 1; j < k; ++j) {
                const Site& a = stations[pool[i]];
                const Site& b = stations[pool[j]];
                const double ddx = a.x - b.x, ddy = a.y - b.y;
                if (ddx * ddx + ddy * ddy < min2) {
                    ok = false;
                    break;
                }
            }
        if (ok) {
            pool.resize(k);
            std::sort(pool.begin(), pool.end());
            return pool;
        }
    }
    throw DataError(
        "sample_holdout: no station subset satisfies the minimum distance "
        "after 500 attempts");
}

namespace {

struct DayCell {
    const EnsembleForecast* fc = nullptr;
    bool has_obs = false;
    double obs = 0.0;
    bool fitted = false; // local fit available for every family
    std::vector<PredictiveDistribution> dists;
    double mu = 0.0, s2 = 0.0; // lead-family predictive parameters
};

struct DayData {
    Date date{};
    bool ok = false; // every family's network fit succeeded
    std::vector<DayCell> cells;
};

struct Accum {
    std::vector<double> crps_vals;
    std::vector<PitSample> pits;
};

ReportRow make_row(const std::string& method, const std::string& station_id,
                   int replicate, Hour hour, const Accum& a) {
    ReportRow row;
    row.method = method;
    row.station_id = station_id;
    row.replicate = replicate;
    row.hour = hour;
    row.n = a.crps_vals.size();
    double acc = 0.0;
    for (double v : a.crps_vals) acc += v;
    row.avg_crps = acc / static_cast<double>(row.n);
    const PitSummary ps = pit_summary(a.pits);
    row.pit_mean = ps.pit_mean;
    row.pit_mad = ps.pit_mad;
    return row;
}

void validate_config(const ForecastDataset& data, const VerifyConfig& cfg) {
    if (cfg.families.empty())
        throw InvalidArgument("verify: at least one family is required");
    if (cfg.hours.empty())
        throw InvalidArgument("verify: at least one forecast hour is required");
    if (cfg.first_day > cfg.last_day)
        throw InvalidArgument("verify: verification period is empty");
    if (cfg.training_window_days < 1 || cfg.training_window_days > 365)
        throw InvalidArgument("verify: training window must be in [1, 365]");
    std::set<Family> fams(cfg.families.begin(), cfg.families.end());
    if (fams.size() != cfg.families.size())
        throw InvalidArgument("verify: duplicate family");
    std::set<CovKind> kinds(cfg.cov_kinds.begin(), cfg.cov_kinds.end());
    if (kinds.size() != cfg.cov_kinds.size())
        throw InvalidArgument("verify: duplicate covariance model");
    if (cfg.holdout_size < 0 || cfg.holdout_reps < 0)
        throw InvalidArgument("verify: negative holdout specification");
    if (cfg.holdout_size > 0 && cfg.holdout_reps == 0)
        throw InvalidArgument("verify: holdout size given without replicates");
    if (data.stations().empty()) throw DataError("verify: no stations");
}

// Fits every family's network model for one (day, hour) and collects the
// per-station forecast, observation, distributions and lead-family
// predictive parameters.
DayData build_day(const ForecastDataset& data, const VerifyConfig& cfg,
                  Date day, Hour hour) {
    const int nsta = static_cast<int>(data.stations().size());
    DayData out;
    out.date = day;
    out.cells.resize(nsta);

    std::vector<EmosModel> models;
    try {
        for (Family f : cfg.families)
            models.push_back(
                fit_emos(data, day, hour, f, cfg.training_window_days));
    } catch (const DataError&) {
        return out; // day unusable for every method
    } catch (const NumericalError&) {
        return out;
    }
    out.ok = true;

    for (int s = 0; s < nsta; ++s) {
        DayCell& cell = out.cells[s];
        cell.fc = data.forecast(s, day, hour);
        if (auto obs = data.observation(s, day, hour)) {
            cell.has_obs = true;
            cell.obs = *obs;
        }
        if (!cell.fc) continue;
        const std::string& id = data.station(s).id;
        bool fitted = true;
        for (const auto& m : models)
            if (!m.local.count(id)) {
                fitted = false;
                break;
            }
        if (!fitted) continue;
        try {
            for (const auto& m : models)
                cell.dists.push_back(predict(m, *cell.fc));
        } catch (const DataError&) {
            cell.dists.clear();
            continue;
        } catch (const NumericalError&) {
            cell.dists.clear();
            continue;
        }
        cell.fitted = true;
        std::tie(cell.mu, cell.s2) = dist_params(cell.dists.front());
    }
    return out;
}

} // namespace

VerificationReport build_report(const ForecastDataset& data,
                                const VerifyConfig& cfg) {
    validate_config(data, cfg);
    const int nsta = static_cast<int>(data.stations().size());
    std::mt19937_64 rng(cfg.seed);

    // Holdout sets are drawn first so their draws do not depend on the
    // scoring pass.
    std::vector<std::vector<int>> holdouts;
    for (int rep = 0; rep < (cfg.holdout_size > 0 ? cfg.holdout_reps : 0);
         ++rep)
        holdouts.push_back(sample_holdout(data.stations(), cfg.holdout_size,
                                          cfg.min_holdout_km, rng));

    VerificationReport report;
    std::vector<std::size_t> skipped(nsta, 0);

    std::vector<std::string> fam_methods;
    for (Family f : cfg.families) fam_methods.push_back("local-" + family_name(f));

    for (Hour hour : cfg.hours) {
        std::vector<DayData> days;
        for (Date day = cfg.first_day; day <= cfg.last_day;
             day += std::chrono::days(1))
            days.push_back(build_day(data, cfg, day, hour));

        for (const DayData& dd : days)
            for (int s = 0; s < nsta; ++s) {
                const DayCell& c = dd.cells[s];
                if (c.fc && c.has_obs && !(dd.ok && c.fitted)) ++skipped[s];
            }

        if (holdouts.empty()) {
            // Full-network scoring at every station with a matched sample.
            std::map<std::string, std::map<int, Accum>> per_method;
            for (const DayData& dd : days) {
                if (!dd.ok) continue;
                for (int s = 0; s < nsta; ++s) {
                    const DayCell& c = dd.cells[s];
                    if (!c.fc || !c.has_obs || !c.fitted) continue;
                    const std::string& id = data.station(s).id;
                    const double raw_pit = pit_ensemble(c.fc->members, c.obs, rng);
                    per_method["raw-ensemble"][s].crps_vals.push_back(
                        crps_ensemble(c.fc->members, c.obs));
                    per_method["raw-ensemble"][s].pits.push_back(
                        {id, dd.date, hour, raw_pit});
                    for (std::size_t f = 0; f < cfg.families.size(); ++f) {
                        Accum& a = per_method[fam_methods[f]][s];
                        a.crps_vals.push_back(crps(c.dists[f], c.obs));
                        a.pits.push_back({id, dd.date, hour, pit(c.dists[f], c.obs)});
                    }
                }
            }
            for (const auto& [method, stations] : per_method) {
                Accum pooled;
                for (const auto& [s, acc] : stations) {
                    report.rows.push_back(
                        make_row(method, data.station(s).id, -1, hour, acc));
                    pooled.crps_vals.insert(pooled.crps_vals.end(),
                                            acc.crps_vals.begin(),
                                            acc.crps_vals.end());
                    pooled.pits.insert(pooled.pits.end(), acc.pits.begin(),
                                       acc.pits.end());
                }
                report.rows.push_back(make_row(method, "", -1, hour, pooled));
                MethodPits mp;
                mp.method = method;
                mp.samples = std::move(pooled.pits);
                report.pit_samples.push_back(std::move(mp));
            }
        } else {
            // Holdout experiment: interpolate the lead family's predictive
            // parameters from the retained stations to the held-out ones.
            for (std::size_t rep = 0; rep < holdouts.size(); ++rep) {
                const std::vector<int>& held = holdouts[rep];
                std::vector<char> is_held(nsta, 0);
                for (int s : held) is_held[s] = 1;

                std::map<std::string, Accum> per_method;
                for (const DayData& dd : days) {
                    if (!dd.ok) continue;
                    // Interpolation targets: held-out stations scoreable by
                    // every method (matched sample).
                    std::vector<int> targets;
                    for (int s : held) {
                        const DayCell& c = dd.cells[s];
                        if (c.fc && c.has_obs && c.fitted) targets.push_back(s);
                    }
                    if (targets.empty()) continue;

                    KrigingField mu_f, ls_f;
                    mu_f.target = FieldKind::mu;
                    ls_f.target = FieldKind::log_sigma;
                    for (int s = 0; s < nsta; ++s) {
                        if (is_held[s]) continue;
                        const DayCell& c = dd.cells[s];
                        if (!c.fc || !c.fitted) continue;
                        mu_f.sites.push_back(data.station(s));
                        ls_f.sites.push_back(data.station(s));
                        mu_f.values.push_back(c.mu);
                        ls_f.values.push_back(0.5 * std::log(c.s2));
                    }

                    std::vector<Site> target_sites;
                    for (int s : targets) target_sites.push_back(data.station(s));

                    // One failed model drops the day for all methods.
                    std::map<CovKind, std::vector<GriddedPrediction>> interp;
                    try {
                        for (CovKind kind : cfg.cov_kinds) {
                            mu_f.model = CovarianceModel{kind, {}};
                            ls_f.model = CovarianceModel{kind, {}};
                            mu_f.model = reml_fit(mu_f);
                            ls_f.model = reml_fit(ls_f);
                            interp[kind] =
                                grid_predictive(mu_f, ls_f, target_sites);
                        }
                    } catch (const DataError&) {
                        continue;
                    } catch (const NumericalError&) {
                        continue;
                    }

                    for (std::size_t t = 0; t < targets.size(); ++t) {
                        const int s = targets[t];
                        const DayCell& c = dd.cells[s];
                        const std::string& id = data.station(s).id;
                        per_method["raw-ensemble"].crps_vals.push_back(
                            crps_ensemble(c.fc->members, c.obs));
                        per_method["raw-ensemble"].pits.push_back(
                            {id, dd.date, hour,
                             pit_ensemble(c.fc->members, c.obs, rng)});
                        Accum& loc = per_method[fam_methods.front()];
                        loc.crps_vals.push_back(crps(c.dists.front(), c.obs));
                        loc.pits.push_back(
                            {id, dd.date, hour, pit(c.dists.front(), c.obs)});
                        for (CovKind kind : cfg.cov_kinds) {
                            const GriddedPrediction& gp = interp[kind][t];
                            const auto d = make_distribution(
                                cfg.families.front(), gp.mu_hat,
                                std::max(gp.sigma_tilde2, 1e-10));
                            Accum& a = per_method["interp-" +
                                                  cov_kind_name(kind)];
                            a.crps_vals.push_back(crps(d, c.obs));
                            a.pits.push_back({id, dd.date, hour, pit(d, c.obs)});
                        }
                    }
                }
                for (const auto& [method, acc] : per_method)
                    report.rows.push_back(make_row(
                        method, "", static_cast<int>(rep), hour, acc));
            }
        }
    }

    if (report.rows.empty())
        throw DataError("verify: no matched station-days in the period");

    for (int s = 0; s < nsta; ++s) {
        report.skipped_station_days += skipped[s];
        if (skipped[s] > 0)
            report.skipped.push_back({data.station(s).id, skipped[s]});
    }

    std::sort(report.rows.begin(), report.rows.end(),
              [](const ReportRow& a, const ReportRow& b) {
                  return std::tie(a.hour, a.replicate, a.method, a.station_id) <
                         std::tie(b.hour, b.replicate, b.method, b.station_id);
              });
    return report;
}

} // namespace gridcast
