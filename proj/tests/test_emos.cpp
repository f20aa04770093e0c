#include "gridcast/emos.hpp"
#include "gridcast/errors.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

using namespace gridcast;

namespace {

double uniform01(std::mt19937_64& rng) {
    // Strictly inside (0,1) so quantile transforms stay defined.
    return (static_cast<double>(rng() >> 11) + 0.5) * 0x1p-53;
}

// Quantile-transform sample from a predictive distribution.
double sample(const PredictiveDistribution& d, std::mt19937_64& rng) {
    return quantile(d, uniform01(rng));
}

// Pooled mean CRPS of the full model, used to probe fitted objectives.
double pooled_crps(const std::vector<PooledPair>& pairs, Family family,
                   const RegionalParams& rp) {
    double total = 0.0;
    for (const auto& p : pairs) {
        double wf = 0.0;
        for (std::size_t k = 0; k < rp.weights.size(); ++k)
            wf += rp.weights[k] * p.fc->members[k];
        const double mu = p.local->a + p.local->b * wf;
        const double s2 = rp.c * p.local->xi2 + rp.d * p.fc->ens_var;
        total += crps(make_distribution(family, mu, s2), p.obs);
    }
    return total / static_cast<double>(pairs.size());
}

} // namespace

TEST_SUITE("emos") {

TEST_CASE("training windows cover the td days before the target date") {
    ForecastDataset ds;
    ds.add_station({"A", 0.0, 0.0, 4.0});
    const Date target = parse_date("2015-03-12");
    // Forecasts and observations on every one of the 80 days before the
    // target plus the target itself (which must be excluded).
    for (int back = 0; back <= 80; ++back) {
        const Date day = target - std::chrono::days{back};
        ds.add_forecast(EnsembleForecast::make("A", day, Hour::h12,
                                               {3.0, 4.0, 5.0}));
        ds.add_observation("A", day, Hour::h12, 4.0 + 0.01 * back);
    }
    auto pairs = assemble_training(ds, 0, target, Hour::h12, 70);
    CHECK(pairs.size() == 70);
    // Oldest day first, newest (target-1) last; target itself excluded.
    CHECK(pairs.front().fc->valid_date == target - std::chrono::days{70});
    CHECK(pairs.back().fc->valid_date == target - std::chrono::days{1});
    CHECK(pairs.back().obs == doctest::Approx(4.01));

    auto pairs30 = assemble_training(ds, 0, target, Hour::h12, 30);
    CHECK(pairs30.size() == 30);

    // No data at another hour.
    CHECK(assemble_training(ds, 0, target, Hour::h06, 70).empty());
    CHECK_THROWS_AS(assemble_training(ds, 0, target, Hour::h12, 0),
                    InvalidArgument);
}

TEST_CASE("days with a missing side are dropped from the window") {
    ForecastDataset ds;
    ds.add_station({"A", 0.0, 0.0, 4.0});
    const Date target = parse_date("2015-03-12");
    for (int back = 1; back <= 70; ++back) {
        const Date day = target - std::chrono::days{back};
        // Drop 5 forecasts and 5 observations on disjoint days.
        if (back % 14 != 1)
            ds.add_forecast(EnsembleForecast::make("A", day, Hour::h06,
                                                   {2.0, 3.0, 4.0}));
        if (back % 14 != 2) ds.add_observation("A", day, Hour::h06, 3.0);
    }
    auto pairs = assemble_training(ds, 0, target, Hour::h06, 70);
    CHECK(pairs.size() == 60);
}

TEST_CASE("the skip rule fires when over a third of pairs are missing") {
    std::mt19937_64 rng(7);
    auto make_pairs = [&](int n) {
        std::vector<EnsembleForecast> fcs;
        fcs.reserve(n);
        for (int i = 0; i < n; ++i)
            fcs.push_back(EnsembleForecast::make(
                "A", parse_date("2015-01-01") + std::chrono::days{i}, Hour::h06,
                {4.0 + 0.1 * i, 5.0, 6.0}));
        return fcs;
    };

    // td=70 with 25 present: 45 missing, well over a third.
    auto fcs25 = make_pairs(25);
    std::vector<TrainingPair> pairs25;
    for (auto& fc : fcs25) pairs25.push_back({&fc, fc.ens_mean + uniform01(rng)});
    CHECK_FALSE(fit_local("A", pairs25, Family::truncated_logistic, 70).has_value());

    // Boundary: missing must strictly exceed td/3 to skip.
    auto fcs20 = make_pairs(20);
    std::vector<TrainingPair> pairs20;
    for (auto& fc : fcs20) pairs20.push_back({&fc, fc.ens_mean + uniform01(rng)});
    CHECK(fit_local("A", pairs20, Family::truncated_logistic, 30).has_value());
    CHECK_FALSE(fit_local("A", pairs20, Family::truncated_logistic, 31).has_value());
}

TEST_CASE("local fit recovers known truncated-logistic parameters") {
    // Truth: mu = 1 + 0.8 * f_mean, sigma2 = 1.  Five replicate windows
    // of 500 days each; the median error per parameter must stay small.
    std::vector<double> err_a, err_b, err_xi2;
    for (unsigned seed = 42; seed < 47; ++seed) {
        std::mt19937_64 rng(seed);
        const int n = 500;
        std::vector<EnsembleForecast> fcs;
        fcs.reserve(n);
        std::vector<double> obs(n);
        for (int i = 0; i < n; ++i) {
            const double base = 2.0 + 10.0 * uniform01(rng);
            std::vector<double> members = {base - 0.4, base - 0.1, base + 0.2,
                                           base + 0.3};
            fcs.push_back(EnsembleForecast::make(
                "A", parse_date("2014-01-01") + std::chrono::days{i}, Hour::h12,
                std::move(members)));
            const double mu = 1.0 + 0.8 * fcs.back().ens_mean;
            obs[i] = sample(
                make_distribution(Family::truncated_logistic, mu, 1.0), rng);
        }
        std::vector<TrainingPair> pairs;
        for (int i = 0; i < n; ++i) pairs.push_back({&fcs[i], obs[i]});

        auto lp = fit_local("A", pairs, Family::truncated_logistic, n);
        REQUIRE(lp.has_value());
        CHECK(lp->station_id == "A");
        err_a.push_back(std::abs(lp->a - 1.0));
        err_b.push_back(std::abs(lp->b - 0.8));
        err_xi2.push_back(std::abs(lp->xi2 - 1.0));
    }
    auto median = [](std::vector<double> v) {
        std::sort(v.begin(), v.end());
        return v[v.size() / 2];
    };
    CHECK(median(err_a) <= 0.1);
    CHECK(median(err_b) <= 0.1);
    CHECK(median(err_xi2) <= 0.1);
}

TEST_CASE("a perfect forecast drives the local fit to a sharp identity") {
    std::mt19937_64 rng(3);
    const int n = 120;
    std::vector<EnsembleForecast> fcs;
    fcs.reserve(n);
    for (int i = 0; i < n; ++i) {
        const double base = 3.0 + 6.0 * uniform01(rng);
        fcs.push_back(EnsembleForecast::make(
            "A", parse_date("2014-01-01") + std::chrono::days{i}, Hour::h06,
            {base - 0.2, base, base + 0.2}));
    }
    std::vector<TrainingPair> pairs;
    for (auto& fc : fcs) pairs.push_back({&fc, fc.ens_mean});

    auto lp = fit_local("A", pairs, Family::truncated_logistic, n);
    REQUIRE(lp.has_value());
    CHECK(std::abs(lp->a) <= 1e-3);
    CHECK(std::abs(lp->b - 1.0) <= 1e-3);
    CHECK(lp->xi2 <= 1e-6); // pinned at the lower bound
}

TEST_CASE("gamma local fit keeps the mean positive") {
    std::mt19937_64 rng(11);
    const int n = 200;
    std::vector<EnsembleForecast> fcs;
    fcs.reserve(n);
    std::vector<double> obs(n);
    for (int i = 0; i < n; ++i) {
        const double base = 1.0 + 8.0 * uniform01(rng);
        fcs.push_back(EnsembleForecast::make(
            "A", parse_date("2014-01-01") + std::chrono::days{i}, Hour::h18,
            {base, base + 0.5, base + 1.0}));
        const double mu = 0.5 + 0.9 * fcs.back().ens_mean;
        obs[i] = sample(make_distribution(Family::gamma_mv, mu, 1.5), rng);
    }
    std::vector<TrainingPair> pairs;
    for (int i = 0; i < n; ++i) pairs.push_back({&fcs[i], obs[i]});

    auto lp = fit_local("A", pairs, Family::gamma_mv, n);
    REQUIRE(lp.has_value());
    CHECK(lp->a >= 1e-8);
    CHECK(lp->b >= 0.0);
    CHECK(lp->xi2 >= 1e-8);
    CHECK(std::abs(lp->a - 0.5) <= 0.25);
    CHECK(std::abs(lp->b - 0.9) <= 0.1);
}

TEST_CASE("regional fit upweights the informative member") {
    // Member 1 carries the signal; members 2..5 are exchangeable noise.
    std::mt19937_64 rng(99);
    const int n = 400;
    LocalParams lp{"A", 0.0, 1.0, 1.0};
    std::vector<EnsembleForecast> fcs;
    fcs.reserve(n);
    std::vector<double> obs(n);
    for (int i = 0; i < n; ++i) {
        const double signal = 2.0 + 8.0 * uniform01(rng);
        std::vector<double> members = {signal, 2.0 + 8.0 * uniform01(rng),
                                       2.0 + 8.0 * uniform01(rng),
                                       2.0 + 8.0 * uniform01(rng),
                                       2.0 + 8.0 * uniform01(rng)};
        fcs.push_back(EnsembleForecast::make(
            "A", parse_date("2014-01-01") + std::chrono::days{i}, Hour::h12,
            std::move(members)));
        obs[i] = sample(
            make_distribution(Family::truncated_logistic, signal, 1.0), rng);
    }
    std::vector<PooledPair> pairs;
    for (int i = 0; i < n; ++i) pairs.push_back({&fcs[i], obs[i], &lp});

    RegionalParams rp = fit_regional(pairs, Family::truncated_logistic);
    REQUIRE(rp.weights.size() == 5);
    CHECK(rp.weights[0] > 0.5);
    double rest = 0.0;
    for (int k = 1; k < 5; ++k) rest += rp.weights[k];
    CHECK(rest < 0.5);
    // Simplex invariants.
    double wsum = 0.0;
    for (double w : rp.weights) {
        CHECK(w >= 0.0);
        wsum += w;
    }
    CHECK(std::abs(wsum - 1.0) <= 1e-12);
    CHECK(rp.c >= 1e-8);
    CHECK(rp.d >= 0.0);
}

TEST_CASE("regional fit finds d near zero on homoscedastic data") {
    // Fixed member offsets make the ensemble spread vary while carrying
    // no information about the (constant) predictive variance.
    std::mt19937_64 rng(1234);
    const int n = 4000;
    LocalParams lp{"A", 0.0, 1.0, 1.0};
    const double off[5] = {-2.0, -1.0, 0.0, 1.0, 2.0};
    std::vector<EnsembleForecast> fcs;
    fcs.reserve(n);
    std::vector<double> obs(n);
    for (int i = 0; i < n; ++i) {
        const double signal = 4.0 + 6.0 * uniform01(rng);
        // Two well-separated spread regimes pin down (c, d) sharply.
        const double tau = (i % 2 == 0) ? 0.5 : 2.0;
        std::vector<double> members(5);
        for (int k = 0; k < 5; ++k) members[k] = signal + tau * off[k];
        fcs.push_back(EnsembleForecast::make(
            "A", parse_date("2014-01-01") + std::chrono::days{i}, Hour::h12,
            std::move(members)));
        obs[i] = sample(
            make_distribution(Family::truncated_logistic, signal, 1.0), rng);
    }
    std::vector<PooledPair> pairs;
    for (int i = 0; i < n; ++i) pairs.push_back({&fcs[i], obs[i], &lp});

    RegionalParams rp = fit_regional(pairs, Family::truncated_logistic);
    CHECK(std::abs(rp.d) <= 0.1);
    CHECK(std::abs(rp.c - 1.0) <= 0.1);
}

TEST_CASE("exchangeable members leave the objective flat at uniform weights") {
    std::mt19937_64 rng(555);
    const int n = 1200;
    LocalParams lp{"A", 0.0, 1.0, 1.0};
    std::vector<EnsembleForecast> fcs;
    fcs.reserve(n);
    std::vector<double> obs(n);
    for (int i = 0; i < n; ++i) {
        const double signal = 3.0 + 7.0 * uniform01(rng);
        std::vector<double> members(4);
        // Member noise well below the predictive spread, so no weight
        // vector can beat another by reshaping the noise sum.
        for (auto& f : members) f = signal + 0.12 * (uniform01(rng) - 0.5);
        fcs.push_back(EnsembleForecast::make(
            "A", parse_date("2014-01-01") + std::chrono::days{i}, Hour::h12,
            std::move(members)));
        obs[i] = sample(
            make_distribution(Family::truncated_logistic, signal, 1.0), rng);
    }
    std::vector<PooledPair> pairs;
    for (int i = 0; i < n; ++i) pairs.push_back({&fcs[i], obs[i], &lp});

    RegionalParams rp = fit_regional(pairs, Family::truncated_logistic);
    RegionalParams uniform = rp;
    std::fill(uniform.weights.begin(), uniform.weights.end(), 0.25);
    const double f_fit = pooled_crps(pairs, Family::truncated_logistic, rp);
    const double f_uni = pooled_crps(pairs, Family::truncated_logistic, uniform);
    CHECK(std::abs(f_fit - f_uni) <= 1e-3);
}

TEST_CASE("the regional fit never loses to the uniform simplified start") {
    // Small, noisy pooled sample where overfitting pressure is real.
    std::mt19937_64 rng(31);
    const int n = 40;
    LocalParams lp{"A", 0.2, 0.9, 0.8};
    std::vector<EnsembleForecast> fcs;
    fcs.reserve(n);
    std::vector<double> obs(n);
    for (int i = 0; i < n; ++i) {
        const double signal = 2.0 + 9.0 * uniform01(rng);
        std::vector<double> members(6);
        for (auto& f : members) f = signal + 2.0 * (uniform01(rng) - 0.5);
        fcs.push_back(EnsembleForecast::make(
            "A", parse_date("2014-01-01") + std::chrono::days{i}, Hour::h12,
            std::move(members)));
        obs[i] = sample(
            make_distribution(Family::truncated_normal,
                              0.2 + 0.9 * fcs.back().ens_mean, 0.8),
            rng);
    }
    std::vector<PooledPair> pairs;
    for (int i = 0; i < n; ++i) pairs.push_back({&fcs[i], obs[i], &lp});

    RegionalParams rp = fit_regional(pairs, Family::truncated_normal);
    RegionalParams ref;
    ref.weights.assign(6, 1.0 / 6.0);
    ref.c = 1.0;
    ref.d = 0.0;
    const double f_fit = pooled_crps(pairs, Family::truncated_normal, rp);
    const double f_ref = pooled_crps(pairs, Family::truncated_normal, ref);
    CHECK(f_fit <= f_ref + 1e-12);
}

TEST_CASE("uniform weights with c=1, d=0 reproduce the simplified model") {
    EmosModel model;
    model.family = Family::truncated_logistic;
    model.local.emplace("A", LocalParams{"A", 0.7, 1.1, 2.3});
    model.regional.weights.assign(4, 1.0 / 4.0);
    model.regional.c = 1.0;
    model.regional.d = 0.0;

    auto fc = EnsembleForecast::make("A", parse_date("2015-05-05"), Hour::h06,
                                     {1.7, 3.9, 4.45, 8.13});
    auto full = predict(model, fc);
    auto simplified = make_distribution(Family::truncated_logistic,
                                        0.7 + 1.1 * fc.ens_mean, 2.3);
    // Bit-for-bit identical parameters, not merely close.
    const auto& a = std::get<TruncatedLogistic>(full);
    const auto& b = std::get<TruncatedLogistic>(simplified);
    CHECK(a.mu == b.mu);
    CHECK(a.sigma2 == b.sigma2);
}

TEST_CASE("prediction follows the fitted regression exactly") {
    EmosModel model;
    model.family = Family::truncated_normal;
    model.local.emplace("A", LocalParams{"A", 0.0, 1.0, 2.0});
    model.regional.weights.assign(4, 0.25);
    model.regional.c = 1.0;
    model.regional.d = 0.0;

    auto fc = EnsembleForecast::make("A", parse_date("2015-05-05"), Hour::h06,
                                     {2.0, 2.0, 4.0, 4.0});
    auto d1 = std::get<TruncatedNormal>(predict(model, fc));
    CHECK(d1.mu == doctest::Approx(3.0));
    CHECK(d1.sigma2 == doctest::Approx(2.0));

    // Degenerate climatological mean: b = 0.
    model.local.at("A").a = 1.0;
    model.local.at("A").b = 0.0;
    auto d2 = std::get<TruncatedNormal>(predict(model, fc));
    CHECK(d2.mu == doctest::Approx(1.0));

    // Variance driven by the ensemble spread alone.
    model.local.at("A").a = 0.0;
    model.local.at("A").b = 1.0;
    model.regional.c = 1e-8;
    model.regional.d = 1.0;
    auto d3 = std::get<TruncatedNormal>(predict(model, fc));
    CHECK(d3.mu == doctest::Approx(3.0));
    CHECK(d3.sigma2 == doctest::Approx(1.0).epsilon(1e-6)); // S2 = 1

    // Unknown station routes to an error.
    auto other = EnsembleForecast::make("Z", parse_date("2015-05-05"),
                                        Hour::h06, {1.0, 2.0, 3.0, 4.0});
    CHECK_THROWS_AS(predict(model, other), DataError);
}

TEST_CASE("permuting members together with weights leaves predictions alone") {
    EmosModel model;
    model.family = Family::truncated_logistic;
    model.local.emplace("A", LocalParams{"A", 0.4, 0.95, 1.7});
    model.regional.weights = {0.4, 0.3, 0.2, 0.1};
    model.regional.c = 1.2;
    model.regional.d = 0.3;

    auto fc = EnsembleForecast::make("A", parse_date("2015-05-05"), Hour::h12,
                                     {2.5, 3.5, 5.0, 7.0});
    auto base = std::get<TruncatedLogistic>(predict(model, fc));

    EmosModel perm = model;
    perm.regional.weights = {0.2, 0.1, 0.4, 0.3};
    auto fc2 = EnsembleForecast::make("A", parse_date("2015-05-05"), Hour::h12,
                                      {5.0, 7.0, 2.5, 3.5});
    auto swapped = std::get<TruncatedLogistic>(predict(perm, fc2));
    CHECK(swapped.mu == doctest::Approx(base.mu).epsilon(1e-12));
    CHECK(swapped.sigma2 == doctest::Approx(base.sigma2).epsilon(1e-12));
}

TEST_CASE("the two-step driver fits all stations and skips sparse ones") {
    std::mt19937_64 rng(2024);
    ForecastDataset ds;
    ds.add_station({"N1", 0.0, 0.0, 4.0});
    ds.add_station({"N2", 50.0, 10.0, 5.0});
    ds.add_station({"SPARSE", 20.0, 80.0, 4.5});
    const Date target = parse_date("2015-06-01");
    const int td = 40;
    for (int back = 1; back <= td; ++back) {
        const Date day = target - std::chrono::days{back};
        for (const char* id : {"N1", "N2"}) {
            const double signal = 3.0 + 6.0 * uniform01(rng);
            auto fc = EnsembleForecast::make(
                id, day, Hour::h12,
                {signal - 0.5, signal, signal + 0.2, signal + 0.6});
            const double mu = 0.5 + 0.9 * fc.ens_mean;
            ds.add_forecast(std::move(fc));
            ds.add_observation(
                id, day, Hour::h12,
                sample(make_distribution(Family::truncated_logistic, mu, 0.8),
                       rng));
        }
        // The sparse station only has data for a handful of days.
        if (back <= 10) {
            const double signal = 3.0 + 6.0 * uniform01(rng);
            auto fc = EnsembleForecast::make(
                "SPARSE", day, Hour::h12,
                {signal, signal + 0.1, signal + 0.2, signal + 0.3});
            ds.add_forecast(std::move(fc));
            ds.add_observation("SPARSE", day, Hour::h12, signal);
        }
    }

    EmosModel model =
        fit_emos(ds, target, Hour::h12, Family::truncated_logistic, td);
    CHECK(model.local.size() == 2);
    CHECK(model.local.count("N1") == 1);
    CHECK(model.local.count("N2") == 1);
    CHECK(model.local.count("SPARSE") == 0);
    CHECK(model.training_window_days == td);
    double wsum = 0.0;
    for (double w : model.regional.weights) wsum += w;
    CHECK(std::abs(wsum - 1.0) <= 1e-12);

    // Prediction for a fitted station works end to end.
    auto fc = EnsembleForecast::make("N1", target, Hour::h12,
                                     {4.0, 4.5, 5.0, 5.5});
    auto dist = predict(model, fc);
    CHECK(family_of(dist) == Family::truncated_logistic);
    CHECK(crps(dist, 4.8) >= 0.0);
}

} // TEST_SUITE
