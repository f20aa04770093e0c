// Command-line driver: simulate / fit / predict / grid / verify.
// Exit codes: 0 success, 1 usage, 2 data, 3 numerical.

#include "gridcast/dataio.hpp"
#include "gridcast/emos.hpp"
#include "gridcast/errors.hpp"
#include "gridcast/geostat.hpp"
#include "gridcast/simulate.hpp"
#include "gridcast/verification.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <variant>
#include <vector>

namespace fs = std::filesystem;
using namespace gridcast;

namespace {

Hour cli_hour(const std::string& text) {
    return parse_hour(text.size() == 1 ? "0" + text : text);
}

std::pair<double, double> dist_params(const PredictiveDistribution& dist) {
    return std::visit(
        [](const auto& p) { return std::pair<double, double>(p.mu, p.sigma2); },
        dist);
}

ForecastDataset load_panels(const fs::path& dir, int min_days) {
    LoadResult r = load_dataset(dir / "stations.csv", dir / "forecasts.csv",
                                dir / "observations.csv", {min_days});
    if (!r.excluded_stations.empty()) {
        std::cerr << "gridcast: density rule excluded "
                  << r.excluded_stations.size() << " station(s):";
        for (const auto& id : r.excluded_stations)
            std::cerr << ' ' << id;
        std::cerr << '\n';
    }
    return std::move(r.data);
}

struct SimulateCmd {
    std::string out_dir;
    SimConfig cfg;
    std::string family = "trunc-logistic";
    std::string mode = "standard";

    void run() const {
        SimConfig c = cfg;
        c.family = parse_family(family);
        c.mode = parse_sim_mode(mode);
        const SimResult r = simulate(c);
        fs::create_directories(out_dir);
        const fs::path dir(out_dir);
        write_stations_csv(dir / "stations.csv", r.data.stations());
        write_forecasts_csv(dir / "forecasts.csv", r.data);
        write_observations_csv(dir / "observations.csv", r.data);
        write_grid(dir / "wbar.gcg1", r.wbar);
        write_truth_csv(dir / "truth.csv", r.truth);
        std::cout << "simulated " << r.data.stations().size() << " stations x "
                  << c.n_days << " days (" << sim_mode_name(c.mode) << ", "
                  << family_name(c.family) << ", seed " << c.seed << ") -> "
                  << out_dir << '\n';
    }
};

struct FitCmd {
    std::string data_dir, out_dir, date, hour;
    std::string family = "trunc-logistic";
    int window = 70;
    int min_days = 200;

    void run() const {
        const ForecastDataset data = load_panels(data_dir, min_days);
        const EmosModel model =
            fit_emos(data, parse_date(date), cli_hour(hour),
                     parse_family(family), window);
        if (model.local.empty())
            throw DataError("no station had enough training data before " +
                            date);
        fs::create_directories(out_dir);
        write_local_params_csv(fs::path(out_dir) / "local.csv", model);
        write_regional_params_csv(fs::path(out_dir) / "regional.csv", model);
        std::cout << "fitted " << model.local.size() << " of "
                  << data.stations().size() << " stations for " << date
                  << " " << format_hour(model.hour) << "h -> " << out_dir
                  << '\n';
    }
};

struct PredictCmd {
    std::string data_dir, params_dir, out_dir, date;
    int min_days = 200;

    void run() const {
        const ForecastDataset data = load_panels(data_dir, min_days);
        const EmosModel model =
            read_model(fs::path(params_dir) / "local.csv",
                       fs::path(params_dir) / "regional.csv");
        if (static_cast<int>(model.regional.weights.size()) !=
            data.member_count())
            throw DataError("parameter file has " +
                            std::to_string(model.regional.weights.size()) +
                            " member weights, dataset has " +
                            std::to_string(data.member_count()) + " members");
        const Date day = parse_date(date);
        std::vector<PredictionRow> rows;
        for (const auto& [id, lp] : model.local) {
            (void)lp;
            const int idx = data.station_index(id);
            if (idx < 0)
                continue;
            const EnsembleForecast* fc = data.forecast(idx, day, model.hour);
            if (!fc)
                continue;
            const auto [mu, s2] = dist_params(predict(model, *fc));
            rows.push_back({id, day, model.hour, mu, s2});
        }
        if (rows.empty())
            throw DataError("no station has both parameters and a forecast "
                            "for " + date + " " + format_hour(model.hour) +
                            "h");
        fs::create_directories(out_dir);
        write_predictions_csv(fs::path(out_dir) / "predictions.csv",
                              model.family, rows);
        std::cout << "predicted " << rows.size() << " stations for " << date
                  << " " << format_hour(model.hour) << "h -> " << out_dir
                  << '\n';
    }
};

struct GridCmd {
    std::string data_dir, params_dir, out_dir, date;
    std::string cov_model = "d";
    int min_days = 200;

    void run() const {
        const ForecastDataset data = load_panels(data_dir, min_days);
        const EmosModel model =
            read_model(fs::path(params_dir) / "local.csv",
                       fs::path(params_dir) / "regional.csv");
        const CovariateGrid wbar =
            read_grid(fs::path(data_dir) / "wbar.gcg1", true);
        const CovKind kind = parse_cov_kind(cov_model);
        const Date day = parse_date(date);

        KrigingField mu_field, ls_field;
        mu_field.target = FieldKind::mu;
        ls_field.target = FieldKind::log_sigma;
        for (const auto& [id, lp] : model.local) {
            (void)lp;
            const int idx = data.station_index(id);
            if (idx < 0)
                continue;
            const EnsembleForecast* fc = data.forecast(idx, day, model.hour);
            if (!fc)
                continue;
            const auto [mu, s2] = dist_params(predict(model, *fc));
            mu_field.sites.push_back(data.station(idx));
            mu_field.values.push_back(mu);
            ls_field.sites.push_back(data.station(idx));
            ls_field.values.push_back(0.5 * std::log(s2));
        }
        if (mu_field.sites.size() < 3)
            throw DataError("need at least 3 calibrated stations with a "
                            "forecast on " + date + " to krige");

        mu_field.model = CovarianceModel{kind, {}};
        mu_field.model = reml_fit(mu_field);
        ls_field.model = CovarianceModel{kind, {}};
        ls_field.model = reml_fit(ls_field);

        std::vector<Site> targets;
        targets.reserve(wbar.values.size());
        for (int iy = 0; iy < wbar.ny; ++iy)
            for (int ix = 0; ix < wbar.nx; ++ix)
                targets.push_back(
                    {"", wbar.x_of(ix), wbar.y_of(iy), wbar.at(ix, iy)});
        const std::vector<GriddedPrediction> preds =
            grid_predictive(mu_field, ls_field, targets);

        CovariateGrid mu_grid = wbar, var_grid = wbar, tilde_grid = wbar;
        std::size_t clamped = 0;
        for (std::size_t i = 0; i < preds.size(); ++i) {
            mu_grid.values[i] = preds[i].mu_hat;
            var_grid.values[i] = preds[i].krig_var_mu;
            tilde_grid.values[i] = preds[i].sigma_tilde2;
            clamped += preds[i].mu_clamped ? 1 : 0;
        }
        fs::create_directories(out_dir);
        const fs::path dir(out_dir);
        write_grid(dir / "mu.gcg1", mu_grid);
        write_grid(dir / "krigvar.gcg1", var_grid);
        write_grid(dir / "sigmatilde2.gcg1", tilde_grid);
        if (clamped > 0)
            std::cerr << "gridcast: clamped negative interpolated location at "
                      << clamped << " grid nodes\n";
        std::cout << "kriged " << mu_field.sites.size() << " stations to "
                  << wbar.nx << "x" << wbar.ny << " nodes (model "
                  << cov_kind_name(kind) << ") -> " << out_dir << '\n';
    }
};

struct VerifyCmd {
    std::string data_dir, out_dir;
    std::vector<std::string> families{"trunc-logistic"};
    std::string hour = "all";
    std::string first, last;
    int window = 70;
    std::vector<std::string> cov_models;
    std::string holdout;
    double min_dist = 20.0;
    std::uint64_t seed = 0;
    int min_days = 200;

    void run() const {
        const ForecastDataset data = load_panels(data_dir, min_days);
        VerifyConfig cfg;
        cfg.families.clear();
        for (const auto& f : families)
            cfg.families.push_back(parse_family(f));
        if (hour == "all")
            cfg.hours = {Hour::h06, Hour::h12, Hour::h18};
        else
            cfg.hours = {cli_hour(hour)};
        cfg.training_window_days = window;
        cfg.first_day = parse_date(first);
        cfg.last_day = parse_date(last);
        for (const auto& k : cov_models)
            cfg.cov_kinds.push_back(parse_cov_kind(k));
        if (!holdout.empty()) {
            const std::size_t x = holdout.find('x');
            int k = 0, r = 0;
            if (x != std::string::npos) {
                try {
                    k = std::stoi(holdout.substr(0, x));
                    r = std::stoi(holdout.substr(x + 1));
                } catch (const std::exception&) {
                    k = 0;
                }
            }
            if (k < 1 || r < 1)
                throw InvalidArgument("--holdout expects KxR, e.g. 50x10");
            cfg.holdout_size = k;
            cfg.holdout_reps = r;
        }
        cfg.min_holdout_km = min_dist;
        cfg.seed = seed;

        const VerificationReport report = build_report(data, cfg);
        fs::create_directories(out_dir);
        const fs::path dir(out_dir);
        write_report_csv(dir / "report.csv", report);
        write_pit_samples_csv(dir / "pits.csv", report);
        write_skipped_csv(dir / "skipped.csv", report);
        std::cout << "verification " << first << ".." << last << ": "
                  << report.rows.size() << " report rows, "
                  << report.skipped_station_days
                  << " station-days skipped -> " << out_dir << '\n';
    }
};

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"wind-speed ensemble post-processing: local/regional EMOS "
                 "calibration, covariate-scaled kriging to a grid, and "
                 "CRPS/PIT verification"};
    app.require_subcommand(1);

    SimulateCmd sim;
    auto* s = app.add_subcommand("simulate", "generate a synthetic dataset");
    s->add_option("--out-dir", sim.out_dir, "output directory")->required();
    s->add_option("--seed", sim.cfg.seed, "RNG seed")->capture_default_str();
    s->add_option("--days", sim.cfg.n_days, "number of days")
        ->capture_default_str();
    s->add_option("--members", sim.cfg.members, "ensemble members")
        ->capture_default_str();
    s->add_option("--family", sim.family,
                  "trunc-normal|gamma|trunc-logistic")
        ->capture_default_str();
    s->add_option("--mode", sim.mode,
                  "standard|informative-member|seasonal|heteroscedastic")
        ->capture_default_str();
    s->add_option("--nx", sim.cfg.grid_nx, "stations per row")
        ->capture_default_str();
    s->add_option("--ny", sim.cfg.grid_ny, "station rows")
        ->capture_default_str();
    s->add_option("--spacing", sim.cfg.spacing_km, "station pitch, km")
        ->capture_default_str();
    s->add_option("--jitter", sim.cfg.jitter_km, "position jitter, km")
        ->capture_default_str();
    s->add_option("--seasonal-amplitude", sim.cfg.seasonal_amplitude,
                  "bias swing, m/s (seasonal mode)")
        ->capture_default_str();
    s->add_option("--spread-coupling", sim.cfg.spread_coupling,
                  "spread coefficient (heteroscedastic mode)")
        ->capture_default_str();

    FitCmd fit;
    auto* f = app.add_subcommand(
        "fit", "fit local and regional calibration parameters");
    f->add_option("--data-dir", fit.data_dir,
                  "directory with stations/forecasts/observations CSVs")
        ->required();
    f->add_option("--date", fit.date, "target date (training ends the day "
                                      "before)")
        ->required();
    f->add_option("--hour", fit.hour, "forecast hour: 06|12|18")->required();
    f->add_option("--family", fit.family, "predictive family")
        ->capture_default_str();
    f->add_option("--window", fit.window, "training window, days")
        ->capture_default_str();
    f->add_option("--min-days", fit.min_days,
                  "station density threshold, days/year; 0 disables")
        ->capture_default_str();
    f->add_option("--out-dir", fit.out_dir, "output directory")->required();

    PredictCmd pred;
    auto* p = app.add_subcommand(
        "predict", "evaluate fitted parameters at stations");
    p->add_option("--data-dir", pred.data_dir, "panel directory")->required();
    p->add_option("--params-dir", pred.params_dir,
                  "directory with local.csv and regional.csv")
        ->required();
    p->add_option("--date", pred.date, "valid date")->required();
    p->add_option("--min-days", pred.min_days,
                  "station density threshold, days/year; 0 disables")
        ->capture_default_str();
    p->add_option("--out-dir", pred.out_dir, "output directory")->required();

    GridCmd grid;
    auto* g = app.add_subcommand(
        "grid", "krige calibrated parameters onto the covariate grid");
    g->add_option("--data-dir", grid.data_dir,
                  "panel directory (also holds wbar.gcg1)")
        ->required();
    g->add_option("--params-dir", grid.params_dir,
                  "directory with local.csv and regional.csv")
        ->required();
    g->add_option("--date", grid.date, "valid date")->required();
    g->add_option("--cov-model", grid.cov_model,
                  "covariance model: a|b|c|d")
        ->capture_default_str();
    g->add_option("--min-days", grid.min_days,
                  "station density threshold, days/year; 0 disables")
        ->capture_default_str();
    g->add_option("--out-dir", grid.out_dir, "output directory")->required();

    VerifyCmd ver;
    auto* v = app.add_subcommand(
        "verify", "score methods over a verification period");
    v->add_option("--data-dir", ver.data_dir, "panel directory")->required();
    v->add_option("--family", ver.families,
                  "predictive families to compare (repeatable)")
        ->capture_default_str();
    v->add_option("--hour", ver.hour, "06|12|18|all")->capture_default_str();
    v->add_option("--first", ver.first, "first verification date")->required();
    v->add_option("--last", ver.last, "last verification date")->required();
    v->add_option("--window", ver.window, "training window, days")
        ->capture_default_str();
    v->add_option("--cov-models", ver.cov_models,
                  "covariance models for the holdout experiment")
        ->delimiter(',');
    v->add_option("--holdout", ver.holdout,
                  "holdout spec KxR: K stations, R replicates");
    v->add_option("--min-dist", ver.min_dist,
                  "minimum pairwise holdout distance, km")
        ->capture_default_str();
    v->add_option("--seed", ver.seed, "RNG seed")->capture_default_str();
    v->add_option("--min-days", ver.min_days,
                  "station density threshold, days/year; 0 disables")
        ->capture_default_str();
    v->add_option("--out-dir", ver.out_dir, "output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "gridcast: " << e.what() << '\n';
        return 1;
    }

    try {
        if (s->parsed())
            sim.run();
        else if (f->parsed())
            fit.run();
        else if (p->parsed())
            pred.run();
        else if (g->parsed())
            grid.run();
        else if (v->parsed())
            ver.run();
        return 0;
    } catch (const Error& e) {
        std::cerr << "gridcast: " << e.what() << '\n';
        switch (e.category()) {
        case Error::Category::usage: return 1;
        case Error::Category::data: return 2;
        case Error::Category::numerical: return 3;
        }
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "gridcast: internal error: " << e.what() << '\n';
        return 3;
    }
}
