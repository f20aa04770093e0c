#include "gridcast/geostat.hpp"
#include "gridcast/errors.hpp"
#include "gridcast/optimizer.hpp"
#include "gridcast/parallel.hpp"
#include "gridcast/special.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace gridcast {

namespace {

constexpr double kMergeDistance = 1e-9; // km
constexpr double kMuClamp = 1e-6;
constexpr double kBig = 1e300;

double nugget_of(const CovarianceModel& m) {
    return m.kind == CovKind::scaled_added_dimension ? m.theta[2] : m.theta[1];
}

// Generalized covariance without the indicator term.
double smooth_cov(const CovarianceModel& m, const Site& s, const Site& t) {
    const double h = distance(s, t);
    switch (m.kind) {
    case CovKind::brownian_nugget:
        return -m.theta[0] * h;
    case CovKind::fractional_brownian_nugget:
        return h == 0.0 ? 0.0 : -m.theta[0] * std::pow(h, m.theta[2]);
    case CovKind::scaled_brownian_nugget:
        return -m.theta[0] * s.wbar * t.wbar * h;
    case CovKind::scaled_added_dimension:
        return -s.wbar * t.wbar *
               (m.theta[0] * h + m.theta[1] * std::abs(s.wbar - t.wbar));
    }
    throw InvalidArgument("unknown covariance kind");
}

KrigingField merge_near_duplicates(KrigingField f) {
    if (f.sites.size() != f.values.size())
        throw InvalidArgument("site and value counts differ");
    KrigingField out;
    out.target = f.target;
    out.model = std::move(f.model);
    std::vector<int> counts;
    for (std::size_t i = 0; i < f.sites.size(); ++i) {
        if (!std::isfinite(f.values[i]))
            throw DataError("non-finite field value at site " + f.sites[i].id);
        bool merged = false;
        for (std::size_t j = 0; j < out.sites.size(); ++j) {
            // Compare against the running mean; merge radii are far below
            // any physical station spacing, so drift of the mean is moot.
            if (distance(out.sites[j], f.sites[i]) < kMergeDistance) {
                const double w = 1.0 / (counts[j] + 1);
                out.sites[j].x += (f.sites[i].x - out.sites[j].x) * w;
                out.sites[j].y += (f.sites[i].y - out.sites[j].y) * w;
                out.sites[j].wbar += (f.sites[i].wbar - out.sites[j].wbar) * w;
                out.values[j] += (f.values[i] - out.values[j]) * w;
                counts[j] += 1;
                merged = true;
                break;
            }
        }
        if (!merged) {
            out.sites.push_back(f.sites[i]);
            out.values.push_back(f.values[i]);
            counts.push_back(1);
        }
    }
    return out;
}

Eigen::MatrixXd pairwise_distances(const std::vector<Site>& sites) {
    const int n = static_cast<int>(sites.size());
    Eigen::MatrixXd h(n, n);
    for (int i = 0; i < n; ++i) {
        h(i, i) = 0.0;
        for (int j = i + 1; j < n; ++j)
            h(i, j) = h(j, i) = distance(sites[i], sites[j]);
    }
    return h;
}

Eigen::VectorXd drift_vector(CovKind kind, const std::vector<Site>& sites) {
    Eigen::VectorXd x(sites.size());
    for (std::size_t i = 0; i < sites.size(); ++i)
        x[static_cast<int>(i)] = drift_value(kind, sites[i]);
    return x;
}

// Orthonormal basis of the contrast space (null space of the drift).
Eigen::MatrixXd contrast_basis(const Eigen::VectorXd& x) {
    const int n = static_cast<int>(x.size());
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
    if (qr.rank() < 1)
        throw DataError("degenerate drift vector in the kriging field");
    Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(n, n);
    return q.rightCols(n - 1);
}

struct RemlData {
    Eigen::MatrixXd p1;    // contrast projection of the theta1 structure
    Eigen::MatrixXd p2;    // kind (d) only: theta2 structure
    Eigen::MatrixXd logh;  // kind (b) only: log pairwise distances
    Eigen::MatrixXd w;     // contrast basis
    Eigen::VectorXd u;     // increments
};

// Negative restricted log-likelihood, up to a constant.
double reml_nll(const Eigen::MatrixXd& sigma, const Eigen::VectorXd& u) {
    Eigen::LLT<Eigen::MatrixXd> llt(sigma);
    if (llt.info() != Eigen::Success) return kBig;
    const Eigen::MatrixXd& l = llt.matrixLLT();
    double logdet = 0.0;
    for (int i = 0; i < l.rows(); ++i) logdet += std::log(l(i, i));
    logdet *= 2.0;
    const double quad = u.dot(llt.solve(u));
    const double val = 0.5 * (logdet + quad);
    return std::isfinite(val) ? val : kBig;
}

// Least-squares line fit of the squared increments against distance
// (and, for kind (d), the wbar gap), giving feasible REML starts.
std::vector<double> initial_theta(CovKind kind, const std::vector<Site>& sites,
                                  const std::vector<double>& values) {
    const int n = static_cast<int>(sites.size());
    const bool scaled = kind == CovKind::scaled_brownian_nugget ||
                        kind == CovKind::scaled_added_dimension;
    std::vector<double> r(values);
    if (scaled)
        for (int i = 0; i < n; ++i) r[i] /= sites[i].wbar;

    const int k = kind == CovKind::scaled_added_dimension ? 3 : 2;
    Eigen::MatrixXd xtx = Eigen::MatrixXd::Zero(k, k);
    Eigen::VectorXd xty = Eigen::VectorXd::Zero(k);
    double gbar = 0.0, kappa_bar = 0.0;
    int npair = 0;
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            const double g = 0.5 * (r[i] - r[j]) * (r[i] - r[j]);
            Eigen::VectorXd row(k);
            row[0] = 1.0;
            row[1] = distance(sites[i], sites[j]);
            if (k == 3) row[2] = std::abs(sites[i].wbar - sites[j].wbar);
            xtx += row * row.transpose();
            xty += row * g;
            gbar += g;
            kappa_bar += scaled ? 0.5 * (1.0 / (sites[i].wbar * sites[i].wbar) +
                                         1.0 / (sites[j].wbar * sites[j].wbar))
                                : 1.0;
            ++npair;
        }
    }
    gbar /= npair;
    kappa_bar /= npair;
    Eigen::VectorXd beta = xtx.ldlt().solve(xty);
    const double floor = std::max(1e-8, 1e-6 * gbar);

    std::vector<double> theta;
    switch (kind) {
    case CovKind::brownian_nugget:
        theta = {std::max(beta[1], floor), std::max(beta[0], floor)};
        break;
    case CovKind::fractional_brownian_nugget:
        theta = {std::max(beta[1], floor), std::max(beta[0], floor), 1.0};
        break;
    case CovKind::scaled_brownian_nugget:
        theta = {std::max(beta[1], floor),
                 std::max(beta[0] / kappa_bar, floor)};
        break;
    case CovKind::scaled_added_dimension:
        theta = {std::max(beta[1], floor), std::max(beta[2], floor),
                 std::max(beta[0] / kappa_bar, floor)};
        break;
    }
    return theta;
}

} // namespace

std::string cov_kind_name(CovKind k) {
    switch (k) {
    case CovKind::brownian_nugget: return "a";
    case CovKind::fractional_brownian_nugget: return "b";
    case CovKind::scaled_brownian_nugget: return "c";
    case CovKind::scaled_added_dimension: return "d";
    }
    throw InvalidArgument("unknown covariance kind");
}

CovKind parse_cov_kind(const std::string& name) {
    if (name == "a") return CovKind::brownian_nugget;
    if (name == "b") return CovKind::fractional_brownian_nugget;
    if (name == "c") return CovKind::scaled_brownian_nugget;
    if (name == "d") return CovKind::scaled_added_dimension;
    throw InvalidArgument("unknown covariance model '" + name +
                          "' (expected a, b, c or d)");
}

int theta_count(CovKind k) {
    return (k == CovKind::fractional_brownian_nugget ||
            k == CovKind::scaled_added_dimension)
               ? 3
               : 2;
}

void validate_model(const CovarianceModel& model) {
    if (static_cast<int>(model.theta.size()) != theta_count(model.kind))
        throw InvalidArgument("covariance model " + cov_kind_name(model.kind) +
                              " needs " + std::to_string(theta_count(model.kind)) +
                              " parameters");
    for (double t : model.theta)
        if (!std::isfinite(t) || t < 0.0)
            throw InvalidArgument("covariance parameters must be >= 0");
    if (model.kind == CovKind::fractional_brownian_nugget &&
        !(model.theta[2] > 0.0 && model.theta[2] < 2.0))
        throw InvalidArgument("fractional exponent must lie in (0,2)");
}

double gen_cov(const CovarianceModel& model, const Site& s, const Site& t) {
    validate_model(model);
    const bool same = s.x == t.x && s.y == t.y && s.wbar == t.wbar;
    return smooth_cov(model, s, t) + (same ? nugget_of(model) : 0.0);
}

double drift_value(CovKind kind, const Site& s) {
    return (kind == CovKind::scaled_brownian_nugget ||
            kind == CovKind::scaled_added_dimension)
               ? s.wbar
               : 1.0;
}

CovarianceModel reml_fit(const KrigingField& field_in) {
    KrigingField f = merge_near_duplicates(field_in);
    const int n = static_cast<int>(f.sites.size());
    if (n < 3)
        throw DataError("REML needs at least 3 distinct sites, got " +
                        std::to_string(n));
    const CovKind kind = f.model.kind;

    Eigen::VectorXd z(n);
    for (int i = 0; i < n; ++i) z[i] = f.values[i];
    RemlData rd;
    rd.w = contrast_basis(drift_vector(kind, f.sites));
    rd.u = rd.w.transpose() * z;
    if (rd.u.squaredNorm() <= 1e-12 * std::max(1.0, z.squaredNorm()))
        throw DataError("field values lie in the drift space; "
                        "generalized increments vanish");

    const Eigen::MatrixXd h = pairwise_distances(f.sites);
    Eigen::MatrixXd a1(n, n);
    switch (kind) {
    case CovKind::brownian_nugget:
        a1 = -h;
        break;
    case CovKind::fractional_brownian_nugget:
        rd.logh = h; // exponent applied per evaluation
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                rd.logh(i, j) = i == j ? 0.0 : std::log(h(i, j));
        break;
    case CovKind::scaled_brownian_nugget:
    case CovKind::scaled_added_dimension:
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                a1(i, j) = -f.sites[i].wbar * f.sites[j].wbar * h(i, j);
        break;
    }
    if (kind != CovKind::fractional_brownian_nugget)
        rd.p1 = rd.w.transpose() * a1 * rd.w;
    if (kind == CovKind::scaled_added_dimension) {
        Eigen::MatrixXd a2(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                a2(i, j) = -f.sites[i].wbar * f.sites[j].wbar *
                           std::abs(f.sites[i].wbar - f.sites[j].wbar);
        rd.p2 = rd.w.transpose() * a2 * rd.w;
    }

    Objective nll;
    if (kind == CovKind::brownian_nugget ||
        kind == CovKind::scaled_brownian_nugget) {
        // Two-parameter linear structure: one eigendecomposition makes
        // every likelihood evaluation O(n).
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(rd.p1);
        Eigen::VectorXd d = es.eigenvalues().cwiseMax(0.0);
        Eigen::VectorXd ut = es.eigenvectors().transpose() * rd.u;
        nll = [d, ut](std::span<const double> x) {
            const double t1 = std::exp(x[0]), t2 = std::exp(x[1]);
            double logdet = 0.0, quad = 0.0;
            for (int i = 0; i < d.size(); ++i) {
                const double v = t1 * d[i] + t2;
                if (v <= 0.0) return kBig;
                logdet += std::log(v);
                quad += ut[i] * ut[i] / v;
            }
            const double val = 0.5 * (logdet + quad);
            return std::isfinite(val) ? val : kBig;
        };
    } else if (kind == CovKind::scaled_added_dimension) {
        nll = [&rd](std::span<const double> x) {
            const double t1 = std::exp(x[0]), t2 = std::exp(x[1]),
                         t3 = std::exp(x[2]);
            Eigen::MatrixXd sigma = t1 * rd.p1 + t2 * rd.p2;
            sigma.diagonal().array() += t3;
            return reml_nll(sigma, rd.u);
        };
    } else {
        nll = [&rd, n](std::span<const double> x) {
            const double t1 = std::exp(x[0]), t2 = std::exp(x[1]);
            const double t3 = 2.0 * expit(x[2]);
            Eigen::MatrixXd a(n, n);
            for (int i = 0; i < n; ++i) {
                a(i, i) = 0.0;
                for (int j = i + 1; j < n; ++j)
                    a(i, j) = a(j, i) = -t1 * std::exp(t3 * rd.logh(i, j));
            }
            Eigen::MatrixXd sigma = rd.w.transpose() * a * rd.w;
            sigma.diagonal().array() += t2;
            return reml_nll(sigma, rd.u);
        };
    }

    const std::vector<double> t0 = initial_theta(kind, f.sites, f.values);
    std::vector<double> x0;
    for (std::size_t i = 0; i < t0.size(); ++i) x0.push_back(std::log(t0[i]));
    const int dim = static_cast<int>(x0.size());
    Bounds bounds{std::vector<double>(dim, -34.5), std::vector<double>(dim, 34.5)};
    if (kind == CovKind::fractional_brownian_nugget) {
        x0[2] = 0.0; // exponent 1, the Brownian slice
        bounds.lower[2] = -13.8;
        bounds.upper[2] = 13.8;
    }

    OptimResult res = minimize_bounded(nll, std::move(x0), bounds, {});
    if (!std::isfinite(res.f))
        throw NumericalError("restricted likelihood is not finite at the "
                             "fitted covariance parameters");

    CovarianceModel out;
    out.kind = kind;
    out.theta = {std::exp(res.x[0]), std::exp(res.x[1])};
    if (kind == CovKind::fractional_brownian_nugget)
        out.theta.push_back(2.0 * expit(res.x[2]));
    else if (kind == CovKind::scaled_added_dimension)
        out.theta.push_back(std::exp(res.x[2]));
    validate_model(out);
    return out;
}

struct KrigingSystem::Impl {
    KrigingField field;
    Eigen::VectorXd z;
    Eigen::FullPivLU<Eigen::MatrixXd> lu;
    int n = 0;
};

KrigingSystem::KrigingSystem(KrigingField field_in) {
    validate_model(field_in.model);
    auto impl = std::make_unique<Impl>();
    impl->field = merge_near_duplicates(std::move(field_in));
    const KrigingField& f = impl->field;
    const int n = static_cast<int>(f.sites.size());
    if (n < 1) throw DataError("kriging needs at least one site");
    impl->n = n;
    impl->z.resize(n);
    for (int i = 0; i < n; ++i) impl->z[i] = f.values[i];

    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n + 1, n + 1);
    const double nugget = nugget_of(f.model);
    for (int i = 0; i < n; ++i) {
        m(i, i) = nugget;
        for (int j = i + 1; j < n; ++j)
            m(i, j) = m(j, i) = smooth_cov(f.model, f.sites[i], f.sites[j]);
        m(i, n) = m(n, i) = drift_value(f.model.kind, f.sites[i]);
    }
    impl->lu.compute(m);
    // Healthy systems sit at rcond ~1e-7 or better; sub-merge-radius site
    // pairs without a nugget land around 1e-11.
    if (impl->lu.rank() < n + 1 || impl->lu.rcond() < 1e-9)
        throw NumericalError(
            "singular kriging system; near-duplicate sites or a zero nugget "
            "with coincident locations");
    impl_ = std::move(impl);
}

KrigingSystem::~KrigingSystem() = default;
KrigingSystem::KrigingSystem(KrigingSystem&&) noexcept = default;
KrigingSystem& KrigingSystem::operator=(KrigingSystem&&) noexcept = default;

const KrigingField& KrigingSystem::field() const { return impl_->field; }

KrigedValue KrigingSystem::predict(const Site& target) const {
    const Impl& im = *impl_;
    const int n = im.n;
    if (!std::isfinite(target.x) || !std::isfinite(target.y) ||
        !(target.wbar > 0.0))
        throw DataError("kriging target needs finite coordinates and "
                        "positive mean wind speed");
    Eigen::VectorXd rhs(n + 1);
    for (int i = 0; i < n; ++i)
        rhs[i] = smooth_cov(im.field.model, im.field.sites[i], target);
    rhs[n] = drift_value(im.field.model.kind, target);

    const Eigen::VectorXd sol = im.lu.solve(rhs);
    const double value = sol.head(n).dot(im.z);
    const double variance = -sol.dot(rhs);
    if (!std::isfinite(value) || !std::isfinite(variance))
        throw NumericalError("kriging prediction is not finite");
    return {value, std::max(variance, 0.0)};
}

KrigedValue krige(const KrigingField& field, const Site& target) {
    return KrigingSystem(field).predict(target);
}

std::vector<GriddedPrediction> grid_predictive(
    const KrigingField& mu_field, const KrigingField& logsigma_field,
    const std::vector<Site>& targets) {
    if (mu_field.model.kind != logsigma_field.model.kind)
        throw InvalidArgument(
            "mu and log-sigma fields must use the same covariance kind");
    if (mu_field.sites.size() != logsigma_field.sites.size())
        throw DataError("mu and log-sigma fields cover different stations");
    for (std::size_t i = 0; i < mu_field.sites.size(); ++i)
        if (mu_field.sites[i].id != logsigma_field.sites[i].id)
            throw DataError("mu and log-sigma fields cover different stations");

    KrigingSystem mu_sys(mu_field);
    KrigingSystem ls_sys(logsigma_field);
    std::vector<GriddedPrediction> out(targets.size());
    parallel_for(targets.size(), [&](std::size_t i) {
        const Site& t = targets[i];
        const KrigedValue mv = mu_sys.predict(t);
        const KrigedValue sv = ls_sys.predict(t);
        GriddedPrediction gp;
        gp.location = t;
        gp.mu_hat = mv.value;
        gp.mu_clamped = gp.mu_hat < kMuClamp;
        if (gp.mu_clamped) gp.mu_hat = kMuClamp;
        gp.krig_var_mu = mv.variance;
        gp.sigma_hat2 = std::exp(2.0 * sv.value);
        gp.sigma_tilde2 = gp.sigma_hat2 + gp.krig_var_mu;
        if (!std::isfinite(gp.sigma_tilde2))
            throw NumericalError("gridded predictive variance overflowed");
        out[i] = gp;
    });
    return out;
}

std::vector<double> sample_intrinsic_grf(const CovarianceModel& model,
                                         const std::vector<Site>& sites,
                                         std::uint64_t seed,
                                         double drift_coef) {
    validate_model(model);
    const int n = static_cast<int>(sites.size());
    if (n < 1) throw InvalidArgument("no sites to sample at");
    const bool scaled = model.kind == CovKind::scaled_brownian_nugget ||
                        model.kind == CovKind::scaled_added_dimension;

    // Increment covariance of the unscaled smooth component.
    auto ktilde = [&](int i, int j) {
        const double h = distance(sites[i], sites[j]);
        switch (model.kind) {
        case CovKind::brownian_nugget:
        case CovKind::scaled_brownian_nugget:
            return -model.theta[0] * h;
        case CovKind::fractional_brownian_nugget:
            return h == 0.0 ? 0.0 : -model.theta[0] * std::pow(h, model.theta[2]);
        case CovKind::scaled_added_dimension:
            return -model.theta[0] * h -
                   model.theta[1] * std::abs(sites[i].wbar - sites[j].wbar);
        }
        throw InvalidArgument("unknown covariance kind");
    };

    // Pin the smooth field at the first site: the increments then have
    // a genuine (positive semidefinite) covariance matrix.
    Eigen::MatrixXd cov(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j)
            cov(i, j) = cov(j, i) =
                ktilde(i, j) - ktilde(i, 0) - ktilde(0, j) + ktilde(0, 0);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    const Eigen::MatrixXd root =
        es.eigenvectors() *
        es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::VectorXd xi(n);
    for (int i = 0; i < n; ++i) xi[i] = gauss(rng);
    Eigen::VectorXd smooth = root * xi;

    const double nug_sd = std::sqrt(nugget_of(model));
    std::vector<double> z(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const double scale = scaled ? sites[i].wbar : 1.0;
        z[static_cast<std::size_t>(i)] =
            scale * (smooth[i] + drift_coef) + nug_sd * gauss(rng);
    }
    return z;
}

} // namespace gridcast
