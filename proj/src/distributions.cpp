#include "gridcast/distributions.hpp"
#include "gridcast/special.hpp"
#include "gridcast/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

namespace gridcast {

namespace {

constexpr double sqrt2 = std::numbers::sqrt2;
constexpr double sqrt_pi = 1.7724538509055160273;
constexpr double two_over_sqrt_2pi = 0.79788456080286535588; // sqrt(2/pi)
constexpr double pi = std::numbers::pi;

void check_mu_sigma2(double mu, double sigma2, bool mu_positive) {
    if (!std::isfinite(mu) || !std::isfinite(sigma2))
        throw InvalidArgument("distribution parameters must be finite");
    if (sigma2 <= 1e-12)
        throw InvalidArgument("sigma2 must exceed 1e-12");
    if (mu_positive && !(mu > 0.0))
        throw InvalidArgument("gamma family requires mu > 0");
}

void check_obs(double y) {
    if (!std::isfinite(y) || y < 0.0)
        throw InvalidArgument("observation must be finite and nonnegative");
}

void check_tau(double tau) {
    if (!(tau > 0.0 && tau < 1.0))
        throw InvalidArgument("quantile level must lie in (0,1)");
}

// (-log(1-x) - x)/x^2 on [0,1): the x^0 coefficient of the CRPS tail
// expansion.  Series below 0.01 where the direct form cancels.
double log_tail_ratio(double x) {
    if (x < 0.01) {
        return 0.5 + x * (1.0 / 3.0 + x * (0.25 + x * (0.2 + x * (1.0 / 6.0 + x * (1.0 / 7.0 + x * (0.125 + x / 9.0))))));
    }
    return (-std::log1p(-x) - x) / (x * x);
}

// --- truncated normal ------------------------------------------------

double tn_cdf(double mu, double sigma2, double y) {
    if (y <= 0.0) return 0.0;
    const double sigma = std::sqrt(sigma2);
    const double a = mu / sigma;
    const double z = (y - mu) / sigma;
    double ratio; // (1 - F(y)) = SF(z)/Phi(a)
    if (a >= 0.0) {
        ratio = norm_sf(z) / norm_cdf(a);
    } else {
        // z >= -a > 0, so both survival functions go through erfcx and
        // the exponent (a^2 - z^2)/2 is nonpositive.
        ratio = erfcx(z / sqrt2) / erfcx(-a / sqrt2) *
                std::exp(0.5 * (a - z) * (a + z));
    }
    return std::clamp(1.0 - ratio, 0.0, 1.0);
}

double tn_pdf(double mu, double sigma2, double y) {
    if (y < 0.0) return 0.0;
    const double sigma = std::sqrt(sigma2);
    const double a = mu / sigma;
    const double z = (y - mu) / sigma;
    if (a >= 0.0) {
        return norm_pdf(z) / (sigma * norm_cdf(a));
    }
    return two_over_sqrt_2pi * std::exp(0.5 * (a - z) * (a + z)) /
           (sigma * erfcx(-a / sqrt2));
}

double tn_quantile(double mu, double sigma2, double tau) {
    const double sigma = std::sqrt(sigma2);
    const double a = mu / sigma;
    // SF(z_tau) = (1 - tau) Phi(a), solved on the log scale so that
    // strong truncation (a << 0) keeps full precision.
    const double lp = std::log1p(-tau) + norm_logcdf(a);
    double z;
    if (lp >= std::log(0.02425)) {
        z = -norm_quantile(std::exp(lp));
    } else {
        z = -norm_quantile_logp(lp);
    }
    return std::max(0.0, mu + sigma * z);
}

// --- gamma (mean/variance parametrization) ---------------------------

double gamma_shape(double mu, double sigma2) { return mu * mu / sigma2; }
double gamma_rate(double mu, double sigma2) { return mu / sigma2; }

double gm_cdf(double mu, double sigma2, double y) {
    if (y <= 0.0) return 0.0;
    return gamma_p(gamma_shape(mu, sigma2), gamma_rate(mu, sigma2) * y);
}

double gm_pdf(double mu, double sigma2, double y) {
    if (y < 0.0) return 0.0;
    const double alpha = gamma_shape(mu, sigma2);
    const double beta = gamma_rate(mu, sigma2);
    if (y == 0.0) {
        if (alpha > 1.0) return 0.0;
        if (alpha == 1.0) return beta;
        return std::numeric_limits<double>::infinity();
    }
    return std::exp(alpha * std::log(beta) + (alpha - 1.0) * std::log(y) -
                    beta * y - std::lgamma(alpha));
}

double gm_quantile(double mu, double sigma2, double tau) {
    const double alpha = gamma_shape(mu, sigma2);
    const double beta = gamma_rate(mu, sigma2);
    // Wilson-Hilferty starting point in the beta = 1 scale.
    const double zn = norm_quantile(tau);
    double x;
    {
        const double c = 1.0 - 1.0 / (9.0 * alpha) + zn / (3.0 * std::sqrt(alpha));
        x = (c > 0.0) ? alpha * c * c * c : alpha * 1e-8;
        if (x <= 0.0) x = 1e-300;
    }
    // Small-shape quantiles span hundreds of orders of magnitude, so the
    // safeguarded Newton runs on log x with a geometric bracket.
    double lo = 1e-300;
    double hi = std::max({2.0 * x, alpha + 10.0, 1.0});
    while (gamma_p(alpha, hi) < tau) {
        lo = hi;
        hi *= 2.0;
        if (hi > 1e300) throw NumericalError("gamma quantile bracket failed");
    }
    x = std::clamp(x, lo, hi);
    const double lg = std::lgamma(alpha);
    for (int it = 0; it < 300; ++it) {
        const double f = gamma_p(alpha, x) - tau;
        if (f > 0.0) hi = x; else lo = x;
        if (std::abs(f) <= 1e-13) break;
        if (hi / lo <= 1.0 + 1e-14) break;
        const double log_xpdf = alpha * std::log(x) - x - lg; // log(x * pdf)
        double du = -f * std::exp(-log_xpdf);
        du = std::clamp(du, -30.0, 30.0);
        double xn = x * std::exp(du);
        if (!(xn > lo && xn < hi))
            xn = std::sqrt(lo) * std::sqrt(hi);
        x = xn;
    }
    return x / beta;
}

// --- truncated logistic ----------------------------------------------

double tl_scale(double sigma2) {
    return std::sqrt(3.0 * sigma2) / pi;
}

double tl_cdf(double mu, double sigma2, double y) {
    if (y <= 0.0) return 0.0;
    const double s = tl_scale(sigma2);
    const double z0 = -mu / s;
    const double zy = (y - mu) / s;
    // 1 - F(y) = q(zy)/q(z0) = exp(softplus(z0) - softplus(zy))
    return std::clamp(-std::expm1(softplus(z0) - softplus(zy)), 0.0, 1.0);
}

double tl_pdf(double mu, double sigma2, double y) {
    if (y < 0.0) return 0.0;
    const double s = tl_scale(sigma2);
    const double z0 = -mu / s;
    const double zy = (y - mu) / s;
    const double r = std::exp(softplus(z0) - softplus(zy));
    return expit(zy) * r / s;
}

double tl_quantile(double mu, double sigma2, double tau) {
    const double s = tl_scale(sigma2);
    const double z0 = -mu / s;
    const double q0 = expit(-z0);
    // log(p0 + tau q0) = log1p(-q0 (1-tau)); the first form is exact
    // for weak truncation (p0 not small against tau q0), the second for
    // strong truncation where q0 itself is tiny.
    double logw;
    if (z0 >= 0.0) {
        logw = std::log1p(-q0 * (1.0 - tau));
    } else {
        logw = std::log(expit(z0) + tau * q0);
    }
    return std::max(0.0, mu + s * (logw + softplus(z0) - std::log1p(-tau)));
}

} // namespace

double crps_truncated_normal(double mu, double sigma2, double y) {
    check_mu_sigma2(mu, sigma2, false);
    check_obs(y);
    const double sigma = std::sqrt(sigma2);
    const double a = mu / sigma;
    const double z = (y - mu) / sigma;
    double r1, r2, r3; // SF(z)/Phi(a), pdf(z)/Phi(a), Phi(sqrt2 a)/Phi(a)^2
    if (a >= 0.0) {
        const double phi_a = norm_cdf(a);
        r1 = norm_sf(z) / phi_a;
        r2 = norm_pdf(z) / phi_a;
        r3 = norm_cdf(sqrt2 * a) / (phi_a * phi_a);
    } else {
        const double ea = erfcx(-a / sqrt2);
        const double damp = std::exp(0.5 * (a - z) * (a + z)); // z >= -a
        r1 = erfcx(z / sqrt2) / ea * damp;
        r2 = two_over_sqrt_2pi * damp / ea;
        r3 = 2.0 * erfcx(-a) / (ea * ea);
    }
    return sigma * (z * (1.0 - 2.0 * r1) + 2.0 * r2 - r3 / sqrt_pi);
}

double crps_gamma(double mu, double sigma2, double y) {
    check_mu_sigma2(mu, sigma2, true);
    check_obs(y);
    const double alpha = gamma_shape(mu, sigma2);
    const double beta = gamma_rate(mu, sigma2);
    const double fy = gamma_p(alpha, beta * y);
    const double fy1 = gamma_p(alpha + 1.0, beta * y);
    return y * (2.0 * fy - 1.0) - (alpha / beta) * (2.0 * fy1 - 1.0) -
           (alpha / beta) * std::exp(lbeta(alpha + 0.5, 0.5)) / pi;
}

double crps_truncated_logistic(double mu, double sigma2, double y) {
    check_mu_sigma2(mu, sigma2, false);
    check_obs(y);
    const double s = tl_scale(sigma2);
    const double z0 = -mu / s;
    const double zy = (y - mu) / s;
    const double q0 = expit(-z0);
    const double qy = expit(-zy);
    const double log_r = softplus(z0) - softplus(zy);
    const double r = std::exp(log_r);
    if (z0 >= 0.0) {
        // mu <= 0: survival-side rearrangement, exact in the limit of
        // strong truncation where the direct normalized form cancels:
        //   crps/s = y/s - 2(1-r) + (1-2 q0) G(q0) + 2 q0 r^2 G(qy)
        // with G(x) = (-log(1-x) - x)/x^2.
        const double ytil = zy - z0;
        return s * (ytil - 2.0 * (1.0 - r) + (1.0 - 2.0 * q0) * log_tail_ratio(q0) +
                    2.0 * q0 * r * r * log_tail_ratio(qy));
    }
    // mu > 0: direct normalized form; q0 > 1/2 keeps it stable.
    const double p0 = expit(z0);
    const double py = expit(zy);
    const double bracket = (1.0 - 2.0 * p0) * (-log_r) - (py - p0) +
                           p0 * p0 * (zy - z0) + softplus(-zy) - qy;
    return s * bracket / (q0 * q0);
}

double crps_ensemble(std::span<const double> members, double y) {
    if (members.empty())
        throw InvalidArgument("crps_ensemble: empty ensemble");
    if (!std::isfinite(y))
        throw InvalidArgument("crps_ensemble: observation must be finite");
    std::vector<double> f(members.begin(), members.end());
    for (double v : f)
        if (!std::isfinite(v))
            throw InvalidArgument("crps_ensemble: members must be finite");
    std::sort(f.begin(), f.end());
    const double m = static_cast<double>(f.size());
    double mad = 0.0, gini = 0.0;
    for (std::size_t k = 0; k < f.size(); ++k) {
        mad += std::abs(f[k] - y);
        gini += f[k] * (2.0 * static_cast<double>(k) - m + 1.0);
    }
    return mad / m - gini / (m * m);
}

// --- dispatch ---------------------------------------------------------

std::string family_name(Family f) {
    switch (f) {
    case Family::truncated_normal: return "trunc-normal";
    case Family::gamma_mv: return "gamma";
    case Family::truncated_logistic: return "trunc-logistic";
    }
    throw InvalidArgument("unknown family");
}

Family parse_family(const std::string& name) {
    if (name == "trunc-normal") return Family::truncated_normal;
    if (name == "gamma") return Family::gamma_mv;
    if (name == "trunc-logistic") return Family::truncated_logistic;
    throw DataError("unknown distribution family: " + name);
}

PredictiveDistribution make_distribution(Family f, double mu, double sigma2) {
    check_mu_sigma2(mu, sigma2, f == Family::gamma_mv);
    switch (f) {
    case Family::truncated_normal: return TruncatedNormal{mu, sigma2};
    case Family::gamma_mv: return GammaMV{mu, sigma2};
    case Family::truncated_logistic: return TruncatedLogistic{mu, sigma2};
    }
    throw InvalidArgument("unknown family");
}

Family family_of(const PredictiveDistribution& d) {
    if (std::holds_alternative<TruncatedNormal>(d)) return Family::truncated_normal;
    if (std::holds_alternative<GammaMV>(d)) return Family::gamma_mv;
    return Family::truncated_logistic;
}

double cdf(const PredictiveDistribution& d, double y) {
    return std::visit(
        [y](const auto& p) {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, TruncatedNormal>)
                return tn_cdf(p.mu, p.sigma2, y);
            else if constexpr (std::is_same_v<T, GammaMV>)
                return gm_cdf(p.mu, p.sigma2, y);
            else
                return tl_cdf(p.mu, p.sigma2, y);
        },
        d);
}

double pdf(const PredictiveDistribution& d, double y) {
    return std::visit(
        [y](const auto& p) {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, TruncatedNormal>)
                return tn_pdf(p.mu, p.sigma2, y);
            else if constexpr (std::is_same_v<T, GammaMV>)
                return gm_pdf(p.mu, p.sigma2, y);
            else
                return tl_pdf(p.mu, p.sigma2, y);
        },
        d);
}

double quantile(const PredictiveDistribution& d, double tau) {
    check_tau(tau);
    return std::visit(
        [tau](const auto& p) {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, TruncatedNormal>)
                return tn_quantile(p.mu, p.sigma2, tau);
            else if constexpr (std::is_same_v<T, GammaMV>)
                return gm_quantile(p.mu, p.sigma2, tau);
            else
                return tl_quantile(p.mu, p.sigma2, tau);
        },
        d);
}

double crps(const PredictiveDistribution& d, double y) {
    return std::visit(
        [y](const auto& p) {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, TruncatedNormal>)
                return crps_truncated_normal(p.mu, p.sigma2, y);
            else if constexpr (std::is_same_v<T, GammaMV>)
                return crps_gamma(p.mu, p.sigma2, y);
            else
                return crps_truncated_logistic(p.mu, p.sigma2, y);
        },
        d);
}

} // namespace gridcast
