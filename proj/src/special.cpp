#include "gridcast/special.hpp"
#include "gridcast/errors.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace gridcast {

namespace {

constexpr double sqrt2 = std::numbers::sqrt2;
constexpr double sqrt_pi = 1.7724538509055160273;
constexpr double sqrt_2pi = 2.5066282746310005024;

// Continued fraction for erfcx on the far tail (A&S 7.1.14):
//   sqrt(pi) e^{x^2} erfc(x) = 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + ...))))
// evaluated with the modified Lentz scheme.
double erfcx_cf(double x) {
    const double tiny = 1e-300;
    double f = x, c = x, d = 0.0;
    for (int k = 1; k <= 80; ++k) {
        const double a = 0.5 * k;
        d = x + a * d;
        if (d == 0.0) d = tiny;
        d = 1.0 / d;
        c = x + a / c;
        if (c == 0.0) c = tiny;
        const double delta = c * d;
        f *= delta;
        if (std::abs(delta - 1.0) < 1e-17) break;
    }
    return 1.0 / (sqrt_pi * f);
}

} // namespace

double erfcx(double x) {
    if (std::isnan(x)) return x;
    if (x >= 0.0) {
        // Below the switch point exp(x^2) cannot overflow and the
        // scaled product keeps erfc's full tail accuracy.
        if (x <= 8.0) return std::exp(x * x) * std::erfc(x);
        return erfcx_cf(x);
    }
    // erfc(x) = 2 - erfc(-x); overflows to +inf near x = -27, which is
    // the correct limit of exp(x^2)*erfc(x).
    return 2.0 * std::exp(x * x) - erfcx(-x);
}

double norm_pdf(double z) {
    return std::exp(-0.5 * z * z) / sqrt_2pi;
}

double norm_cdf(double z) {
    return 0.5 * std::erfc(-z / sqrt2);
}

double norm_sf(double z) {
    return 0.5 * std::erfc(z / sqrt2);
}

double norm_logcdf(double z) {
    if (z >= -1.0) {
        const double sf = norm_sf(z);
        // log(1 - sf); sf <= 0.84 so log1p is exact enough.
        return std::log1p(-sf);
    }
    // Phi(z) = 0.5 * erfcx(-z/sqrt(2)) * exp(-z^2/2)
    return std::log(0.5 * erfcx(-z / sqrt2)) - 0.5 * z * z;
}

namespace {

// Rational tail approximation from Acklam's inverse normal CDF.
// Input q = sqrt(-2 log p) for a lower-tail probability p; returns the
// (negative) quantile before refinement.
double acklam_tail(double q) {
    static const double c[6] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                -2.400758277161838e+00, -2.549732539343734e+00,
                                4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[4] = {7.784695709041462e-03, 3.224671290700398e-01,
                                2.445134137142996e+00, 3.754408661907416e+00};
    const double num = ((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5];
    const double den = (((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0;
    return num / den; // negative: the coefficients encode the lower tail
}

double acklam_central(double p) {
    static const double a[6] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                -2.759285104469687e+02, 1.383577518672690e+02,
                                -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[5] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                -1.556989798598866e+02, 6.680131188771972e+01,
                                -1.328068155288572e+01};
    const double q = p - 0.5;
    const double r = q * q;
    const double num = ((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5];
    const double den = ((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0;
    return q * num / den;
}

// One Halley step for Phi(x) = p on the linear probability scale.
double halley_refine(double x, double p) {
    const double e = norm_cdf(x) - p;
    const double u = e * sqrt_2pi * std::exp(0.5 * x * x);
    return x - u / (1.0 + 0.5 * x * u);
}

} // namespace

double norm_quantile(double p) {
    if (!(p > 0.0 && p < 1.0))
        throw InvalidArgument("norm_quantile: p must lie in (0,1)");
    const double p_low = 0.02425;
    double x;
    if (p < p_low) {
        x = acklam_tail(std::sqrt(-2.0 * std::log(p)));
    } else if (p <= 1.0 - p_low) {
        x = acklam_central(p);
    } else {
        x = -acklam_tail(std::sqrt(-2.0 * std::log1p(-p)));
    }
    return halley_refine(x, p);
}

double norm_quantile_logp(double lp) {
    if (!(lp < 0.0))
        throw InvalidArgument("norm_quantile_logp: log-probability must be negative");
    if (lp >= std::log(0.02425))
        return norm_quantile(std::exp(lp));
    double x = acklam_tail(std::sqrt(-2.0 * lp));
    // Newton on the log scale: d/dx log Phi(x) = pdf/Phi, with the
    // ratio computed through erfcx so it stays finite far in the tail.
    for (int it = 0; it < 3; ++it) {
        const double f = norm_logcdf(x) - lp;
        const double ratio = 2.0 / (sqrt_2pi * erfcx(-x / sqrt2)); // pdf/Phi
        x -= f / ratio;
    }
    return x;
}

double gamma_p(double a, double x) {
    if (!(a > 0.0) || !(x >= 0.0) || !std::isfinite(a) || !std::isfinite(x))
        throw InvalidArgument("gamma_p: need a > 0 and x >= 0");
    if (x == 0.0) return 0.0;
    const double logpre = a * std::log(x) - x - std::lgamma(a);
    if (x < a + 1.0) {
        // Series: P = x^a e^{-x} / Gamma(a) * sum_{n>=0} x^n / (a (a+1)...(a+n))
        double term = 1.0 / a;
        double sum = term;
        for (int n = 1; n < 1000000; ++n) {
            term *= x / (a + n);
            sum += term;
            if (term < sum * 1e-16) break;
        }
        return std::min(1.0, std::exp(logpre) * sum);
    }
    // Continued fraction for Q (modified Lentz), then P = 1 - Q.
    const double tiny = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i < 1000000; ++i) {
        const double an = -static_cast<double>(i) * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::abs(delta - 1.0) < 1e-16) break;
    }
    const double q = std::exp(logpre) * h;
    return std::max(0.0, 1.0 - q);
}

double lbeta(double a, double b) {
    return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
}

double expit(double x) {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double softplus(double x) {
    if (x > 0.0) return x + std::log1p(std::exp(-x));
    return std::log1p(std::exp(x));
}

double logit(double p) {
    if (!(p > 0.0 && p < 1.0))
        throw InvalidArgument("logit: p must lie in (0,1)");
    return std::log(p) - std::log1p(-p);
}

double log1m_over(double q) {
    if (!(q >= 0.0 && q < 1.0))
        throw InvalidArgument("log1m_over: q must lie in [0,1)");
    if (q < 1e-4) {
        // log(1-q)/q = -(1 + q/2 + q^2/3 + q^3/4 + ...)
        return -(1.0 + q * (0.5 + q * (1.0 / 3.0 + q * 0.25)));
    }
    return std::log1p(-q) / q;
}

} // namespace gridcast
