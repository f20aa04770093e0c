#include "doctest.h"

#include "gridcast/special.hpp"
#include "gridcast/errors.hpp"

#include <boost/math/special_functions/gamma.hpp>
#include <boost/math/special_functions/erf.hpp>

#include <cmath>
#include <random>

using namespace gridcast;

TEST_SUITE("special") {

TEST_CASE("erfcx matches exp(x^2) erfc(x) in the direct range") {
    for (double x : {0.0, 0.3, 1.0, 2.5, 5.0, 7.9}) {
        const double ref = std::exp(x * x) * boost::math::erfc(x);
        CHECK(erfcx(x) == doctest::Approx(ref).epsilon(1e-13));
    }
}

TEST_CASE("erfcx is continuous across the continued-fraction switch") {
    const double below = erfcx(7.9999999);
    const double above = erfcx(8.0000001);
    CHECK(std::abs(below - above) / below < 1e-7);
    // Spot value via boost's scaled complement on the CF side.
    const double x = 12.5;
    const double ref = std::exp(x * x) * boost::math::erfc(x);
    CHECK(erfcx(x) == doctest::Approx(ref).epsilon(1e-12));
}

TEST_CASE("erfcx far tail follows the 1/(x sqrt(pi)) asymptote") {
    for (double x : {50.0, 500.0, 5e4}) {
        const double lead = 1.0 / (x * std::sqrt(M_PI));
        const double ratio = erfcx(x) / lead;
        // erfcx(x) = lead * (1 - 1/(2x^2) + O(x^-4))
        CHECK(ratio > 1.0 - 1.0 / (x * x));
        CHECK(ratio < 1.0);
    }
    // At 5e8 the correction is below double resolution.
    CHECK(erfcx(5e8) == doctest::Approx(1.0 / (5e8 * std::sqrt(M_PI))).epsilon(1e-12));
}

TEST_CASE("erfcx negative arguments") {
    for (double x : {-0.5, -2.0, -5.0}) {
        const double ref = std::exp(x * x) * boost::math::erfc(x);
        CHECK(erfcx(x) == doctest::Approx(ref).epsilon(1e-12));
    }
}

TEST_CASE("normal cdf/sf/logcdf consistency") {
    for (double z : {-30.0, -8.0, -2.0, -0.5, 0.0, 0.5, 2.0, 8.0}) {
        CHECK(norm_cdf(z) + norm_sf(z) == doctest::Approx(1.0).epsilon(1e-14));
        if (norm_cdf(z) > 0.0) {
            CHECK(norm_logcdf(z) ==
                  doctest::Approx(std::log(norm_cdf(z))).epsilon(1e-11));
        }
    }
    // Deep tail where norm_cdf underflows: compare against the
    // asymptotic expansion log Phi(z) ~ -z^2/2 - log(-z sqrt(2 pi)).
    const double z = -100.0;
    const double asym = -0.5 * z * z - std::log(-z * std::sqrt(2.0 * M_PI));
    CHECK(norm_logcdf(z) == doctest::Approx(asym).epsilon(1e-3));
}

TEST_CASE("norm_quantile round-trips through norm_cdf") {
    for (double p : {1e-12, 1e-6, 0.01, 0.3, 0.5, 0.7, 0.99, 1.0 - 1e-9}) {
        const double z = norm_quantile(p);
        CHECK(norm_cdf(z) == doctest::Approx(p).epsilon(1e-12));
    }
    CHECK(norm_quantile(0.5) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK_THROWS_AS(norm_quantile(0.0), InvalidArgument);
    CHECK_THROWS_AS(norm_quantile(1.0), InvalidArgument);
}

TEST_CASE("norm_quantile_logp reaches beyond double underflow") {
    for (double lp : {std::log(0.2), -50.0, -400.0, -1e4}) {
        const double z = norm_quantile_logp(lp);
        CHECK(norm_logcdf(z) == doctest::Approx(lp).epsilon(1e-10));
    }
}

TEST_CASE("gamma_p agrees with boost across regimes") {
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> ua(0.05, 40.0);
    for (int i = 0; i < 200; ++i) {
        const double a = ua(rng);
        const double x = ua(rng);
        const double ref = boost::math::gamma_p(a, x);
        CHECK(gamma_p(a, x) == doctest::Approx(ref).epsilon(1e-12));
    }
    // Large-shape regime used by sharp gamma fits.
    for (double a : {2500.0, 22500.0}) {
        for (double frac : {0.9, 1.0, 1.1}) {
            const double x = a * frac;
            const double ref = boost::math::gamma_p(a, x);
            CHECK(gamma_p(a, x) == doctest::Approx(ref).epsilon(1e-11));
        }
    }
    CHECK(gamma_p(1.0, 1.0) == doctest::Approx(1.0 - std::exp(-1.0)).epsilon(1e-14));
    CHECK(gamma_p(3.0, 0.0) == 0.0);
    CHECK_THROWS_AS(gamma_p(-1.0, 1.0), InvalidArgument);
    CHECK_THROWS_AS(gamma_p(1.0, -1.0), InvalidArgument);
}

TEST_CASE("lbeta recovers B(3/2,1/2) = pi/2") {
    CHECK(std::exp(lbeta(1.5, 0.5)) == doctest::Approx(M_PI / 2.0).epsilon(1e-14));
}

TEST_CASE("logistic helpers") {
    CHECK(expit(0.0) == 0.5);
    CHECK(expit(800.0) == 1.0);
    CHECK(expit(-800.0) == doctest::Approx(0.0));
    CHECK(logit(0.5) == 0.0);
    for (double x : {-30.0, -2.0, 0.1, 5.0}) {
        CHECK(logit(expit(x)) == doctest::Approx(x).epsilon(1e-12));
        CHECK(softplus(x) == doctest::Approx(std::log1p(std::exp(x))).epsilon(1e-14));
        // softplus(x) - x = softplus(-x)
        CHECK(softplus(x) - x == doctest::Approx(softplus(-x)).epsilon(1e-12));
    }
    CHECK(softplus(1000.0) == 1000.0);
    CHECK(log1m_over(0.0) == -1.0);
    CHECK(log1m_over(0.5) == doctest::Approx(std::log(0.5) / 0.5).epsilon(1e-15));
    // Series/direct agreement near the switch.
    CHECK(log1m_over(9.999e-5) == doctest::Approx(std::log1p(-9.999e-5) / 9.999e-5)
                                      .epsilon(1e-12));
}

} // TEST_SUITE
