#ifndef GRIDCAST_DISTRIBUTIONS_HPP
#define GRIDCAST_DISTRIBUTIONS_HPP

// Predictive distributions for nonnegative wind speed.  Each family is
// parametrized by the location/mean mu and a variance-like parameter
// sigma2 so that EMOS regression output plugs in directly:
//
//   truncated_normal   N(mu, sigma2) truncated to [0, inf)
//   gamma_mv           gamma with mean mu and variance sigma2
//   truncated_logistic logistic(mu, scale) truncated to [0, inf),
//                      scale = sqrt(3 sigma2)/pi (untruncated variance
//                      convention)
//
// CRPS is evaluated in closed form for all three families.

#include <span>
#include <string>
#include <variant>

namespace gridcast {

enum class Family { truncated_normal, gamma_mv, truncated_logistic };

std::string family_name(Family f);
Family parse_family(const std::string& name);

struct TruncatedNormal {
    double mu;
    double sigma2;
};

struct GammaMV {
    double mu;     // mean, must be > 0
    double sigma2; // variance
};

struct TruncatedLogistic {
    double mu;
    double sigma2;
};

using PredictiveDistribution =
    std::variant<TruncatedNormal, GammaMV, TruncatedLogistic>;

// Builds a distribution of the given family, validating parameters.
// sigma2 <= 1e-12 is rejected (degenerate spread), as is mu <= 0 for
// the gamma family.
PredictiveDistribution make_distribution(Family f, double mu, double sigma2);
Family family_of(const PredictiveDistribution& d);

// CDF / density on [0, inf); both return 0 for y < 0.
double cdf(const PredictiveDistribution& d, double y);
double pdf(const PredictiveDistribution& d, double y);

// Quantile for tau in (0,1); satisfies |cdf(quantile(tau)) - tau| <=
// 1e-10 over the supported parameter range.
double quantile(const PredictiveDistribution& d, double tau);

// Continuous ranked probability score against a verifying observation
// y >= 0.  Lower is better; units of y.
double crps(const PredictiveDistribution& d, double y);

double crps_truncated_normal(double mu, double sigma2, double y);
double crps_gamma(double mu, double sigma2, double y);
double crps_truncated_logistic(double mu, double sigma2, double y);

// CRPS of the empirical distribution of an ensemble:
//   mean_k |f_k - y| - (1/(2 m^2)) sum_{j,k} |f_j - f_k|
double crps_ensemble(std::span<const double> members, double y);

} // namespace gridcast

#endif
