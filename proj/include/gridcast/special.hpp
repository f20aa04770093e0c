#ifndef GRIDCAST_SPECIAL_HPP
#define GRIDCAST_SPECIAL_HPP

// Scalar special functions used by the predictive distributions.
// All functions are pure and thread-safe.

namespace gridcast {

// exp(x^2) * erfc(x).  Stable for large positive x where erfc(x)
// underflows; for x < 0 grows like 2*exp(x^2).
double erfcx(double x);

// Standard normal density, CDF and survival function.
double norm_pdf(double z);
double norm_cdf(double z);
double norm_sf(double z);

// log Phi(z), stable for z << 0 (uses erfcx below the central range).
double norm_logcdf(double z);

// Inverse standard normal CDF for p in (0,1).  Accurate to full double
// precision (rational initial guess plus one Halley refinement).
double norm_quantile(double p);

// Inverse standard normal CDF given log(p), for lp <= log(0.5).
// Covers tail probabilities far below the double underflow threshold.
double norm_quantile_logp(double lp);

// Regularized lower incomplete gamma P(a, x) for a > 0, x >= 0.
// Series / continued-fraction split at x = a + 1; relative accuracy
// around 1e-14 over the parameter ranges used here.
double gamma_p(double a, double x);

// log Beta(a, b).
double lbeta(double a, double b);

// Logistic helpers.  expit(x) = 1/(1+exp(-x)); softplus(x) =
// log(1+exp(x)) without overflow; logit(p) = log(p/(1-p)).
double expit(double x);
double softplus(double x);
double logit(double p);

// log(1-q)/q with the q -> 0 limit (-1) handled; q in [0, 1).
double log1m_over(double q);

} // namespace gridcast

#endif
