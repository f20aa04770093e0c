#ifndef GRIDCAST_GEOSTAT_HPP
#define GRIDCAST_GEOSTAT_HPP

// Spatial interpolation of fitted distribution parameters: intrinsic
// kriging under four generalized covariance models with REML parameter
// estimation.  Station mean wind speed wbar acts as the scaling
// covariate; the drift space is the constants for kinds (a)/(b) and
// span{wbar} for kinds (c)/(d).

#include "gridcast/site.hpp"

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace gridcast {

// Generalized covariance families:
//   brownian_nugget            -theta1*h + theta2*1{s=t}
//   fractional_brownian_nugget -theta1*h^theta3 + theta2*1{s=t},
//                              theta3 in (0,2)
//   scaled_brownian_nugget     -theta1*wbar_s*wbar_t*h + theta2*1{s=t}
//   scaled_added_dimension     -wbar_s*wbar_t*(theta1*h +
//                              theta2*|wbar_s-wbar_t|) + theta3*1{s=t}
enum class CovKind {
    brownian_nugget,
    fractional_brownian_nugget,
    scaled_brownian_nugget,
    scaled_added_dimension,
};

std::string cov_kind_name(CovKind k);
CovKind parse_cov_kind(const std::string& name);
int theta_count(CovKind k);

struct CovarianceModel {
    CovKind kind = CovKind::brownian_nugget;
    std::vector<double> theta; // (theta1, theta2[, theta3])
};

// Throws when the parameter vector has the wrong arity, a negative
// entry, or (kind b) an exponent outside (0,2).
void validate_model(const CovarianceModel& model);

// Exact evaluation of the generalized covariance.  The indicator term
// contributes only when s and t are the identical site record (equal
// coordinates and wbar).
double gen_cov(const CovarianceModel& model, const Site& s, const Site& t);

// Value of the drift basis function at a site: 1 for kinds (a)/(b),
// wbar for kinds (c)/(d).
double drift_value(CovKind kind, const Site& s);

enum class FieldKind { mu, log_sigma };

struct KrigingField {
    FieldKind target = FieldKind::mu;
    std::vector<Site> sites;
    std::vector<double> values;
    CovarianceModel model;
};

// Restricted maximum likelihood fit of theta over generalized
// increments (contrasts orthogonal to the drift space).  Needs at
// least 3 sites; throws a data error when the increments vanish (data
// lies in the drift space).
CovarianceModel reml_fit(const KrigingField& field);

struct KrigedValue {
    double value = 0.0;
    double variance = 0.0; // mean-squared prediction error, >= 0
};

// Intrinsic kriging with the drift-matching constraint.  The nugget
// sits on the data-data diagonal only, so predictions target the
// underlying smooth field.  Sites closer than 1e-9 km are merged by
// averaging before the system is factorized.
class KrigingSystem {
public:
    explicit KrigingSystem(KrigingField field);
    ~KrigingSystem();
    KrigingSystem(KrigingSystem&&) noexcept;
    KrigingSystem& operator=(KrigingSystem&&) noexcept;

    KrigedValue predict(const Site& target) const;
    const KrigingField& field() const; // post-merge

private:
    struct Impl;
    std::unique_ptr<const Impl> impl_;
};

// One-shot convenience wrapper around KrigingSystem.
KrigedValue krige(const KrigingField& field, const Site& target);

struct GriddedPrediction {
    Site location;
    double mu_hat = 0.0;
    double krig_var_mu = 0.0; // sigma2_muhat, >= 0
    double sigma_hat2 = 0.0;  // exp-transformed interpolant of log sigma
    double sigma_tilde2 = 0.0; // sigma_hat2 + krig_var_mu
    bool mu_clamped = false;   // negative mu_hat clamped to 1e-6
};

// Kriges the mu field and the log-sigma field (same station set) to
// each target and assembles the inflated predictive variance.
std::vector<GriddedPrediction> grid_predictive(const KrigingField& mu_field,
                                               const KrigingField& logsigma_field,
                                               const std::vector<Site>& targets);

// Samples the intrinsic GRF at the given sites: the smooth component is
// pinned at the first site and drawn from its increment covariance, the
// nugget adds i.i.d. noise, and drift_coef times the drift basis is
// added on top.  Used by simulation tooling and recovery tests.
std::vector<double> sample_intrinsic_grf(const CovarianceModel& model,
                                         const std::vector<Site>& sites,
                                         std::uint64_t seed,
                                         double drift_coef = 0.0);

} // namespace gridcast

#endif
