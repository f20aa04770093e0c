#ifndef GRIDCAST_SITE_HPP
#define GRIDCAST_SITE_HPP

#include <cmath>
#include <string>

namespace gridcast {

// An observation or prediction location in planar (km) coordinates.
// wbar is the climatological annual mean wind speed at the location,
// used by the covariance models both as a scale and as an added
// metric dimension; it must be positive.
struct Site {
    std::string id;
    double x = 0.0;
    double y = 0.0;
    double wbar = 1.0;
};

inline double distance(const Site& a, const Site& b) {
    const double dx = a.x - b.x;
    const double dy = a.y - b.y;
    return std::sqrt(dx * dx + dy * dy);
}

} // namespace gridcast

#endif
