#pragma once

#include <boost/math/special_functions/fpclassify.hpp>
#include <boost/math/interpolators/pchip.hpp>

#include "nlh/grid.hpp"

namespace nlh {

// monotone cubic interpolant of a radial profile, even across r = 0,
// c r^{-(d-2)} beyond the last node
class RadialInterpolant {
public:
    RadialInterpolant(const RadialGrid& g, const Vec& u);
    double operator()(double r) const;

private:
    boost::math::interpolators::pchip<Vec> spline_;
    double r_max_, tail_;
    int d_;
};

// y -> lambda^{(d-2)/2} u(lambda y) sampled on g
Vec rescale(const RadialInterpolant& u, const RadialGrid& g, double lambda);

}  // namespace nlh
