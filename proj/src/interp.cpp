#include "nlh/interp.hpp"

#include <cmath>

namespace nlh {

namespace {

boost::math::interpolators::pchip<Vec> make_spline(const RadialGrid& g, const Vec& u)
{
    if (u.size() != g.size()) throw ConfigError("interpolant: field and grid sizes differ");
    Vec x = g.r(), y = u;
    const double R = g.r_max();
    const double right = -(g.d() - 2) * u.back() / R;
    return boost::math::interpolators::pchip<Vec>(std::move(x), std::move(y), 0.0, right);
}

}  // namespace

RadialInterpolant::RadialInterpolant(const RadialGrid& g, const Vec& u)
    : spline_(make_spline(g, u)), r_max_(g.r_max()), tail_(u.back() * std::pow(g.r_max(), g.d() - 2)), d_(g.d())
{
}

double RadialInterpolant::operator()(double r) const
{
    r = std::abs(r);
    if (r >= r_max_) return tail_ * std::pow(r, -(d_ - 2));
    return spline_(r);
}

Vec rescale(const RadialInterpolant& u, const RadialGrid& g, double lambda)
{
    const double f = std::pow(lambda, 0.5 * (g.d() - 2));
    return g.sample([&](double y) { return f * u(lambda * y); });
}

}  // namespace nlh
