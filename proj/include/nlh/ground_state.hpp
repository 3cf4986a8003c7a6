#pragma once

#include <cmath>

#include "nlh/grid.hpp"

namespace nlh {

// Q(r) = (1 + r^2/(d(d-2)))^{-(d-2)/2}
struct GroundState {
    int d;
    explicit GroundState(int dim) : d(dim) {}

    double p() const { return double(d + 2) / (d - 2); }
    double dd() const { return double(d) * (d - 2); }

    double Q(double r) const { return std::pow(1.0 + r * r / dd(), -0.5 * (d - 2)); }
    double dQ(double r) const { return -(d - 2) * r / dd() * std::pow(1.0 + r * r / dd(), -0.5 * d); }
    double d2Q(double r) const
    {
        double s = r * r / dd();
        return -(d - 2) / dd() * std::pow(1.0 + s, -0.5 * d - 1.0) * (1.0 + s - d * s);
    }
    double LambdaQ(double r) const { return 0.5 * (d - 2) * Q(r) + r * dQ(r); }
    // V = -p Q^{p-1} = -p (1 + s)^{-2}
    double V(double r) const
    {
        double s = r * r / dd();
        return -p() / ((1.0 + s) * (1.0 + s));
    }
    // d/dr of Lambda Q
    double dLambdaQ(double r) const { return 0.5 * d * dQ(r) + r * d2Q(r); }

    Vec Q(const RadialGrid& g) const { return g.sample([&](double r) { return Q(r); }); }
    Vec LambdaQ(const RadialGrid& g) const { return g.sample([&](double r) { return LambdaQ(r); }); }
    Vec V(const RadialGrid& g) const { return g.sample([&](double r) { return V(r); }); }
    Vec dQ(const RadialGrid& g) const { return g.sample([&](double r) { return dQ(r); }); }
};

// kappa = (p-1)^{-1/(p-1)}
inline double kappa_const(int d)
{
    double p = double(d + 2) / (d - 2);
    return std::pow(1.0 / (p - 1.0), 1.0 / (p - 1.0));
}

// smooth cutoff: 1 on [0, M], 0 on [2M, inf)
double cutoff(double r, double m);

}  // namespace nlh
