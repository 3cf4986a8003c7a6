#include "nlh/ground_state.hpp"

namespace nlh {

namespace {
double bump(double t) { return t > 0 ? std::exp(-1.0 / t) : 0.0; }
}  // namespace

double cutoff(double r, double m)
{
    double x = r / m;
    if (x <= 1.0) return 1.0;
    if (x >= 2.0) return 0.0;
    double a = bump(2.0 - x), b = bump(x - 1.0);
    return a / (a + b);
}

}  // namespace nlh
