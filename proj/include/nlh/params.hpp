#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace nlh {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ConfigError : Error {
    using Error::Error;
};
struct NumericError : Error {
    using Error::Error;
};
struct InsufficientData : Error {
    using Error::Error;
};
struct DomainError : Error {
    using Error::Error;
};

// d >= 7, radial, energy critical exponent p = (d+2)/(d-2)
struct Parameters {
    int d = 7;
    int n = 4000;            // number of cells, nodes r_0..r_n
    double r_max = 100.0;
    double first_cell = 1e-3;
    double cutoff_m = 20.0;  // M in the cutoff chi_M
    bool low_dimension = false;  // permit 3 <= d < 7 (exploratory, outside the d >= 7 theory)

    double p() const { return double(d + 2) / double(d - 2); }
    double crit() const { return 2.0 * d / (d - 2.0); }  // p + 1
    double kappa() const { return std::pow(1.0 / (p() - 1.0), 1.0 / (p() - 1.0)); }
    double dd() const { return double(d) * (d - 2.0); }

    void validate() const
    {
        if (d < 3 || (d < 7 && !low_dimension))
            throw ConfigError("dimension must be >= 7 (or >= 3 with the low-dimension override), got " +
                              std::to_string(d));
        if (n < 16) throw ConfigError("grid needs at least 16 cells");
        if (!(r_max > 0) || !(first_cell > 0) || first_cell * n >= r_max)
            throw ConfigError("grid: need 0 < first_cell*n < r_max");
        if (!(cutoff_m > 0) || 2.0 * cutoff_m >= r_max)
            throw ConfigError("cutoff M must satisfy 0 < 2M < r_max");
    }
};

// |S^{d-1}|
inline double sphere_area(int d)
{
    return 2.0 * std::pow(M_PI, 0.5 * d) / std::tgamma(0.5 * d);
}

}  // namespace nlh
