#pragma once

#include <vector>

namespace nlh {

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
};

// least squares y = slope x + intercept
LineFit linear_fit(const std::vector<double>& x, const std::vector<double>& y);

// exponent a in log y = a log r + sum_{k=0..m} b_k (r_ref/r)^{2k}
double power_fit_inverse_squares(const std::vector<double>& r, const std::vector<double>& logy, double r_ref, int m);

double median(std::vector<double> v);

}  // namespace nlh
