#include "nlh/stats.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

#include "nlh/params.hpp"

namespace nlh {

LineFit linear_fit(const std::vector<double>& x, const std::vector<double>& y)
{
    const std::size_t n = x.size();
    if (n < 2 || y.size() != n) throw InsufficientData("linear fit needs at least two points");
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0) throw InsufficientData("linear fit: abscissae coincide");
    LineFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    f.r2 = syy > 0 ? sxy * sxy / (sxx * syy) : 1.0;
    return f;
}

double power_fit_inverse_squares(const std::vector<double>& r, const std::vector<double>& logy, double r_ref, int m)
{
    const std::size_t n = r.size();
    if (n < std::size_t(m + 3)) throw InsufficientData("power fit: too few points");
    Eigen::MatrixXd A(n, m + 2);
    Eigen::VectorXd b(n);
    for (std::size_t i = 0; i < n; ++i) {
        A(i, 0) = std::log(r[i]);
        double x = (r_ref / r[i]) * (r_ref / r[i]), xk = 1.0;
        for (int k = 0; k <= m; ++k) {
            A(i, 1 + k) = xk;
            xk *= x;
        }
        b(i) = logy[i];
    }
    Eigen::VectorXd c = A.colPivHouseholderQr().solve(b);
    return c(0);
}

double median(std::vector<double> v)
{
    if (v.empty()) throw InsufficientData("median of empty sample");
    std::sort(v.begin(), v.end());
    std::size_t m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

}  // namespace nlh
