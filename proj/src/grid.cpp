#include "nlh/grid.hpp"

#include <cmath>
#include <numeric>

#include <boost/math/quadrature/gauss.hpp>

namespace nlh {

double pow_diff(double a, double b, int k)
{
    if (k == 0) return 0.0;
    if (b == 0.0) return std::pow(a, k);
    // (a - b) * sum_j a^j b^{k-1-j}
    double s = 0.0, aj = 1.0, bj = std::pow(b, k - 1);
    for (int j = 0; j < k; ++j) {
        s += aj * bj;
        aj *= a;
        bj /= b;
    }
    return (a - b) * s;
}

namespace {

double solve_ratio(int n, double r_max, double h0)
{
    // h0 (q^n - 1)/(q - 1) = r_max, q > 1
    auto g = [&](double q) { return h0 * std::expm1(n * std::log(q)) / (q - 1.0) - r_max; };
    double lo = 1.0 + 1e-14, hi = 2.0;
    while (g(hi) < 0) hi = 1.0 + 2.0 * (hi - 1.0);
    for (int it = 0; it < 200; ++it) {
        double mid = 0.5 * (lo + hi);
        if (g(mid) < 0) lo = mid; else hi = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace

RadialGrid::RadialGrid(int d, int n, double r_max, double first_cell) : d_(d), n_(n)
{
    Parameters chk;
    chk.d = d; chk.n = n; chk.r_max = r_max; chk.first_cell = first_cell;
    chk.cutoff_m = 0.25 * r_max;
    chk.low_dimension = true;
    chk.validate();

    q_ = solve_ratio(n, r_max, first_cell);
    r_.resize(n + 1);
    double lq = std::log(q_);
    for (int i = 0; i <= n; ++i)
        r_[i] = first_cell * std::expm1(i * lq) / (q_ - 1.0);
    r_[n] = r_max;

    f_.resize(n + 2);
    f_[0] = 0.0;
    for (int i = 1; i <= n; ++i) f_[i] = 0.5 * (r_[i - 1] + r_[i]);
    f_[n + 1] = r_max;

    vol_.resize(n + 1);
    for (int i = 0; i <= n; ++i) vol_[i] = pow_diff(f_[i + 1], f_[i], d) / d;
    build_quadrature();
    build_stencils();
}

void RadialGrid::build_quadrature()
{
    using boost::math::quadrature::gauss;
    const int d = d_;
    quad_.assign(r_.size(), 0.0);
    // exact integral of the Lagrange interpolant on each panel against r^{d-1}
    auto panel = [&](std::size_t i0, std::size_t np) {
        double a = r_[i0], b = r_[i0 + np - 1];
        for (std::size_t j = 0; j < np; ++j) {
            auto lj = [&](double x) {
                double v = std::pow(x, d - 1);
                for (std::size_t m = 0; m < np; ++m)
                    if (m != j) v *= (x - r_[i0 + m]) / (r_[i0 + j] - r_[i0 + m]);
                return v;
            };
            quad_[i0 + j] += gauss<double, 20>::integrate(lj, a, b);
        }
    };
    std::size_t i = 0;
    for (; i + 2 < r_.size(); i += 2) panel(i, 3);
    if (i + 1 < r_.size()) panel(i, 2);
}

void RadialGrid::build_stencils()
{
    const int n = int(r_.size()) - 1;
    dst_.resize(r_.size());
    for (int i = 0; i <= n; ++i) {
        int lo = std::min(std::max(i - 2, -2), n - 4);
        double x[5];
        Stencil& s = dst_[i];
        for (int k = 0; k < 5; ++k) {
            int j = lo + k;
            s.idx[k] = std::abs(j);
            x[k] = j < 0 ? -r_[-j] : r_[j];
        }
        int c = i - lo;
        for (int k = 0; k < 5; ++k) {
            if (k == c) {
                double w = 0.0;
                for (int m = 0; m < 5; ++m)
                    if (m != c) w += 1.0 / (x[c] - x[m]);
                s.w[k] = w;
            } else {
                double num = 1.0, den = 1.0;
                for (int m = 0; m < 5; ++m) {
                    if (m != k) den *= x[k] - x[m];
                    if (m != k && m != c) num *= x[c] - x[m];
                }
                s.w[k] = num / den;
            }
        }
    }
}

Vec RadialGrid::derivative(const Vec& u) const
{
    Vec du(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) {
        const Stencil& s = dst_[i];
        double v = 0.0;
        for (int k = 0; k < 5; ++k) v += s.w[k] * u[s.idx[k]];
        du[i] = v;
    }
    du[0] = 0.0;
    return du;
}

double RadialGrid::integrate(const Vec& f) const
{
    double s = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) s += vol_[i] * f[i];
    return s;
}

double RadialGrid::inner(const Vec& f, const Vec& g) const
{
    double s = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) s += vol_[i] * f[i] * g[i];
    return s;
}

double RadialGrid::norm(const Vec& f) const { return std::sqrt(inner(f, f)); }

Vec RadialGrid::power_weights(double k) const
{
    Vec w(r_.size());
    for (std::size_t i = 0; i < r_.size(); ++i)
        w[i] = (std::pow(f_[i + 1], k + 1.0) - std::pow(f_[i], k + 1.0)) / (k + 1.0);
    return w;
}

}  // namespace nlh
