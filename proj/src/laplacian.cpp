#include "nlh/laplacian.hpp"

#include <cmath>

#include "nlh/ground_state.hpp"

namespace nlh {

namespace {

// Q(a) - Q(b) without cancellation
double q_diff(const GroundState& gs, double a, double b)
{
    const double D = gs.dd();
    double sb = b * b / D;
    double l = std::log1p((a - b) * (a + b) / D / (1.0 + sb));
    return gs.Q(b) * std::expm1(-0.5 * (gs.d - 2) * l);
}

}  // namespace

Boundary parse_boundary(const std::string& s)
{
    if (s == "robin") return Boundary::robin;
    if (s == "neumann") return Boundary::neumann;
    if (s == "dirichlet") return Boundary::dirichlet;
    throw ConfigError("unknown boundary '" + s + "'");
}

std::string to_string(Boundary b)
{
    switch (b) {
    case Boundary::robin: return "robin";
    case Boundary::neumann: return "neumann";
    case Boundary::dirichlet: return "dirichlet";
    }
    return "?";
}

void Tridiag::solve(Vec& x) const
{
    const std::size_t n = di.size();
    Vec c(n);
    double b = di[0];
    if (b == 0.0) throw NumericError("singular tridiagonal system");
    c[0] = up[0] / b;
    x[0] /= b;
    for (std::size_t i = 1; i < n; ++i) {
        b = di[i] - lo[i] * c[i - 1];
        if (b == 0.0) throw NumericError("singular tridiagonal system");
        c[i] = (i + 1 < n) ? up[i] / b : 0.0;
        x[i] = (x[i] - lo[i] * x[i - 1]) / b;
    }
    for (std::size_t i = n - 1; i-- > 0;) x[i] -= c[i] * x[i + 1];
}

RadialLaplacian::RadialLaplacian(GridPtr grid, Boundary bc, bool balanced) : grid_(std::move(grid)), bc_(bc)
{
    const auto& g = *grid_;
    const int d = g.d();
    const std::size_t n = g.cells();
    const double R = g.r_max();
    GroundState gs(d);
    cond_.resize(n);
    double rd = std::pow(R, d - 1);
    if (!balanced) {
        for (std::size_t i = 0; i < n; ++i) cond_[i] = std::pow(g.face()[i + 1], d - 1) / g.h(i);
        g_ = gs.dQ(R) / gs.Q(R);
    } else {
        Vec q = gs.Q(g);
        const double p = gs.p();
        double flux = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            flux -= std::pow(q[i], p) * g.vol()[i];
            cond_[i] = flux / q_diff(gs, g.r(i + 1), g.r(i));
        }
        flux -= std::pow(q[n], p) * g.vol()[n];
        g_ = flux / (rd * q[n]);
    }
    if (bc_ != Boundary::robin) g_ = 0.0;
    g_ *= rd;  // stored as r_max^{d-1} g
}

void RadialLaplacian::apply(const Vec& u, Vec& out) const
{
    const auto& vol = grid_->vol();
    const std::size_t n = cond_.size();
    out.resize(n + 1);
    double left = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double right = cond_[i] * (u[i + 1] - u[i]);
        out[i] = (right - left) / vol[i];
        left = right;
    }
    if (bc_ == Boundary::dirichlet)
        out[n] = 0.0;
    else
        out[n] = (g_ * u[n] - left) / vol[n];
}

double RadialLaplacian::dirichlet_form(const Vec& u) const
{
    double s = 0.0;
    for (std::size_t i = 0; i < cond_.size(); ++i) {
        double du = u[i + 1] - u[i];
        s += cond_[i] * du * du;
    }
    if (bc_ == Boundary::robin) s -= g_ * u.back() * u.back();
    return s;
}

Tridiag RadialLaplacian::system(double a, const Vec* w) const
{
    const auto& vol = grid_->vol();
    const std::size_t n = cond_.size();
    Tridiag t;
    t.lo.assign(n + 1, 0.0);
    t.di.assign(n + 1, 1.0);
    t.up.assign(n + 1, 0.0);
    for (std::size_t i = 0; i <= n; ++i) {
        double cl = i > 0 ? cond_[i - 1] : 0.0;
        double cr = i < n ? cond_[i] : -g_;
        t.lo[i] = -a * cl / vol[i];
        t.up[i] = i < n ? -a * cr / vol[i] : 0.0;
        t.di[i] = 1.0 + a * (cl + cr) / vol[i];
        if (w) t.di[i] -= a * (*w)[i];
    }
    if (bc_ == Boundary::dirichlet) {
        t.lo[n] = 0.0;
        t.di[n] = 1.0;
    }
    return t;
}

}  // namespace nlh
