#include "nlh/spectral.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <random>

#include <boost/numeric/odeint.hpp>

#include "nlh/parallel.hpp"
#include "nlh/stats.hpp"

namespace nlh {

namespace ode = boost::numeric::odeint;
using State2 = std::array<double, 2>;

RadialOperator::RadialOperator(const RadialLaplacian& lap, int n) : lap_(lap), n_(n), first_(n > 0 ? 1 : 0)
{
    if (n < 0) throw ConfigError("spherical harmonic index must be >= 0");
    const auto& g = lap_.grid();
    if (g.size() < 10) throw ConfigError("grid has fewer than 10 nodes");
    GroundState gs(g.d());
    const double c = double(n) * (g.d() + n - 2);
    pot_.resize(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        double r = g.r(i);
        pot_[i] = gs.V(r) + (n > 0 && i > 0 ? c / (r * r) : 0.0);
    }
    if (n > 0) pot_[0] = 0.0;
}

RadialOperator assemble_H(const RadialLaplacian& lap, int n) { return RadialOperator(lap, n); }

void RadialOperator::apply(const Vec& u, Vec& out) const
{
    if (first_ == 0) {
        lap_.apply(u, out);
    } else {
        Vec w(u);
        w[0] = 0.0;
        lap_.apply(w, out);
    }
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = -out[i] + pot_[i] * u[i];
    if (first_ > 0) out[0] = 0.0;
    if (lap_.boundary() == Boundary::dirichlet) out.back() = 0.0;
}

double RadialOperator::form(const Vec& u) const
{
    const auto& vol = grid().vol();
    double s = 0.0;
    if (first_ == 0) {
        s = lap_.dirichlet_form(u);
    } else {
        Vec w(u);
        w[0] = 0.0;
        s = lap_.dirichlet_form(w);
    }
    for (std::size_t i = first_; i < u.size(); ++i) s += vol[i] * pot_[i] * u[i] * u[i];
    return s;
}

void RadialOperator::symmetric(Vec& diag, Vec& off) const
{
    const auto& vol = grid().vol();
    const auto& c = lap_.cond();
    const std::size_t n = c.size();
    diag.clear();
    off.clear();
    for (std::size_t i = first_; i < n; ++i) {
        double cl = i > 0 ? c[i - 1] : 0.0;
        diag.push_back((cl + c[i]) / vol[i] + pot_[i]);
        if (i + 1 < n) off.push_back(-c[i] / std::sqrt(vol[i] * vol[i + 1]));
    }
}

std::size_t sturm_count(const Vec& diag, const Vec& off, double x)
{
    std::size_t cnt = 0;
    double q = diag[0] - x;
    const double tiny = std::numeric_limits<double>::min();
    if (q < 0) ++cnt;
    for (std::size_t i = 1; i < diag.size(); ++i) {
        if (q == 0.0) q = tiny;
        q = diag[i] - x - off[i - 1] * off[i - 1] / q;
        if (q < 0) ++cnt;
    }
    return cnt;
}

Eigenpair ground_eig(const RadialOperator& h0)
{
    if (h0.index() != 0) throw ConfigError("ground_eig needs the n = 0 operator");
    Vec diag, off;
    h0.symmetric(diag, off);
    const std::size_t m = diag.size();
    double lo = 1e300, hi = -1e300;
    for (std::size_t i = 0; i < m; ++i) {
        double rad = (i > 0 ? std::abs(off[i - 1]) : 0.0) + (i + 1 < m ? std::abs(off[i]) : 0.0);
        lo = std::min(lo, diag[i] - rad);
        hi = std::max(hi, diag[i] + rad);
    }
    Eigenpair ep;
    ep.negative = sturm_count(diag, off, 0.0);
    if (ep.negative == 0)
        throw NumericError("no negative eigenvalue of H: grid too coarse or r_max too small");
    hi = 0.0;
    for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, std::abs(lo)); ++it) {
        double mid = 0.5 * (lo + hi);
        if (sturm_count(diag, off, mid) >= 1) hi = mid; else lo = mid;
    }
    double lam = 0.5 * (lo + hi);
    double sigma = lam - 1e-10 * std::max(1.0, std::abs(lam));

    Tridiag t;
    t.lo.assign(m, 0.0);
    t.up.assign(m, 0.0);
    t.di.resize(m);
    for (std::size_t i = 0; i < m; ++i) {
        t.di[i] = diag[i] - sigma;
        if (i > 0) t.lo[i] = off[i - 1];
        if (i + 1 < m) t.up[i] = off[i];
    }
    Vec z(m, 1.0);
    for (int it = 0; it < 6; ++it) {
        t.solve(z);
        double nz = 0.0;
        for (double x : z) nz += x * x;
        nz = std::sqrt(nz);
        for (double& x : z) x /= nz;
    }
    // Rayleigh quotient
    double rq = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        double hz = diag[i] * z[i];
        if (i > 0) hz += off[i - 1] * z[i - 1];
        if (i + 1 < m) hz += off[i] * z[i + 1];
        rq += z[i] * hz;
    }
    if (z[0] < 0)
        for (double& x : z) x = -x;

    const auto& g = h0.grid();
    ep.e0 = -rq;
    ep.Y.assign(g.size(), 0.0);
    for (std::size_t i = 0; i < m; ++i) ep.Y[i] = z[i] / std::sqrt(g.vol()[i]);
    ep.int_Y = sphere_area(g.d()) * g.integrate(ep.Y);
    return ep;
}

double shoot_e0(int d, const ShootOptions& opt)
{
    GroundState gs(d);
    const double p = gs.p(), D = gs.dd();
    // +1: no node and growing (e above e0), -1: node (e below e0)
    auto side = [&](double e) {
        auto sys = [&](const State2& x, State2& dx, double r) {
            dx[0] = x[1];
            dx[1] = -(d - 1) / r * x[1] + (gs.V(r) + e) * x[0];
        };
        double r = opt.r_start;
        double c = (e - p) / (2.0 * d);
        double k = ((e - p) * c + 2.0 * p / D) / (4.0 * (d + 2));
        State2 x = {1.0 + c * r * r + k * r * r * r * r, 2.0 * c * r + 4.0 * k * r * r * r};
        auto stepper = ode::make_controlled(opt.tol, opt.tol, ode::runge_kutta_dopri5<State2>());
        double dr = 1e-3;
        int guard = 0;
        while (r < opt.r_end) {
            if (r + dr > opt.r_end) dr = opt.r_end - r;
            if (stepper.try_step(sys, x, r, dr) != ode::success) {
                if (++guard > 10000) throw NumericError("shooting: step size underflow");
                continue;
            }
            guard = 0;
            if (x[0] < 0) return -1;
            if (x[1] > 0 && gs.V(r) + e > 0) return +1;
        }
        return x[0] > 0 ? +1 : -1;
    };
    double lo = 0.0, hi = p;
    if (side(lo) != -1 || side(hi) != +1) throw NumericError("shooting: e0 not bracketed in (0, p)");
    for (int it = 0; it < 80 && hi - lo > 1e-15; ++it) {
        double mid = 0.5 * (lo + hi);
        if (side(mid) > 0) hi = mid; else lo = mid;
    }
    return 0.5 * (lo + hi);
}

double kernel_residual(const RadialOperator& h, const Vec& u)
{
    const auto& g = h.grid();
    Vec res = h.apply(u);
    double rr = 0.0, uu = 0.0;
    for (std::size_t i = h.first(); i + 1 < g.size(); ++i) {
        rr += g.vol()[i] * res[i] * res[i];
        uu += g.vol()[i] * u[i] * u[i];
    }
    return std::sqrt(rr / uu);
}

Vec build_Psi0(const RadialGrid& g, const Vec& Y, double m)
{
    if (!(m > 0)) throw ConfigError("cutoff radius M must be positive");
    GroundState gs(g.d());
    Vec lq = gs.LambdaQ(g);
    Vec chi = g.sample([&](double r) { return cutoff(r, m); });
    Vec psi(g.size());
    double mass = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        psi[i] = chi[i] * lq[i];
        mass += g.vol()[i] * chi[i] * lq[i] * lq[i];
    }
    if (mass < 1e-6) throw ConfigError("cutoff radius M too small: int chi_M (Lambda Q)^2 < 1e-6");
    double yy = g.inner(Y, Y);
    double c = g.inner(psi, Y) / yy;
    for (std::size_t i = 0; i < g.size(); ++i) psi[i] -= c * Y[i];
    // second pass removes rounding residue
    c = g.inner(psi, Y) / yy;
    for (std::size_t i = 0; i < g.size(); ++i) psi[i] -= c * Y[i];
    return psi;
}

SpectralData make_spectral(const Parameters& prm, Boundary bc)
{
    prm.validate();
    SpectralData sd;
    sd.prm = prm;
    sd.grid = std::make_shared<RadialGrid>(prm);
    sd.lap = std::make_shared<RadialLaplacian>(sd.grid, bc);
    sd.h0 = std::make_shared<RadialOperator>(*sd.lap, 0);
    Eigenpair ep = ground_eig(*sd.h0);
    // the zero mode Lambda Q is an L^2 eigenfunction; its discrete eigenvalue may land just below 0
    Vec diag, off;
    sd.h0->symmetric(diag, off);
    std::size_t below = sturm_count(diag, off, -zero_mode_tol);
    if (below != 1)
        throw NumericError("discrete H has " + std::to_string(below) + " eigenvalues below -" +
                           std::to_string(zero_mode_tol));
    sd.e0 = ep.e0;
    sd.Y = std::move(ep.Y);
    sd.int_Y = ep.int_Y;
    sd.negative = ep.negative;
    sd.Psi0 = build_Psi0(*sd.grid, sd.Y, prm.cutoff_m);
    GroundState gs(prm.d);
    sd.Q = gs.Q(*sd.grid);
    sd.LQ = gs.LambdaQ(*sd.grid);
    return sd;
}

ZeroModePair zero_modes(int n, const RadialGrid& g)
{
    if (n < 0) throw ConfigError("spherical harmonic index must be >= 0");
    const int d = g.d();
    GroundState gs(d);
    const double c = double(n) * (d + n - 2);
    auto sys = [&](const State2& x, State2& dx, double t) {
        double r = std::exp(t);
        dx[0] = x[1];
        dx[1] = -(d - 2) * x[1] + (r * r * gs.V(r) + c) * x[0];
    };
    const std::size_t N = g.size();
    ZeroModePair z;
    z.n = n;
    z.T.assign(N, 0.0);
    z.dlogT.assign(N, 0.0);
    z.Gamma.assign(N, std::numeric_limits<double>::quiet_NaN());
    if (n == 0) z.T[0] = 1.0;

    const double tol = 1e-13;
    auto run = [&](State2 x, const std::vector<double>& times, auto&& obs) {
        auto st = ode::make_dense_output(1e-200, tol, ode::runge_kutta_dopri5<State2>());
        double dt = times[1] > times[0] ? 1e-3 : -1e-3;
        try {
            ode::integrate_times(st, sys, x, times.begin(), times.end(), dt, obs);
        } catch (const std::exception& e) {
            throw NumericError(std::string("zero-mode ODE integration failed: ") + e.what());
        }
    };

    // forward from t << 0, w ~ e^{nt}
    {
        const double t0 = std::min(-16.0, std::log(g.r(1)) - 4.0);
        std::vector<double> times{t0};
        for (std::size_t i = 1; i < N; ++i) times.push_back(std::log(g.r(i)));
        // unit seed, rescaled by e^{n t0} afterwards
        State2 x{1.0, double(n)};
        const double sc = std::exp(n * t0);
        std::size_t k = 0;
        run(x, times, [&](const State2& s, double) {
            if (k > 0) {
                z.T[k] = sc * s[0];
                z.dlogT[k] = s[1] / (g.r(k) * s[0]);
            }
            ++k;
        });
        // log T = a log r + b0 + b1 (r_max/r)^2 + b2 (r_max/r)^4 over [r_max/2, r_max]
        std::vector<double> xs, ys;
        for (std::size_t i = 1; i < N; ++i)
            if (g.r(i) >= 0.5 * g.r_max() && z.T[i] != 0.0) {
                xs.push_back(g.r(i));
                ys.push_back(std::log(std::abs(z.T[i])));
            }
        z.infinity_exponent = xs.size() >= 8 ? power_fit_inverse_squares(xs, ys, g.r_max(), 2)
                                             : std::numeric_limits<double>::quiet_NaN();
    }
    // backward from t >> 0, w ~ e^{-(d+n-2)t}
    {
        const double t1 = 16.0, a = -(d + n - 2.0);
        std::vector<double> times{t1};
        for (std::size_t i = N - 1; i >= 1; --i) times.push_back(std::log(g.r(i)));
        const double f0 = -12.0, f1 = -9.0;
        const int nf = 31;
        for (int j = 0; j < nf; ++j) {
            double t = f1 - (f1 - f0) * j / (nf - 1);
            if (t < times.back()) times.push_back(t);
        }
        State2 x{1.0, a};
        const double sc = std::exp(a * t1);
        std::vector<double> xs, ys;
        std::size_t k = 0;
        run(x, times, [&](const State2& s, double t) {
            if (k >= 1 && k <= N - 1) z.Gamma[N - k] = sc * s[0];
            if (t <= f1 + 1e-12 && t >= f0 - 1e-12) {
                xs.push_back(t);
                ys.push_back(std::log(std::abs(s[0])));
            }
            ++k;
        });
        z.origin_exponent = linear_fit(xs, ys).slope;
    }
    return z;
}

double cosine(const RadialGrid& g, const Vec& a, const Vec& b, double r_cut)
{
    double ab = 0, aa = 0, bb = 0;
    for (std::size_t i = 1; i < g.size(); ++i) {
        if (g.r(i) > r_cut) break;
        double w = g.vol()[i];
        ab += w * a[i] * b[i];
        aa += w * a[i] * a[i];
        bb += w * b[i] * b[i];
    }
    return ab / std::sqrt(aa * bb);
}

double factorized_form(const RadialGrid& g, const ZeroModePair& z, const Vec& v)
{
    const int d = g.d();
    double s = 0.0;
    for (std::size_t i = (z.n > 0 ? 1 : 0); i + 1 < g.size(); ++i) {
        double h = g.h(i);
        double l = (i == 0) ? 0.5 * z.dlogT[1] : 0.5 * (z.dlogT[i] + z.dlogT[i + 1]);
        double av = -(v[i + 1] - v[i]) / h + l * 0.5 * (v[i] + v[i + 1]);
        double w = pow_diff(g.r(i + 1), g.r(i), d) / d;
        s += w * av * av;
    }
    return s;
}

double hdot_sq(const RadialLaplacian& lap, const Vec& v, int s)
{
    switch (s) {
    case 1: return lap.dirichlet_form(v);
    case 2: {
        Vec lv = lap.apply(v);
        return lap.grid().inner(lv, lv);
    }
    case 3: return lap.dirichlet_form(lap.apply(v));
    default: throw ConfigError("Sobolev index must be 1, 2 or 3");
    }
}

double hardy_check(const RadialLaplacian& lap, const Vec& v, int s)
{
    const auto& g = lap.grid();
    double den = hdot_sq(lap, v, s);
    if (!(den > 0)) throw DomainError("hardy_check: field has zero Dot H^s norm");
    Vec w = g.power_weights(g.d() - 1.0 - 2.0 * s);
    double num = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) num += w[i] * v[i] * v[i];
    return num / den;
}

Vec random_field(const RadialGrid& g, std::uint64_t seed, std::uint64_t index, int terms)
{
    std::seed_seq ss{std::uint32_t(seed), std::uint32_t(seed >> 32), std::uint32_t(index),
                     std::uint32_t(index >> 32)};
    std::mt19937_64 rng(ss);
    std::normal_distribution<double> nd;
    std::uniform_int_distribution<int> kd(0, 6);
    std::uniform_real_distribution<double> sd(1.0, 10.0);
    Vec v(g.size(), 0.0);
    for (int j = 0; j < terms; ++j) {
        double c = nd(rng);
        int k = kd(rng);
        double sig = sd(rng);
        for (std::size_t i = 0; i < g.size(); ++i) {
            double r = g.r(i);
            v[i] += c * std::exp(-r * r / (sig * sig)) * std::pow(r, k);
        }
    }
    return v;
}

Vec project_out(const SpectralData& sd, Vec v)
{
    const auto& g = *sd.grid;
    const double yy = g.inner(sd.Y, sd.Y), pp = g.inner(sd.Psi0, sd.Psi0);
    for (int pass = 0; pass < 2; ++pass) {
        double a = g.inner(v, sd.Y) / yy;
        double b = g.inner(v, sd.Psi0) / pp;
        for (std::size_t i = 0; i < v.size(); ++i) v[i] -= a * sd.Y[i] + b * sd.Psi0[i];
    }
    return v;
}

void coercivity_quotients(const SpectralData& sd, const Vec& v, double q[3])
{
    const auto& H = *sd.h0;
    const auto& g = *sd.grid;
    Vec hv = H.apply(v);
    q[0] = H.form(v) / hdot_sq(*sd.lap, v, 1);
    q[1] = g.inner(hv, hv) / hdot_sq(*sd.lap, v, 2);
    q[2] = H.form(hv) / hdot_sq(*sd.lap, v, 3);
}

CoercivityResult coercivity_estimate(const SpectralData& sd, std::size_t samples, std::uint64_t seed, int workers)
{
    if (samples < 100) throw ConfigError("coercivity_estimate needs at least 100 samples");
    std::vector<std::array<double, 6>> out(samples);
    parallel_for(samples, workers, [&](std::size_t k) {
        Vec raw = random_field(*sd.grid, seed, k);
        Vec v = project_out(sd, raw);
        double q[3];
        coercivity_quotients(sd, v, q);
        for (int j = 0; j < 3; ++j) out[k][j] = q[j];
        for (int s = 1; s <= 3; ++s) out[k][2 + s] = hardy_check(*sd.lap, raw, s);
    });
    CoercivityResult res;
    res.samples = samples;
    res.c1 = res.c2 = res.c3 = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < samples; ++k) {
        double q[3] = {out[k][0], out[k][1], out[k][2]};
        for (int j = 0; j < 3; ++j)
            if (!(q[j] > 0))
                throw CoercivityViolation("coercivity quotient " + std::to_string(j + 1) +
                                              " not positive for sample " + std::to_string(k),
                                          project_out(sd, random_field(*sd.grid, seed, k)), j + 1);
        res.c1 = std::min(res.c1, q[0]);
        res.c2 = std::min(res.c2, q[1]);
        res.c3 = std::min(res.c3, q[2]);
        for (int s = 0; s < 3; ++s) res.hardy_max[s] = std::max(res.hardy_max[s], out[k][3 + s]);
    }
    return res;
}

nlohmann::json spectral_report(const SpectralData& sd, const CoercivityResult* co)
{
    const auto& g = *sd.grid;
    nlohmann::json j;
    j["d"] = sd.prm.d;
    j["p"] = sd.prm.p();
    j["grid"] = {{"cells", g.cells()}, {"r_max", g.r_max()}, {"first_cell", g.r(1)}, {"ratio", g.ratio()}};
    j["M"] = sd.prm.cutoff_m;
    j["e0"] = sd.e0;
    j["negative_eigenvalues"] = sd.negative;
    j["int_Y"] = sd.int_Y;
    j["Y0"] = sd.Y[0];

    Vec hy = sd.h0->apply(sd.Y);
    for (std::size_t i = 0; i < hy.size(); ++i) hy[i] += sd.e0 * sd.Y[i];
    j["residual_eig"] = g.norm(hy) / g.norm(sd.Y);
    j["residual_LambdaQ"] = kernel_residual(*sd.h0, sd.LQ);
    RadialOperator h1(*sd.lap, 1);
    j["residual_drQ"] = kernel_residual(h1, GroundState(sd.prm.d).dQ(g));
    j["Psi0_dot_Y"] = g.inner(sd.Psi0, sd.Y);
    j["Psi0_dot_LambdaQ"] = g.inner(sd.Psi0, sd.LQ);

    nlohmann::json zm = nlohmann::json::array();
    for (int n = 0; n <= 2; ++n) {
        ZeroModePair z = zero_modes(n, g);
        zm.push_back({{"n", n}, {"origin_exponent", z.origin_exponent}, {"infinity_exponent", z.infinity_exponent}});
    }
    j["zero_modes"] = zm;
    if (co) {
        j["coercivity"] = {{"samples", co->samples},
                           {"c1", co->c1},
                           {"c2", co->c2},
                           {"c3", co->c3},
                           {"hardy_max", {co->hardy_max[0], co->hardy_max[1], co->hardy_max[2]}}};
    }
    return j;
}

}  // namespace nlh
