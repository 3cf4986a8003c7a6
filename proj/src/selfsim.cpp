#include "nlh/selfsim.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numbers>
#include <ostream>

#include "nlh/stats.hpp"

namespace nlh {

namespace {

double p_of(int d) { return double(d + 2) / (d - 2); }

}  // namespace

SelfSimGrid::SelfSimGrid(int d, int n, double y_max) : d_(d)
{
    if (d < 3) throw ConfigError("self-similar grid: dimension must be >= 3");
    if (n < 8 || n % 2) throw ConfigError("self-similar grid: need an even number of intervals >= 8");
    if (!(y_max > 0)) throw ConfigError("self-similar grid: y_max must be positive");
    h_ = y_max / n;
    y_.resize(n + 1);
    rho_.resize(n + 1);
    const double c = sphere_area(d) * std::pow(4.0 * std::numbers::pi, -0.5 * d);
    for (int i = 0; i <= n; ++i) {
        double y = i * h_;
        y_[i] = y;
        double simpson = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
        rho_[i] = simpson * h_ / 3.0 * c * std::pow(y, d - 1) * std::exp(-0.25 * y * y);
    }
}

double SelfSimGrid::integrate(const Vec& f) const
{
    double s = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) s += rho_[i] * f[i];
    return s;
}

Vec SelfSimGrid::gradient(const Vec& w) const
{
    const std::size_t n = w.size();
    auto at = [&](long i) { return w[std::size_t(std::abs(i))]; };
    Vec g(n);
    for (std::size_t i = 0; i + 2 < n; ++i) {
        long k = long(i);
        g[i] = (-at(k + 2) + 8.0 * at(k + 1) - 8.0 * at(k - 1) + at(k - 2)) / (12.0 * h_);
    }
    // one-sided fourth order at the far end
    for (std::size_t i = n - 2; i < n; ++i) {
        const double* c;
        static const double c3[5] = {-1.0 / 12, 6.0 / 12, -18.0 / 12, 10.0 / 12, 3.0 / 12};
        static const double c4[5] = {3.0 / 12, -16.0 / 12, 36.0 / 12, -48.0 / 12, 25.0 / 12};
        c = (i == n - 2) ? c3 : c4;
        std::size_t base = (i == n - 2) ? i - 3 : i - 4;
        double s = 0.0;
        for (int j = 0; j < 5; ++j) s += c[j] * w[base + j];
        g[i] = s / h_;
    }
    return g;
}

SelfSimFrame renormalize(const RadialField& u, Time t, Time T, SelfSimGridPtr grid)
{
    if (!u.grid || !grid) throw ConfigError("renormalize: missing grid");
    if (!(T > t)) throw DomainError("renormalize: need t < T");
    const int d = u.grid->d();
    if (grid->d() != d) throw ConfigError("renormalize: dimension mismatch");
    const double L = double(T - t);
    const double sq = std::sqrt(L);
    const double R = u.grid->r_max();
    if (sq * grid->y_max() > R)
        throw DomainError("renormalize: y-grid exceeds the radial domain; maximal usable y = " +
                          std::to_string(R / sq));
    RadialInterpolant ip(*u.grid, u.u);
    const double f = std::pow(L, 1.0 / (p_of(d) - 1.0));
    SelfSimFrame fr;
    fr.grid = grid;
    fr.T = T;
    fr.t = t;
    fr.s = -std::log(L);
    fr.w.resize(grid->size());
    for (std::size_t i = 0; i < grid->size(); ++i) fr.w[i] = f * ip(sq * grid->y()[i]);
    return fr;
}

double energy_w(const SelfSimFrame& f)
{
    const int d = f.grid->d();
    const double p = p_of(d);
    Vec g = f.grid->gradient(f.w);
    Vec e(f.w.size());
    for (std::size_t i = 0; i < e.size(); ++i) {
        double w = f.w[i];
        e[i] = 0.5 * g[i] * g[i] + w * w / (2.0 * (p - 1.0)) - std::pow(std::abs(w), p + 1.0) / (p + 1.0);
    }
    return f.grid->integrate(e);
}

double mass_w(const SelfSimFrame& f)
{
    Vec e(f.w.size());
    for (std::size_t i = 0; i < e.size(); ++i) e[i] = f.w[i] * f.w[i];
    return f.grid->integrate(e);
}

double I_w(const SelfSimFrame& f)
{
    const double p = p_of(f.grid->d());
    return -2.0 * energy_w(f) + (p - 1.0) / (p + 1.0) * std::pow(mass_w(f), 0.5 * (p + 1.0));
}

bool blowup_criterion(const SelfSimFrame& f, double tol)
{
    const double p = p_of(f.grid->d());
    double E = energy_w(f), m = mass_w(f);
    double I = -2.0 * E + (p - 1.0) / (p + 1.0) * std::pow(m, 0.5 * (p + 1.0));
    double scale = std::max(1.0, 2.0 * std::abs(E) + (p - 1.0) / (p + 1.0) * std::pow(m, 0.5 * (p + 1.0)));
    return I > tol * scale;
}

double energy_const(double c, int d)
{
    const double p = p_of(d);
    return c * c / (2.0 * (p - 1.0)) - std::pow(std::abs(c), p + 1.0) / (p + 1.0);
}

double I_const(double c, int d)
{
    const double p = p_of(d);
    return -c * c / (p - 1.0) + std::pow(std::abs(c), p + 1.0);
}

std::vector<SelfSimFrame> frames_from_run(const RunRecord& rec, Time T, SelfSimGridPtr grid)
{
    std::vector<SelfSimFrame> out;
    const double R = rec.grid->r_max();
    for (const auto& sn : rec.snaps) {
        if (!(sn.t < T)) continue;
        if (std::sqrt(double(T - sn.t)) * grid->y_max() > R) continue;
        SelfSimFrame f = renormalize(RadialField{rec.grid, sn.u, double(sn.t)}, sn.t, T, grid);
        if (!sn.u_coarse.empty()) {
            SelfSimFrame c = renormalize(RadialField{rec.grid, sn.u_coarse, double(sn.t)}, sn.t, T, grid);
            f.err = std::abs(energy_w(f) - energy_w(c));
        }
        out.push_back(std::move(f));
    }
    return out;
}

LyapunovReport lyapunov_check(const std::vector<SelfSimFrame>& frames, double factor, double abs_floor)
{
    if (frames.size() < 3) throw FrameMismatch("lyapunov_check: need at least 3 frames");
    for (const auto& f : frames)
        if (f.T != frames[0].T || f.grid != frames[0].grid)
            throw FrameMismatch("lyapunov_check: frames renormalized with different T or grids");
    for (std::size_t k = 1; k < frames.size(); ++k)
        if (!(frames[k].s > frames[k - 1].s)) throw FrameMismatch("lyapunov_check: frames not time-ordered");

    const int d = frames[0].grid->d();
    const double p = p_of(d);
    LyapunovReport rep;
    rep.frames = frames.size();
    Vec E(frames.size()), G(frames.size());
    for (std::size_t k = 0; k < frames.size(); ++k) {
        E[k] = energy_w(frames[k]);
        Vec g = frames[k].grid->gradient(frames[k].w);
        Vec e(g.size());
        for (std::size_t i = 0; i < e.size(); ++i) {
            double w = frames[k].w[i];
            e[i] = g[i] * g[i] + w * w + std::pow(std::abs(w), p + 1.0);
        }
        G[k] = frames[k].grid->integrate(e);
    }
    rep.E_first = E.front();
    rep.E_last = E.back();
    for (std::size_t k = 1; k < frames.size(); ++k) {
        double tol = factor * std::max(frames[k].err, frames[k - 1].err) + abs_floor;
        double ex = E[k] - E[k - 1] - tol;
        rep.worst_excess = std::max(rep.worst_excess, ex);
        if (ex > 0) {
            rep.monotone = false;
            ++rep.violations;
        }
    }
    std::vector<double> rel;
    for (std::size_t k = 1; k + 1 < frames.size(); ++k) {
        const auto &a = frames[k - 1], &b = frames[k + 1];
        double ds = b.s - a.s;
        Vec ws(a.w.size());
        for (std::size_t i = 0; i < ws.size(); ++i) ws[i] = (b.w[i] - a.w[i]) / ds;
        Vec sq(ws.size());
        for (std::size_t i = 0; i < ws.size(); ++i) sq[i] = ws[i] * ws[i];
        double D = frames[k].grid->integrate(sq);
        if (!(D > 1e-14)) continue;
        double dE = -(E[k + 1] - E[k - 1]) / ds;
        rel.push_back(std::abs(dE - D) / D);
    }
    if (!rel.empty()) rep.median_rel_dissipation = median(rel);
    if (E[0] > 0 && E[0] <= 1) {
        for (const auto& f : frames)
            rep.l2_constant = std::max(rep.l2_constant, mass_w(f) / std::pow(E[0], 2.0 / (p + 1.0)));
    }
    // sliding windows of unit length in s
    for (std::size_t k = 0; k < frames.size(); ++k) {
        const double s0 = frames[k].s, s1 = s0 + 1.0;
        if (frames.back().s < s1) break;
        double acc = 0.0;
        for (std::size_t j = k; j + 1 < frames.size() && frames[j].s < s1; ++j) {
            double a = frames[j].s, b = std::min(frames[j + 1].s, s1);
            double gb = G[j] + (G[j + 1] - G[j]) * (b - a) / (frames[j + 1].s - a);
            acc += 0.5 * (b - a) * (G[j] * G[j] + gb * gb);
        }
        rep.spacetime_max = std::max(rep.spacetime_max, acc);
    }
    return rep;
}

RateCheck rate_check(const std::vector<Time>& t, const Vec& linf, int d, Time T)
{
    if (t.size() != linf.size()) throw ConfigError("rate_check: trace lengths differ");
    const double p = p_of(d);
    double top = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i)
        if (t[i] < T) top = std::max(top, linf[i]);
    std::vector<double> kh, lx, ly;
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (!(t[i] < T) || linf[i] < top / 10.0) continue;
        double L = double(T - t[i]);
        kh.push_back(linf[i] * std::pow(L, 1.0 / (p - 1.0)));
        lx.push_back(std::log(L));
        ly.push_back(std::log(linf[i]));
    }
    if (kh.size() < 5) throw InsufficientData("rate_check: fewer than 5 samples in the last decade");
    RateCheck rc;
    rc.kappa_hat = median(kh);
    rc.exponent_hat = -linear_fit(lx, ly).slope;
    rc.samples = kh.size();
    return rc;
}

RateCheck rate_check(const RunRecord& rec, Time T)
{
    if (rec.verdict != Verdict::blowup) throw InsufficientData("rate_check: run did not blow up");
    return rate_check(rec.t, rec.linf, rec.d, T);
}

std::array<bool, 3> criterion_probe(const RadialField& u, Time t, double remaining, SelfSimGridPtr grid)
{
    const double fac[3] = {0.9, 1.0, 1.1};
    std::array<bool, 3> out{};
    for (int k = 0; k < 3; ++k) out[k] = blowup_criterion(renormalize(u, t, t + Time(fac[k] * remaining), grid));
    return out;
}

void write_frames_csv(std::ostream& os, const std::vector<SelfSimFrame>& frames, const std::string& header)
{
    os << header << "t,s_ss,E_w,I_w,criterion,kappa_hat_running\n";
    for (const auto& f : frames) {
        double m = 0.0;
        for (double w : f.w) m = std::max(m, std::abs(w));
        os << std::setprecision(21) << f.t << std::setprecision(17) << ',' << f.s << ',' << energy_w(f) << ','
           << I_w(f) << ',' << (blowup_criterion(f) ? 1 : 0) << ',' << m << '\n';
    }
}

}  // namespace nlh
