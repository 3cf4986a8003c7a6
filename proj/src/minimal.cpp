#include "nlh/minimal.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>

#include <boost/math/quadrature/exp_sinh.hpp>

#include "nlh/modulation.hpp"
#include "nlh/parallel.hpp"
#include "nlh/selfsim.hpp"
#include "nlh/stats.hpp"

namespace nlh {

MinimalApproximant construct(int sign, int n, double epsilon, const SolverConfig& cfg, const SpectralData& sd)
{
    if (sign != 1 && sign != -1) throw ConfigError("minimal: sign must be +1 or -1");
    if (n < 1) throw ConfigError("minimal: backward depth n must be >= 1");
    if (!(epsilon >= 0 && epsilon <= 0.1)) throw ConfigError("minimal: epsilon must lie in [0, 0.1]");
    const double seed = epsilon * std::exp(-n * sd.e0);
    if (epsilon > 0 && seed < 1e-14) throw ConfigError("minimal: seed amplitude eps e^{-n e0} below 1e-14");

    const auto& g = *sd.grid;
    MinimalApproximant m;
    m.sign = sign;
    m.n = n;
    m.epsilon = epsilon;
    Vec u = sd.Q;
    for (std::size_t i = 0; i < u.size(); ++i) u[i] += sign * seed * sd.Y[i];

    SolverConfig c = cfg;
    c.t_end = n;
    const double yy = g.inner(sd.Y, sd.Y);
    Vec prev = u;
    Vec v(u.size());
    auto obs = [&](Time t, const Vec& w) {
        for (std::size_t i = 0; i < w.size(); ++i) v[i] = w[i] - sd.Q[i];
        double a = g.inner(v, sd.Y) / yy;
        double vi = 0.0;
        for (std::size_t i = 0; i < w.size(); ++i) {
            v[i] -= a * sd.Y[i];
            vi = std::max(vi, std::abs(v[i]));
            double gap = sign > 0 ? sd.Q[i] - w[i] : std::max(w[i] - sd.Q[i], -w[i]);
            m.order_violation = std::max(m.order_violation, gap);
            m.monotone_violation = std::max(m.monotone_violation, -sign * (w[i] - prev[i]));
        }
        m.t.push_back(double(t));
        m.a.push_back(a);
        m.v_inf.push_back(vi);
        m.v_h1.push_back(std::sqrt(std::max(0.0, sd.lap->dirichlet_form(v))));
        prev = w;
    };
    RunRecord rec = evolve(RadialField{sd.grid, u, double(-n)}, c, obs);
    if (rec.verdict != Verdict::horizon)
        throw ConstructionError("minimal: " + to_string(rec.verdict) + " before t = 0 at t = " +
                                    std::to_string(double(rec.t.back())),
                                double(rec.t.back()));
    m.u_at_0 = RadialField{sd.grid, rec.final_u(), 0.0};
    try {
        ModulationState st = decompose(m.u_at_0, sd, 1.0, sign * epsilon);
        m.lambda0 = st.lambda;
        m.a0 = st.a;
        m.decomposed = true;
    } catch (const DecompositionFailure&) {
        m.decomposed = false;
    }
    return m;
}

ExpFit backward_slope(const MinimalApproximant& m, double ratio)
{
    std::vector<double> x, y;
    for (std::size_t k = 0; k < m.t.size(); ++k)
        if (m.a[k] != 0 && std::abs(m.a[k]) >= ratio * m.v_inf[k]) {
            x.push_back(m.t[k]);
            y.push_back(std::log(std::abs(m.a[k])));
        }
    if (x.size() < 3) throw InsufficientData("backward_slope: fewer than 3 samples in the exponential window");
    ExpFit f;
    f.slope = linear_fit(x, y).slope;
    f.samples = x.size();
    return f;
}

double remainder_constant(const MinimalApproximant& m, double e0)
{
    double c = 0.0;
    if (m.epsilon == 0) return 0.0;
    for (std::size_t k = 0; k < m.t.size(); ++k) {
        double s = m.epsilon * std::exp(e0 * m.t[k]);
        c = std::max(c, m.v_inf[k] / (s * s));
    }
    return c;
}

CauchyReport cauchy_in_n(int sign, double epsilon, const std::vector<int>& n_list, const SolverConfig& cfg,
                         const SpectralData& sd, int workers)
{
    if (n_list.size() < 3) throw ConfigError("cauchy_in_n: need at least 3 depths");
    for (std::size_t k = 1; k < n_list.size(); ++k)
        if (n_list[k] <= n_list[k - 1]) throw ConfigError("cauchy_in_n: depths must increase");
    CauchyReport rep;
    rep.n = n_list;
    rep.approx.resize(n_list.size());
    parallel_for(n_list.size(), workers,
                 [&](std::size_t k) { rep.approx[k] = construct(sign, n_list[k], epsilon, cfg, sd); });
    for (std::size_t k = 0; k + 1 < n_list.size(); ++k) {
        double d = 0.0;
        const Vec &a = rep.approx[k].u_at_0.u, &b = rep.approx[k + 1].u_at_0.u;
        for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
        rep.sup_diff.push_back(d);
    }
    for (std::size_t k = 1; k < rep.sup_diff.size(); ++k) {
        rep.ratio.push_back(rep.sup_diff[k - 1] > 0 ? rep.sup_diff[k] / rep.sup_diff[k - 1] : 0.0);
        if (rep.sup_diff[k] > rep.sup_diff[k - 1]) rep.decreasing = false;
    }
    rep.expected_ratio = std::exp(-sd.e0 * (n_list[1] - n_list[0]));
    return rep;
}

FateReport forward_fate(const MinimalApproximant& m, const SolverConfig& cfg)
{
    FateReport fr;
    if (m.epsilon == 0)
        fr.expected = Verdict::horizon;
    else
        fr.expected = m.sign > 0 ? Verdict::blowup : Verdict::dissipation;
    fr.record = evolve(m.u_at_0, cfg);
    fr.verdict = fr.record.verdict;
    fr.consistent = fr.verdict == fr.expected;
    const auto& h = fr.record.h1dot;
    fr.h1_ratio = h.front() > 0 ? h.back() / h.front() : 0.0;
    if (fr.verdict == Verdict::blowup && fr.record.has_T) {
        fr.T_est = fr.record.T_est;
        try {
            RateCheck rc = rate_check(fr.record, fr.T_est);
            fr.exponent_hat = rc.exponent_hat;
            fr.kappa_hat = rc.kappa_hat;
            fr.has_rate = true;
        } catch (const InsufficientData&) {
            fr.has_rate = false;
        }
    }
    return fr;
}

double convex_gap(double x, int d)
{
    const double p = double(d + 2) / (d - 2);
    double y = 1.0 + x;
    return std::pow(std::abs(y), p - 1.0) * y - 1.0 - p * x;
}

JensenReport jensen_lower_bound(const RunRecord& forward, const SpectralData& sd)
{
    const auto& g = *sd.grid;
    if (forward.grid.get() != sd.grid.get() && forward.grid->size() != g.size())
        throw ConfigError("jensen_lower_bound: record and spectral data use different grids");
    if (forward.snaps.size() < 2) throw InsufficientData("jensen_lower_bound: need at least 2 snapshots");
    const int d = g.d();
    Vec ym = sd.Y;
    const double mass = g.integrate(ym);
    for (double& y : ym) y /= mass;

    SolverConfig c = forward.cfg;
    Stepper st(sd.grid, c);
    JensenReport rep;
    Vec w(g.size());
    for (const auto& sn : forward.snaps) {
        for (std::size_t i = 0; i < w.size(); ++i) w[i] = sn.u[i] - sd.Q[i];
        double m = g.inner(w, ym);
        Vec f = st.rhs(sn.u);
        double md = g.inner(f, ym);
        rep.t.push_back(double(sn.t));
        rep.m.push_back(m);
        rep.mdot.push_back(md);
        double lower = sd.e0 * m + convex_gap(m, d);
        double tol = 1e-9 * std::max({1.0, std::abs(md), std::abs(lower)});
        ++rep.checked;
        rep.worst = std::max(rep.worst, lower - md);
        if (lower - md > tol) ++rep.violations;
    }
    rep.mdot0 = rep.mdot.front();
    for (std::size_t k = 1; k < rep.m.size(); ++k)
        if (!(rep.m[k] >= rep.m[k - 1]) || !(rep.mdot[k] >= rep.mdot[k - 1])) rep.convex_increasing = false;

    const double m0 = rep.m.front();
    rep.T_run = forward.verdict == Verdict::blowup ? double(forward.T_est) : double(forward.t.back());
    if (m0 > 0) {
        boost::math::quadrature::exp_sinh<double> es;
        rep.T_ode = es.integrate([&](double x) { return 1.0 / (sd.e0 * (m0 + x) + convex_gap(m0 + x, d)); });
    } else {
        rep.T_ode = std::numeric_limits<double>::infinity();
    }
    return rep;
}

void write_minimal_summary(std::ostream& os, const std::vector<MinimalApproximant>& approx,
                           const std::vector<double>& sup_diff, const std::vector<FateReport>& fates,
                           const std::string& header)
{
    os << header << "sign,n,epsilon,sup_diff,fate,exponent_hat,kappa_hat\n" << std::setprecision(12);
    for (std::size_t k = 0; k < approx.size(); ++k) {
        os << (approx[k].sign > 0 ? '+' : '-') << ',' << approx[k].n << ',' << approx[k].epsilon << ',';
        if (k < sup_diff.size()) os << sup_diff[k];
        os << ',';
        if (k < fates.size()) {
            os << to_string(fates[k].verdict) << ',';
            if (fates[k].has_rate) os << fates[k].exponent_hat << ',' << fates[k].kappa_hat;
            else os << ',';
        } else {
            os << ",,";
        }
        os << '\n';
    }
}

void write_minimal_trace(std::ostream& os, const MinimalApproximant& m, const std::string& header)
{
    os << header << "t,a,v_inf,v_h1\n" << std::setprecision(17);
    for (std::size_t k = 0; k < m.t.size(); ++k)
        os << m.t[k] << ',' << m.a[k] << ',' << m.v_inf[k] << ',' << m.v_h1[k] << '\n';
}

}  // namespace nlh
