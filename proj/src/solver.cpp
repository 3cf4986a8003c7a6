#include "nlh/solver.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "nlh/ground_state.hpp"
#include "nlh/stats.hpp"

namespace nlh {

void SolverConfig::validate() const
{
    if (!(dt_min > 0 && dt_min < dt_init && dt_init < dt_max))
        throw ConfigError("solver: need 0 < dt_min < dt_init < dt_max");
    if (!(blowup_linf > 0 && dissip_linf > 0)) throw ConfigError("solver: thresholds must be positive");
    if (!(dissip_linf < blowup_linf)) throw ConfigError("solver: dissip_linf must lie below blowup_linf");
    if (!(c_dt > 0)) throw ConfigError("solver: c_dt must be positive");
    if (!(snap_dt > 0 && snap_growth > 1)) throw ConfigError("solver: need snap_dt > 0 and snap_growth > 1");
    if (max_steps < 1) throw ConfigError("solver: max_steps must be positive");
    if (!(safety > 0 && safety <= 1)) throw ConfigError("solver: safety factor must lie in (0, 1]");
    if (!(t_end > 0)) throw ConfigError("solver: t_end must be positive");
    if (!(rtol > 0 && atol > 0)) throw ConfigError("solver: tolerances must be positive");
    if (integrator != "ars222") throw ConfigError("solver: unknown integrator '" + integrator + "'");
}

std::string to_string(Verdict v)
{
    switch (v) {
    case Verdict::dissipation: return "Global-Dissipation";
    case Verdict::blowup: return "Blowup";
    case Verdict::horizon: return "Trapped-at-horizon";
    }
    return "?";
}

int verdict_flag(Verdict v)
{
    switch (v) {
    case Verdict::dissipation: return -1;
    case Verdict::blowup: return 1;
    case Verdict::horizon: return 0;
    }
    return 0;
}

EnergyFunctional::EnergyFunctional(GridPtr grid) : grid_(std::move(grid))
{
    using GK = boost::math::quadrature::gauss_kronrod<double, 61>;
    const int d = grid_->d();
    GroundState gs(d);
    const double R = grid_->r_max(), crit = 2.0 * d / (d - 2.0);
    // r = R/x on (0, 1]
    auto tail = [&](auto f) {
        return GK::integrate(
            [&](double x) {
                if (x <= 0) return 0.0;
                double r = R / x;
                return f(r) * std::pow(r, d - 1) * R / (x * x);
            },
            0.0, 1.0, 15, 1e-13);
    };
    tail_grad_ = tail([&](double r) { return gs.dQ(r) * gs.dQ(r); });
    tail_pot_ = tail([&](double r) { return std::pow(gs.Q(r), crit); });
    q_end_ = gs.Q(R);
}

double EnergyFunctional::grad_sq(const Vec& u) const
{
    Vec du = grid_->derivative(u);
    const Vec& w = grid_->quad();
    double s = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) s += w[i] * du[i] * du[i];
    double c = u.back() / q_end_;
    return s + tail_grad_ * c * c;
}

double EnergyFunctional::potential(const Vec& u) const
{
    const int d = grid_->d();
    const double crit = 2.0 * d / (d - 2.0);
    const Vec& w = grid_->quad();
    double s = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) s += w[i] * std::pow(std::abs(u[i]), crit);
    return s + tail_pot_ * std::pow(std::abs(u.back() / q_end_), crit);
}

double EnergyFunctional::operator()(const Vec& u) const
{
    for (double x : u)
        if (!std::isfinite(x)) throw NumericError("energy: non-finite field value");
    const int d = grid_->d();
    return 0.5 * grad_sq(u) - (d - 2.0) / (2.0 * d) * potential(u);
}

double energy(const RadialField& u) { return EnergyFunctional(u.grid)(u.u); }

Stepper::Stepper(GridPtr grid, const SolverConfig& cfg)
    : grid_(grid), cfg_(cfg), lap_(grid, cfg.bc, cfg.balanced), p_(GroundState(grid->d()).p())
{
    w_.assign(grid_->size(), 0.0);
    if (cfg_.nonlinear && cfg_.linearize_about_Q) {
        GroundState gs(grid_->d());
        for (std::size_t i = 0; i < w_.size(); ++i) w_[i] = -gs.V(grid_->r(i));
    }
}

void Stepper::explicit_part(const Vec& u, Vec& out) const
{
    out.resize(u.size());
    if (!cfg_.nonlinear) {
        std::fill(out.begin(), out.end(), 0.0);
        return;
    }
    for (std::size_t i = 0; i < u.size(); ++i) {
        double a = std::abs(u[i]);
        out[i] = std::pow(a, p_ - 1.0) * u[i] - w_[i] * u[i];
    }
}

Vec Stepper::rhs(const Vec& u) const
{
    Vec out = lap_.apply(u);
    if (cfg_.nonlinear)
        for (std::size_t i = 0; i < u.size(); ++i) out[i] += std::pow(std::abs(u[i]), p_ - 1.0) * u[i];
    return out;
}

// ARS(2,2,2): L-stable implicit part, stiffly accurate, second order
Vec Stepper::step(const Vec& u, double dt) const
{
    const double g = 1.0 - 1.0 / std::sqrt(2.0);
    const double dl = 1.0 - 1.0 / (2.0 * g);
    const Vec* w = (cfg_.nonlinear && cfg_.linearize_about_Q) ? &w_ : nullptr;
    Tridiag sys = lap_.system(g * dt, w);

    Vec n1, n2;
    explicit_part(u, n1);
    Vec u2(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) u2[i] = u[i] + g * dt * n1[i];
    lap_.pin(u2);
    sys.solve(u2);
    lap_.pin(u2);
    explicit_part(u2, n2);
    Vec u3(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) {
        // dt A U2 recovered from the stage equation
        double au2 = (u2[i] - u[i] - g * dt * n1[i]) / g;
        u3[i] = u[i] + dt * (dl * n1[i] + (1.0 - dl) * n2[i]) + (1.0 - g) * au2;
    }
    lap_.pin(u3);
    sys.solve(u3);
    lap_.pin(u3);
    for (double x : u3)
        if (!std::isfinite(x)) throw NumericError("step produced non-finite values");
    return u3;
}

Vec Stepper::attempt(const Vec& u, double dt, double& err, Vec* coarse) const
{
    Vec full = step(u, dt);
    Vec half = step(step(u, 0.5 * dt), 0.5 * dt);
    double e = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        double sc = cfg_.atol + cfg_.rtol * std::max(std::abs(u[i]), std::abs(half[i]));
        e = std::max(e, std::abs(half[i] - full[i]) / sc);
    }
    err = e;
    if (coarse) *coarse = std::move(full);
    return half;
}

namespace {

double linf_norm(const Vec& u)
{
    double m = 0.0;
    for (double x : u) m = std::max(m, std::abs(x));
    return m;
}

bool monotone_tail(const Vec& v, std::size_t k, bool increasing)
{
    if (v.size() < k + 1) return false;
    for (std::size_t i = v.size() - k; i < v.size(); ++i)
        if (increasing ? !(v[i] > v[i - 1]) : !(v[i] < v[i - 1])) return false;
    return true;
}

}  // namespace

RunRecord evolve(const RadialField& u0, const SolverConfig& cfg, const Observer& obs)
{
    cfg.validate();
    if (!u0.grid) throw ConfigError("evolve: field without grid");
    for (double x : u0.u)
        if (!std::isfinite(x)) throw NumericError("evolve: non-finite initial data");
    const auto& g = *u0.grid;
    const int d = g.d();
    const double p = GroundState(d).p();
    Stepper st(u0.grid, cfg);
    EnergyFunctional en(u0.grid);

    RunRecord rec;
    rec.d = d;
    rec.grid = u0.grid;
    rec.cfg = cfg;

    Vec u = u0.u;
    st.laplacian().pin(u);
    Time t = u0.t;
    const Time t_stop = u0.t + Time(cfg.t_end);
    double dt = cfg.dt_init;

    auto push = [&](double dts, double eerr) {
        rec.t.push_back(t);
        rec.dt.push_back(dts);
        rec.linf.push_back(linf_norm(u));
        double gq = en.grad_sq(u);
        rec.h1dot.push_back(std::sqrt(std::max(0.0, gq)));
        rec.energy.push_back(0.5 * gq - (d - 2.0) / (2.0 * d) * en.potential(u));
        rec.energy_err.push_back(eerr);
    };
    push(0.0, 0.0);
    rec.snaps.push_back({t, u, {}});
    if (obs) obs(t, u);
    Time last_snap_t = t;
    double last_snap_linf = rec.linf.back();

    bool pinned = false;
    Vec last_coarse;
    for (long n = 0; n < cfg.max_steps; ++n) {
        if (t >= t_stop) {
            rec.verdict = Verdict::horizon;
            break;
        }
        double m = rec.linf.back();
        double cap = cfg.nonlinear && m > 0 ? cfg.c_dt * std::pow(m, -(p - 1.0)) : cfg.dt_max;
        dt = std::min({dt, cfg.dt_max, cap});
        pinned = false;
        if (dt < cfg.dt_min) {
            dt = cfg.dt_min;
            pinned = true;
        }
        if (Time(dt) > t_stop - t) dt = double(t_stop - t);

        Vec un, coarse;
        double err = 0.0;
        bool ok = true;
        try {
            un = st.attempt(u, dt, err, &coarse);
        } catch (const NumericError&) {
            ok = false;
        }
        if (!ok || !(err <= 1.0)) {
            ++rec.rejected;
            if (pinned) {
                // cannot shrink further: accept and let the verdict logic decide
                if (!ok) {
                    rec.verdict = Verdict::blowup;
                    break;
                }
            } else {
                double fac = ok ? std::max(0.2, cfg.safety * std::pow(err, -1.0 / 3.0)) : 0.5;
                dt *= std::min(fac, 0.9);
                continue;
            }
        }
        double eerr = std::abs(en(un) - en(coarse));
        u = std::move(un);
        if (cfg.keep_coarse) last_coarse = coarse;
        t += dt;
        push(dt, eerr);
        if (obs) obs(t, u);

        double cur = rec.linf.back();
        bool snap = cfg.snap_every_step || t - last_snap_t >= Time(cfg.snap_dt) ||
                    cur >= last_snap_linf * cfg.snap_growth || cur <= last_snap_linf / cfg.snap_growth;
        if (snap) {
            rec.snaps.push_back({t, u, cfg.keep_coarse ? coarse : Vec{}});
            last_snap_t = t;
            last_snap_linf = cur;
        }

        if ((cur >= cfg.blowup_linf || pinned) && monotone_tail(rec.linf, 10, true)) {
            rec.verdict = Verdict::blowup;
            break;
        }
        if (cur <= cfg.dissip_linf && monotone_tail(rec.linf, 50, false)) {
            rec.verdict = Verdict::dissipation;
            break;
        }
        double fac = err > 0 ? cfg.safety * std::pow(err, -1.0 / 3.0) : 5.0;
        dt *= std::clamp(fac, 0.2, 5.0);
        if (n + 1 == cfg.max_steps) rec.verdict = Verdict::horizon;
    }
    if (rec.snaps.back().t != t) rec.snaps.push_back({t, u, last_coarse});
    if (rec.verdict == Verdict::blowup) {
        try {
            TEstimate te = estimate_T(rec);
            rec.T_est = te.T;
            rec.T_unc = te.uncertainty;
            rec.has_T = true;
        } catch (const InsufficientData&) {
            rec.has_T = false;
        }
    }
    return rec;
}

namespace {

Time fit_T(const std::vector<Time>& t, const Vec& linf, double p, double lo, double hi, std::size_t& count,
           double* slope = nullptr)
{
    // abscissa relative to the last sample keeps the fit well conditioned
    const Time t_ref = t.back();
    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < t.size(); ++i)
        if (linf[i] >= lo && linf[i] <= hi) {
            xs.push_back(double(t[i] - t_ref));
            ys.push_back(std::pow(linf[i], -(p - 1.0)));
        }
    count = xs.size();
    if (count < 20) throw InsufficientData("estimate_T: fewer than 20 samples in the fit window");
    LineFit f = linear_fit(xs, ys);
    if (!(f.slope < 0)) throw InsufficientData("estimate_T: |u|_inf not growing in the fit window");
    if (slope) *slope = f.slope;
    return t_ref - Time(f.intercept) / Time(f.slope);
}

}  // namespace

TEstimate estimate_T(const std::vector<Time>& t, const Vec& linf, int d)
{
    if (t.size() != linf.size() || t.empty()) throw InsufficientData("estimate_T: empty trace");
    const double p = double(d + 2) / (d - 2);
    const double top = *std::max_element(linf.begin(), linf.end());
    TEstimate te;
    double slope = 0.0;
    te.T = fit_T(t, linf, p, top / 10.0, top, te.samples, &slope);
    Time lo = te.T, hi = te.T;
    std::size_t dummy;
    const double wins[2][2] = {{top / std::sqrt(10.0), top}, {top / 30.0, top / 3.0}};
    for (auto& w : wins) {
        try {
            Time Tw = fit_T(t, linf, p, w[0], w[1], dummy);
            lo = std::min(lo, Tw);
            hi = std::max(hi, Tw);
        } catch (const InsufficientData&) {
        }
    }
    te.uncertainty = double(hi - lo);
    // y = kappa^{-(p-1)} (T - t)
    te.kappa_consistency = std::pow(-slope, -1.0 / (p - 1.0));
    return te;
}

TEstimate estimate_T(const RunRecord& rec)
{
    if (rec.verdict != Verdict::blowup) throw InsufficientData("estimate_T: run did not blow up");
    return estimate_T(rec.t, rec.linf, rec.d);
}

ComparisonResult comparison_check(const RadialField& low, const RadialField& high, const SolverConfig& cfg)
{
    cfg.validate();
    const int d = low.grid->d();
    const double p = GroundState(d).p();
    Stepper st(low.grid, cfg);
    ComparisonResult res;
    Vec a = low.u, b = high.u;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i] > b[i] || a[i] < 0) throw ConfigError("comparison_check: need 0 <= low <= high");
    Time t = 0;
    double dt = cfg.dt_init;
    const double eps = std::numeric_limits<double>::epsilon();
    while (t < Time(cfg.t_end)) {
        double m = std::max(linf_norm(a), linf_norm(b));
        if (m >= cfg.blowup_linf) break;
        double cap = cfg.nonlinear && m > 0 ? cfg.c_dt * std::pow(m, -(p - 1.0)) : cfg.dt_max;
        dt = std::min({dt, cfg.dt_max, cap, double(Time(cfg.t_end) - t)});
        if (dt < cfg.dt_min) break;
        double ea = 0, eb = 0;
        Vec na, nb;
        try {
            na = st.attempt(a, dt, ea);
            nb = st.attempt(b, dt, eb);
        } catch (const NumericError&) {
            dt *= 0.5;
            continue;
        }
        double err = std::max(ea, eb);
        if (!(err <= 1.0)) {
            dt *= std::max(0.2, cfg.safety * std::pow(err, -1.0 / 3.0));
            continue;
        }
        double tol = 10.0 * eps * std::max(linf_norm(na), linf_norm(nb));
        for (std::size_t i = 0; i < a.size(); ++i) {
            double gap = na[i] - nb[i];
            res.worst = std::max(res.worst, gap);
            if (gap > tol) res.ordered = false;
            if (na[i] - a[i] > tol) res.low_monotone_down = false;
            if (nb[i] - b[i] < -tol) res.high_monotone_up = false;
        }
        a = std::move(na);
        b = std::move(nb);
        t += dt;
        dt *= std::clamp(err > 0 ? cfg.safety * std::pow(err, -1.0 / 3.0) : 5.0, 0.2, 5.0);
    }
    res.t_reached = t;
    return res;
}

void write_run_csv(std::ostream& os, const RunRecord& rec, const std::string& header)
{
    os << header;
    os << "t,dt,linf,h1dot,energy,verdict_flag\n";
    os << std::setprecision(17);
    const int flag = verdict_flag(rec.verdict);
    for (std::size_t i = 0; i < rec.t.size(); ++i) {
        os << std::setprecision(21) << rec.t[i] << std::setprecision(17) << ',' << rec.dt[i] << ',' << rec.linf[i]
           << ',' << rec.h1dot[i] << ',' << rec.energy[i] << ',' << (i + 1 == rec.t.size() ? flag : 0) << '\n';
    }
}

void write_field(std::ostream& os, const RadialGrid& g, const Vec& u, double t)
{
    os << "# d=" << g.d() << '\n';
    os << "# p=" << std::setprecision(17) << double(g.d() + 2) / (g.d() - 2) << '\n';
    os << "# t=" << std::setprecision(21) << t << '\n';
    os << "r,u\n" << std::setprecision(17);
    for (std::size_t i = 0; i < g.size(); ++i) os << g.r(i) << ',' << u[i] << '\n';
}

}  // namespace nlh
