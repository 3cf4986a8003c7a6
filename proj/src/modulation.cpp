#include "nlh/modulation.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>

#include "nlh/stats.hpp"

namespace nlh {

namespace {

struct System {
    const SpectralData& sd;
    const RadialInterpolant& ip;
    double scale;

    Vec eps(double x, double a) const
    {
        Vec e = rescale(ip, *sd.grid, std::exp(x));
        for (std::size_t i = 0; i < e.size(); ++i) e[i] -= sd.Q[i] + a * sd.Y[i];
        return e;
    }
    void F(double x, double a, double out[2]) const
    {
        Vec e = eps(x, a);
        out[0] = sd.grid->inner(e, sd.Y) / scale;
        out[1] = sd.grid->inner(e, sd.Psi0) / scale;
    }
};

double local_l2(const SpectralData& sd, const Vec& v)
{
    const auto& g = *sd.grid;
    const double rc = 2.0 * sd.prm.cutoff_m;
    double s = 0.0;
    for (std::size_t i = 0; i < g.size() && g.r(i) <= rc; ++i) s += g.vol()[i] * v[i] * v[i];
    return std::sqrt(s);
}

double fnorm(const double f[2]) { return std::max(std::abs(f[0]), std::abs(f[1])); }

}  // namespace

ModulationState decompose(const RadialField& u, const SpectralData& sd, double lambda_guess, double a_guess,
                          const DecomposeOptions& opt)
{
    if (!(lambda_guess > 0)) throw ConfigError("decompose: scale guess must be positive");
    for (double v : u.u)
        if (!std::isfinite(v)) throw NumericError("decompose: non-finite field");
    RadialInterpolant ip(*u.grid, u.u);
    const auto& lap = *sd.lap;

    Vec u0 = rescale(ip, *sd.grid, lambda_guess);
    Vec diff(u0.size());
    for (std::size_t i = 0; i < u0.size(); ++i) diff[i] = u0[i] - sd.Q[i];
    const double qh1 = std::sqrt(hdot_sq(lap, sd.Q, 1));
    const double close = std::sqrt(std::max(0.0, hdot_sq(lap, diff, 1))) / qh1;
    if (!(close < opt.closeness))
        throw DecompositionFailure("decompose: state too far from the soliton family (relative Dot H^1 distance " +
                                   std::to_string(close) + ")");

    System sys{sd, ip, std::max(local_l2(sd, u0), 1e-300)};
    double x = std::log(lambda_guess), a = a_guess;
    const double x_lo = x - std::log(4.0), x_hi = x + std::log(4.0);
    double f[2];
    sys.F(x, a, f);
    int it = 0;
    for (; it < opt.max_iter && fnorm(f) > opt.tol; ++it) {
        const double hx = 1e-6, ha = 1e-6;
        double fx[2], fa[2];
        sys.F(x + hx, a, fx);
        sys.F(x, a + ha, fa);
        double j00 = (fx[0] - f[0]) / hx, j01 = (fa[0] - f[0]) / ha;
        double j10 = (fx[1] - f[1]) / hx, j11 = (fa[1] - f[1]) / ha;
        double det = j00 * j11 - j01 * j10;
        if (!(std::abs(det) > 0)) throw DecompositionFailure("decompose: singular Jacobian");
        double dx = -(j11 * f[0] - j01 * f[1]) / det;
        double da = -(-j10 * f[0] + j00 * f[1]) / det;
        double step = 1.0, fn[2];
        const double f0 = fnorm(f);
        for (int k = 0; k < 30; ++k) {
            sys.F(x + step * dx, a + step * da, fn);
            if (fnorm(fn) < f0 || k == 29) break;
            step *= 0.5;
        }
        x += step * dx;
        a += step * da;
        if (x < x_lo || x > x_hi)
            throw TrustRegionViolation("decompose: scale left [guess/4, 4 guess] (lambda = " +
                                       std::to_string(std::exp(x)) + ")");
        f[0] = fn[0];
        f[1] = fn[1];
    }
    if (fnorm(f) > opt.tol)
        throw DecompositionFailure("decompose: Newton did not converge in " + std::to_string(opt.max_iter) +
                                   " iterations");

    ModulationState st;
    st.t = u.t;
    st.lambda = std::exp(x);
    st.a = a;
    st.eps = sys.eps(x, a);
    st.residual = fnorm(f);
    st.iterations = it;
    st.eps_h1 = std::sqrt(std::max(0.0, hdot_sq(lap, st.eps, 1)));
    st.eps_h2 = std::sqrt(std::max(0.0, hdot_sq(lap, st.eps, 2)));
    st.dist_M = std::abs(a) + st.eps_h1;
    st.eHe = sd.h0->form(st.eps);
    Vec he = sd.h0->apply(st.eps);
    he.back() = 0.0;
    st.He2 = sd.grid->inner(he, he);
    return st;
}

Vec reconstruct(const ModulationState& st, const SpectralData& sd)
{
    const auto& g = *sd.grid;
    Vec prof(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) prof[i] = sd.Q[i] + st.a * sd.Y[i] + st.eps[i];
    RadialInterpolant ip(g, prof);
    return rescale(ip, g, 1.0 / st.lambda);
}

Tracker::Tracker(const SpectralData& sd, GridPtr field_grid, const DecomposeOptions& opt, bool wait_for_entry)
    : sd_(sd), grid_(std::move(field_grid)), opt_(opt), wait_(wait_for_entry), en_(grid_)
{
}

bool Tracker::push(Time t, const Vec& u)
{
    if (tr_.exited) return false;
    RadialField f{grid_, u, double(t)};
    if (tr_.states.empty()) {
        lam_ = u[0] > 0 ? std::pow(u[0], -2.0 / (grid_->d() - 2)) : 1.0;
        a_ = 0.0;
    }
    ModulationState st;
    try {
        st = decompose(f, sd_, lam_, a_, opt_);
    } catch (const DecompositionFailure& e) {
        if (wait_ && tr_.states.empty()) return true;
        tr_.exited = true;
        tr_.exit_t = double(t);
        tr_.exit_reason = e.what();
        return false;
    }
    st.energy = en_(u);
    if (tr_.states.empty()) {
        st.s = 0.0;
    } else {
        const auto& pv = tr_.states.back();
        st.s = pv.s + (st.t - pv.t) * 0.5 * (1.0 / (pv.lambda * pv.lambda) + 1.0 / (st.lambda * st.lambda));
    }
    lam_ = st.lambda;
    a_ = st.a;
    tr_.states.push_back(std::move(st));
    return true;
}

ModulationTrace Tracker::finish()
{
    ModulationTrace tr = std::move(tr_);
    tr_ = ModulationTrace{};
    const std::size_t n = tr.states.size();
    tr.a_s.assign(n, 0.0);
    tr.lambda_s.assign(n, 0.0);
    if (n >= 2) {
        for (std::size_t k = 0; k < n; ++k) {
            std::size_t lo = k == 0 ? 0 : k - 1, hi = k + 1 == n ? k : k + 1;
            const auto &A = tr.states[lo], &B = tr.states[hi];
            double ds = B.s - A.s;
            if (ds <= 0) continue;
            tr.a_s[k] = (B.a - A.a) / ds;
            tr.lambda_s[k] = (B.lambda - A.lambda) / ds / tr.states[k].lambda;
        }
    }
    return tr;
}

ModulationTrace track(const RunRecord& rec, const SpectralData& sd, const DecomposeOptions& opt,
                      bool wait_for_entry)
{
    if (rec.snaps.empty()) return {};
    Tracker tk(sd, rec.grid, opt, wait_for_entry);
    for (const auto& sn : rec.snaps)
        if (!tk.push(sn.t, sn.u)) break;
    return tk.finish();
}

EnergyReport energy_diagnostics(const ModulationTrace& tr, const SpectralData& sd)
{
    EnergyReport rep;
    if (tr.states.empty()) throw InsufficientData("energy_diagnostics: empty trace");
    const double EQ = EnergyFunctional(sd.grid)(sd.Q);
    const auto& S = tr.states;
    for (std::size_t k = 0; k < S.size(); ++k) {
        rep.eta2 = std::max(rep.eta2, S[k].dist_M * S[k].dist_M);
        double den = S[k].a * S[k].a + S[k].eps_h1 * S[k].eps_h1;
        if (den > 0) rep.energy_C = std::max(rep.energy_C, std::abs(S[k].energy - EQ) / den);
        if (k == 0) continue;
        double f0 = S[k - 1].a * S[k - 1].a + S[k - 1].eps_h2 * S[k - 1].eps_h2;
        double f1 = S[k].a * S[k].a + S[k].eps_h2 * S[k].eps_h2;
        double ds = S[k].s - S[k - 1].s;
        rep.cumulative += 0.5 * ds * (f0 + f1);
        double inc = 0.5 * (S[k].eHe - S[k - 1].eHe);
        double a4 = std::pow(S[k].a, 4);
        if (inc > 0 && a4 > 0 && ds > 0) rep.lyapunov_C = std::max(rep.lyapunov_C, inc / (a4 * ds));
        if (a4 < 1e-3 * S[k].He2) {
            ++rep.lyapunov_checked;
            double tol = 1e-10 * std::max(1.0, std::abs(S[k].eHe));
            if (inc > tol) ++rep.lyapunov_violations;
        }
    }
    rep.ratio = rep.eta2 > 0 ? rep.cumulative / rep.eta2 : 0.0;
    return rep;
}

namespace {

bool dominated(const ModulationState& st, double K, double a_max)
{
    double a = std::abs(st.a);
    return a > 0 && a <= a_max && a >= K * (st.a * st.a + st.eps_h2 * st.eps_h2);
}

}  // namespace

SlopeFit instability_slope(const ModulationTrace& tr, double K, double a_max)
{
    const auto& S = tr.states;
    // longest run of consecutive instability-dominated states
    std::size_t best0 = 0, best1 = 0, i = 0;
    while (i < S.size()) {
        if (!dominated(S[i], K, a_max)) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j < S.size() && dominated(S[j], K, a_max)) ++j;
        if (j - i > best1 - best0) {
            best0 = i;
            best1 = j;
        }
        i = j;
    }
    if (best1 - best0 < 3) throw InsufficientData("instability_slope: window has fewer than 3 states");
    std::vector<double> s, la;
    for (std::size_t k = best0; k < best1; ++k) {
        s.push_back(S[k].s);
        la.push_back(std::log(std::abs(S[k].a)));
    }
    LineFit f = linear_fit(s, la);
    SlopeFit out;
    out.slope = f.slope;
    out.r2 = f.r2;
    out.samples = s.size();
    out.s0 = s.front();
    out.s1 = s.back();
    return out;
}

LawConstants law_constants(const ModulationTrace& tr, double e0, double K)
{
    LawConstants lc;
    const auto& S = tr.states;
    for (std::size_t k = 0; k < S.size(); ++k) {
        if (!dominated(S[k], K, 1e300)) continue;
        double q2 = S[k].a * S[k].a + S[k].eps_h2 * S[k].eps_h2;
        double q1 = S[k].a * S[k].a + S[k].eps_h2;
        lc.modulation_C = std::max(lc.modulation_C, std::abs(tr.a_s[k] - e0 * S[k].a) / q2);
        lc.scale_C = std::max(lc.scale_C, std::abs(tr.lambda_s[k]) / q1);
        ++lc.samples;
    }
    return lc;
}

void write_trace_csv(std::ostream& os, const ModulationTrace& tr, const std::string& header)
{
    os << header << "t,s,lambda,a,eps_h1,eps_h2,int_eH_e,dist_M\n" << std::setprecision(17);
    for (const auto& st : tr.states)
        os << st.t << ',' << st.s << ',' << st.lambda << ',' << st.a << ',' << st.eps_h1 << ',' << st.eps_h2 << ','
           << st.eHe << ',' << st.dist_M << '\n';
}

}  // namespace nlh
