#include <doctest.h>

#include <cmath>
#include <sstream>

#include "nlh/modulation.hpp"

using namespace nlh;

namespace {

const SpectralData& sd_ref()
{
    static const SpectralData sd = make_spectral(Parameters{});
    return sd;
}

Vec Q_mu(double mu)
{
    GroundState gs(7);
    return sd_ref().grid->sample([&](double r) { return std::pow(mu, -2.5) * gs.Q(r / mu); });
}

RadialField field(Vec u) { return RadialField{sd_ref().grid, std::move(u), 0.0}; }

}  // namespace

TEST_SUITE("modulation")
{
    TEST_CASE("interpolant reproduces nodes and rescales Q exactly")
    {
        const auto& sd = sd_ref();
        RadialInterpolant ip(*sd.grid, sd.Q);
        for (std::size_t i = 0; i < sd.grid->size(); i += 37) CHECK(ip(sd.grid->r(i)) == doctest::Approx(sd.Q[i]).epsilon(1e-14));
        // harmonic tail beyond r_max
        const double R = sd.grid->r_max();
        CHECK(ip(2 * R) == doctest::Approx(sd.Q.back() * std::pow(2.0, -5.0)).epsilon(1e-12));
        Vec q = rescale(RadialInterpolant(*sd.grid, Q_mu(1.7)), *sd.grid, 1.7);
        for (std::size_t i = 0; i < q.size(); i += 53) CHECK(q[i] == doctest::Approx(sd.Q[i]).epsilon(1e-6));
    }

    TEST_CASE("decompose recovers scale and unstable amplitude")
    {
        const auto& sd = sd_ref();
        ModulationState st = decompose(field(sd.Q), sd, 1.0, 0.0);
        CHECK(st.lambda == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(std::abs(st.a) < 1e-9);

        st = decompose(field(Q_mu(1.3)), sd, 1.0, 0.0);
        CHECK(st.lambda == doctest::Approx(1.3).epsilon(1e-8));
        CHECK(std::abs(st.a) < 1e-7);

        st = decompose(field(Q_mu(0.6)), sd, 0.8, 0.0);
        CHECK(st.lambda == doctest::Approx(0.6).epsilon(1e-8));

        Vec u = sd.Q;
        for (std::size_t i = 0; i < u.size(); ++i) u[i] += 0.01 * sd.Y[i];
        st = decompose(field(u), sd, 1.0, 0.0);
        CHECK(st.a == doctest::Approx(0.01).epsilon(1e-6));
        CHECK(st.lambda == doctest::Approx(1.0).epsilon(1e-8));
    }

    TEST_CASE("epsilon satisfies both orthogonality conditions")
    {
        const auto& sd = sd_ref();
        const auto& g = *sd.grid;
        Vec u = Q_mu(1.1);
        Vec r = random_field(g, 4, 1);
        double m = 0.0;
        for (double x : r) m = std::max(m, std::abs(x));
        for (std::size_t i = 0; i < u.size(); ++i) u[i] += 0.02 * sd.Y[i] + 0.01 * r[i] / m;
        ModulationState st = decompose(field(u), sd, 1.0, 0.0);
        CHECK(std::abs(g.inner(st.eps, sd.Y)) < 1e-8 * std::max(1.0, g.norm(st.eps)));
        CHECK(std::abs(g.inner(st.eps, sd.Psi0)) < 1e-8 * g.norm(sd.Psi0) * std::max(1.0, g.norm(st.eps)));
        // |a| + |eps| is comparable to the distance
        CHECK(std::abs(st.a) + st.eps_h1 > 0.2 * st.dist_M);
    }

    TEST_CASE("reconstruct inverts decompose")
    {
        const auto& sd = sd_ref();
        Vec u = Q_mu(0.9);
        for (std::size_t i = 0; i < u.size(); ++i) u[i] -= 0.015 * sd.Y[i];
        ModulationState st = decompose(field(u), sd, 1.0, 0.0);
        Vec rc = reconstruct(st, sd);
        double e = 0.0;
        for (std::size_t i = 0; i < u.size(); ++i)
            if (sd.grid->r(i) < 50.0) e = std::max(e, std::abs(rc[i] - u[i]));
        CHECK(e < 1e-6);
    }

    TEST_CASE("far data and bad guesses are reported")
    {
        const auto& sd = sd_ref();
        Vec g = sd.grid->sample([](double r) { return 3.0 * std::exp(-r * r); });
        CHECK_THROWS_AS(decompose(field(g), sd, 1.0, 0.0), DecompositionFailure);
        CHECK_THROWS_AS(decompose(field(sd.Q), sd, -1.0, 0.0), ConfigError);
        CHECK_THROWS_AS(decompose(field(Q_mu(3.0)), sd, 0.5, 0.0), DecompositionFailure);
    }

    TEST_CASE("tracker accumulates renormalized time and stops after the first failure")
    {
        const auto& sd = sd_ref();
        SolverConfig c;
        c.t_end = 30.0;
        Vec u0 = sd.Q;
        for (std::size_t i = 0; i < u0.size(); ++i) u0[i] += 0.05 * sd.Y[i];
        Tracker tk(sd, sd.grid);
        Time next = 0;
        RunRecord rec = evolve(field(u0), c, [&](Time t, const Vec& u) {
            if (t >= next && !tk.exited()) {
                tk.push(t, u);
                next = t + 0.25L;
            }
        });
        ModulationTrace tr = tk.finish();
        REQUIRE(tr.states.size() > 4);
        CHECK(tr.exited);
        CHECK(tr.exit_t > tr.states.back().t);
        CHECK(tr.states.front().s == 0.0);
        for (std::size_t k = 1; k < tr.states.size(); ++k) {
            const auto &a = tr.states[k - 1], &b = tr.states[k];
            CHECK(b.s > a.s);
            double lo = (b.t - a.t) / std::pow(std::max(a.lambda, b.lambda), 2);
            double hi = (b.t - a.t) / std::pow(std::min(a.lambda, b.lambda), 2);
            CHECK(b.s - a.s >= lo * (1 - 1e-12));
            CHECK(b.s - a.s <= hi * (1 + 1e-12));
        }
        CHECK(tr.a_s.size() == tr.states.size());
        CHECK(tr.states.front().a == doctest::Approx(0.05).epsilon(1e-6));
        // a grows at the instability rate while small
        CHECK(tr.a_s.front() / tr.states.front().a == doctest::Approx(sd.e0).epsilon(0.1));

        ModulationTrace tr2 = track(rec, sd);
        CHECK_FALSE(tr2.states.empty());

        std::ostringstream os;
        write_trace_csv(os, tr, "");
        CHECK(os.str().rfind("t,s,lambda,a,eps_h1,eps_h2,int_eH_e,dist_M\n", 0) == 0);
    }
}
