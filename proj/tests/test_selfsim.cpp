#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "nlh/selfsim.hpp"
#include "nlh/spectral.hpp"

using namespace nlh;

namespace {

SelfSimGridPtr ygrid() { return std::make_shared<SelfSimGrid>(7); }

SelfSimFrame constant_frame(double c, SelfSimGridPtr g)
{
    SelfSimFrame f;
    f.grid = g;
    f.T = 1.0;
    f.w.assign(g->size(), c);
    return f;
}

}  // namespace

TEST_SUITE("selfsim")
{
    TEST_CASE("Gaussian weight is a probability measure")
    {
        auto g = ygrid();
        CHECK(g->integrate(Vec(g->size(), 1.0)) == doctest::Approx(1.0).epsilon(1e-11));
        // second moment of the Gaussian with variance 2 per coordinate
        Vec y2(g->size());
        for (std::size_t i = 0; i < y2.size(); ++i) y2[i] = g->y()[i] * g->y()[i];
        CHECK(g->integrate(y2) == doctest::Approx(2.0 * 7).epsilon(1e-9));
    }

    TEST_CASE("gradient is exact on quartics")
    {
        auto g = ygrid();
        Vec w(g->size());
        for (std::size_t i = 0; i < w.size(); ++i) {
            double y = g->y()[i];
            w[i] = 1.0 + y * y - 0.01 * y * y * y * y;
        }
        Vec dw = g->gradient(w);
        for (std::size_t i = 0; i < w.size(); ++i) {
            double y = g->y()[i];
            CHECK(dw[i] == doctest::Approx(2 * y - 0.04 * y * y * y).epsilon(1e-8).scale(1.0));
        }
    }

    TEST_CASE("constant profiles match the closed forms")
    {
        auto g = ygrid();
        const double k = kappa_const(7);
        SelfSimFrame f = constant_frame(k, g);
        CHECK(energy_w(f) == doctest::Approx(energy_const(k, 7)).epsilon(1e-11));
        CHECK(energy_const(k, 7) == doctest::Approx(k * k / (2 * 2.8)).epsilon(1e-14));
        CHECK(std::abs(I_w(f)) < 1e-10);
        CHECK_FALSE(blowup_criterion(f));

        f = constant_frame(1.5 * k, g);
        CHECK(I_w(f) == doctest::Approx(I_const(1.5 * k, 7)).epsilon(1e-8));
        CHECK(I_const(1.5 * k, 7) > 0);
        CHECK(blowup_criterion(f));

        f = constant_frame(0.5 * k, g);
        CHECK(I_w(f) < 0);
        CHECK(mass_w(f) == doctest::Approx(0.25 * k * k).epsilon(1e-11));
    }

    TEST_CASE("renormalizing the ODE solution gives kappa")
    {
        auto rg = std::make_shared<RadialGrid>(7, 400, 50.0, 1e-2);
        const double T = 1.25, t = 1.0, k = kappa_const(7);
        Vec u(rg->size(), k * std::pow(T - t, -1.25));
        SelfSimFrame f = renormalize(RadialField{rg, u, t}, t, T, ygrid());
        for (double w : f.w) CHECK(w == doctest::Approx(k).epsilon(1e-12));
        CHECK(f.s == doctest::Approx(-std::log(T - t)));
        CHECK_THROWS_AS(renormalize(RadialField{rg, u, t}, t, t, ygrid()), DomainError);
        // y_max sqrt(T - t) beyond r_max
        CHECK_THROWS_AS(renormalize(RadialField{rg, u, 0.0}, 0.0, 100.0, ygrid()), DomainError);
    }

    TEST_CASE("rate_check reads kappa and the exponent off an exact profile")
    {
        const double T = 2.0, k = kappa_const(7);
        std::vector<Time> t;
        Vec m;
        for (int i = 0; i < 200; ++i) {
            Time ti = Time(T) - std::pow(0.95L, Time(i));
            t.push_back(ti);
            m.push_back(k * std::pow(double(Time(T) - ti), -1.25));
        }
        RateCheck rc = rate_check(t, m, 7, T);
        CHECK(rc.kappa_hat == doctest::Approx(k).epsilon(1e-9));
        CHECK(rc.exponent_hat == doctest::Approx(1.25).epsilon(1e-9));
        CHECK_THROWS_AS(rate_check(std::vector<Time>(t.begin(), t.begin() + 3), Vec(m.begin(), m.begin() + 3), 7, T),
                        InsufficientData);
    }

    TEST_CASE("Lyapunov check rejects mixed frames and flags increases")
    {
        auto g = ygrid();
        std::vector<SelfSimFrame> fr;
        for (int k = 0; k < 4; ++k) {
            SelfSimFrame f = constant_frame(0.5 + 0.05 * k, g);
            f.s = k;
            fr.push_back(f);
        }
        // E(c) increases on c < kappa
        LyapunovReport lr = lyapunov_check(fr);
        CHECK_FALSE(lr.monotone);
        CHECK(lr.violations == 3);
        std::reverse(fr.begin(), fr.end());
        for (int k = 0; k < 4; ++k) fr[k].s = k;
        CHECK(lyapunov_check(fr).monotone);
        fr[2].T = 2.0;
        CHECK_THROWS_AS(lyapunov_check(fr), FrameMismatch);
        fr.resize(2);
        CHECK_THROWS_AS(lyapunov_check(fr), FrameMismatch);
    }

    TEST_CASE("grid arguments are validated")
    {
        CHECK_THROWS_AS(SelfSimGrid(7, 7, 12.0), ConfigError);
        CHECK_THROWS_AS(SelfSimGrid(7, 100, -1.0), ConfigError);
        CHECK_THROWS_AS(SelfSimGrid(2, 100, 12.0), ConfigError);
    }
}
