#include <doctest.h>

#include <cmath>

#include "nlh/minimal.hpp"

using namespace nlh;

namespace {

const SpectralData& sd_ref()
{
    static const SpectralData sd = make_spectral(Parameters{});
    return sd;
}

}  // namespace

TEST_SUITE("minimal")
{
    TEST_CASE("convex gap is nonnegative, convex and vanishes to second order")
    {
        CHECK(convex_gap(0.0, 7) == 0.0);
        const double p = 1.8;
        for (double x : {1e-4, -1e-4}) CHECK(convex_gap(x, 7) == doctest::Approx(0.5 * p * (p - 1) * x * x).epsilon(1e-3));
        for (double x = -0.9; x < 3.0; x += 0.1) {
            CHECK(convex_gap(x, 7) >= 0.0);
            double h = 1e-3;
            CHECK(convex_gap(x + h, 7) + convex_gap(x - h, 7) - 2 * convex_gap(x, 7) >= -1e-14);
        }
    }

    TEST_CASE("construct validates its arguments")
    {
        const auto& sd = sd_ref();
        SolverConfig c;
        CHECK_THROWS_AS(construct(0, 3, 0.01, c, sd), ConfigError);
        CHECK_THROWS_AS(construct(1, 0, 0.01, c, sd), ConfigError);
        CHECK_THROWS_AS(construct(1, 3, 0.5, c, sd), ConfigError);
        CHECK_THROWS_AS(construct(1, 200, 0.01, c, sd), ConfigError);
    }

    TEST_CASE("approximants are ordered around Q and monotone in time")
    {
        const auto& sd = sd_ref();
        SolverConfig c;
        for (int sign : {1, -1}) {
            MinimalApproximant m = construct(sign, 3, 0.01, c, sd);
            CHECK(m.order_violation < 1e-10);
            CHECK(m.monotone_violation < 1e-10);
            CHECK(m.decomposed);
            CHECK(m.a0 == doctest::Approx(sign * 0.01).epsilon(0.05));
            CHECK(m.lambda0 == doctest::Approx(1.0).epsilon(1e-3));
            ExpFit f = backward_slope(m);
            CHECK(f.slope == doctest::Approx(sd.e0).epsilon(0.05));
            CHECK(remainder_constant(m, sd.e0) < 1.0);
        }
    }

    TEST_CASE("epsilon = 0 gives Q back")
    {
        const auto& sd = sd_ref();
        SolverConfig c;
        MinimalApproximant m = construct(1, 2, 0.0, c, sd);
        double e = 0.0;
        for (std::size_t i = 0; i < sd.Q.size(); ++i) e = std::max(e, std::abs(m.u_at_0.u[i] - sd.Q[i]));
        CHECK(e < 1e-9);
        CHECK(remainder_constant(m, sd.e0) == 0.0);
    }

    TEST_CASE("Cauchy report needs increasing depths")
    {
        const auto& sd = sd_ref();
        SolverConfig c;
        CHECK_THROWS_AS(cauchy_in_n(1, 0.01, {3, 5}, c, sd), ConfigError);
        CHECK_THROWS_AS(cauchy_in_n(1, 0.01, {3, 5, 4}, c, sd), ConfigError);
    }
}
