#include <doctest.h>

#include <cmath>

#include "nlh/ground_state.hpp"
#include "nlh/laplacian.hpp"

using namespace nlh;

TEST_SUITE("laplacian")
{
    TEST_CASE("self-adjoint in the dual-cell inner product")
    {
        auto g = std::make_shared<RadialGrid>(7, 400, 60.0, 1e-2);
        Vec a = g->sample([](double r) { return std::exp(-0.1 * r * r); });
        Vec b = g->sample([](double r) { return 1.0 / std::pow(1.0 + r * r, 2.5); });
        for (Boundary bc : {Boundary::robin, Boundary::neumann}) {
            for (bool bal : {true, false}) {
                RadialLaplacian L(g, bc, bal);
                double ab = g->inner(L.apply(a), b), ba = g->inner(a, L.apply(b));
                CHECK(ab == doctest::Approx(ba).epsilon(1e-11));
                // -<u, L u> equals the Dirichlet form
                CHECK(-g->inner(a, L.apply(a)) == doctest::Approx(L.dirichlet_form(a)).epsilon(1e-11));
            }
        }
    }

    TEST_CASE("balanced conductances make L Q + Q^p vanish")
    {
        auto g = std::make_shared<RadialGrid>(7, 4000, 100.0, 1e-3);
        GroundState gs(7);
        RadialLaplacian L(g, Boundary::robin, true);
        Vec q = gs.Q(*g);
        Vec lq = L.apply(q);
        double worst = 0.0;
        for (std::size_t i = 0; i < q.size(); ++i)
            worst = std::max(worst, std::abs(lq[i] + std::pow(q[i], gs.p())));
        CHECK(worst < 1e-8);
    }

    TEST_CASE("balanced conductances are a small perturbation of the plain ones")
    {
        auto g = std::make_shared<RadialGrid>(7, 2000, 100.0, 2e-3);
        RadialLaplacian a(g, Boundary::robin, true), b(g, Boundary::robin, false);
        for (std::size_t i = 0; i < a.cond().size(); i += 97) CHECK(a.cond()[i] / b.cond()[i] == doctest::Approx(1.0).epsilon(1e-3));
    }

    TEST_CASE("plain Laplacian is second order on a smooth profile")
    {
        double prev = 0.0;
        for (int n : {200, 400, 800}) {
            auto g = std::make_shared<RadialGrid>(7, n, 12.0, 0.03 * 200 / n);
            RadialLaplacian L(g, Boundary::neumann, false);
            Vec u = g->sample([](double r) { return std::exp(-r * r); });
            Vec lu = L.apply(u);
            double e = 0.0;
            for (std::size_t i = 0; i < g->size(); ++i) {
                double r = g->r(i);
                if (r > 8.0) break;
                double ex = (4.0 * r * r - 2.0 * 7) * std::exp(-r * r);
                e = std::max(e, std::abs(lu[i] - ex));
            }
            if (prev > 0) CHECK(prev / e > 3.0);
            prev = e;
        }
    }

    TEST_CASE("Thomas solver inverts I - a L")
    {
        auto g = std::make_shared<RadialGrid>(7, 300, 30.0, 1e-2);
        RadialLaplacian L(g, Boundary::robin, true);
        Vec w(g->size(), -0.5);
        Vec x = g->sample([](double r) { return std::cos(r) * std::exp(-0.05 * r * r); });
        const double a = 0.3;
        Vec lx = L.apply(x);
        Vec b(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) b[i] = x[i] - a * (lx[i] + w[i] * x[i]);
        L.system(a, &w).solve(b);
        for (std::size_t i = 0; i < x.size(); ++i) CHECK(b[i] == doctest::Approx(x[i]).epsilon(1e-10));
    }

    TEST_CASE("boundary names round-trip")
    {
        for (Boundary b : {Boundary::robin, Boundary::neumann, Boundary::dirichlet})
            CHECK(parse_boundary(to_string(b)) == b);
        CHECK_THROWS_AS(parse_boundary("periodic"), ConfigError);
    }
}
