#pragma once

#include <memory>
#include <vector>

#include "nlh/params.hpp"

namespace nlh {

using Vec = std::vector<double>;

// Geometric grid r_i = h0 (q^i - 1)/(q - 1), i = 0..n, r_n = r_max.
// Node i owns the dual cell [f_i, f_{i+1}] with f_0 = 0, f_{n+1} = r_max and
// midpoint faces in between; vol_i = (f_{i+1}^d - f_i^d)/d is exact for r^{d-1}.
class RadialGrid {
public:
    RadialGrid(int d, int n, double r_max, double first_cell);
    explicit RadialGrid(const Parameters& prm) : RadialGrid(prm.d, prm.n, prm.r_max, prm.first_cell) {}

    int d() const { return d_; }
    int cells() const { return n_; }
    std::size_t size() const { return r_.size(); }
    double r_max() const { return r_.back(); }
    double ratio() const { return q_; }

    const Vec& r() const { return r_; }
    const Vec& face() const { return f_; }    // size n + 2
    const Vec& vol() const { return vol_; }   // quadrature weights for int f r^{d-1} dr
    // product Simpson weights for int f r^{d-1} dr (fourth order)
    const Vec& quad() const { return quad_; }
    double r(std::size_t i) const { return r_[i]; }
    double h(std::size_t i) const { return r_[i + 1] - r_[i]; }

    double integrate(const Vec& f) const;
    double inner(const Vec& f, const Vec& g) const;
    double norm(const Vec& f) const;
    // dual-cell weights for int f r^{k} dr, k > -1
    Vec power_weights(double k) const;
    // fourth order du/dr at the nodes, u extended evenly across r = 0
    Vec derivative(const Vec& u) const;

    template <class F>
    Vec sample(F&& fn) const
    {
        Vec out(r_.size());
        for (std::size_t i = 0; i < r_.size(); ++i) out[i] = fn(r_[i]);
        return out;
    }

private:
    int d_, n_;
    double q_;
    Vec r_, f_, vol_, quad_;
    struct Stencil {
        int idx[5];
        double w[5];
    };
    std::vector<Stencil> dst_;
    void build_quadrature();
    void build_stencils();
};

using GridPtr = std::shared_ptr<const RadialGrid>;

struct RadialField {
    GridPtr grid;
    Vec u;
    double t = 0.0;
};

// a^k - b^k for a >= b >= 0 without cancellation
double pow_diff(double a, double b, int k);

}  // namespace nlh
