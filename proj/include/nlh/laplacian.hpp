#pragma once

#include <string>

#include "nlh/grid.hpp"

namespace nlh {

enum class Boundary { robin, neumann, dirichlet };

Boundary parse_boundary(const std::string& s);
std::string to_string(Boundary b);

// Tridiagonal system, Thomas algorithm.
struct Tridiag {
    Vec lo, di, up;
    void solve(Vec& rhs) const;
};

// Flux-form radial Laplacian, self-adjoint for the dual-cell inner product:
//   vol_i (L u)_i = C_{i+1/2} (u_{i+1} - u_i) - C_{i-1/2} (u_i - u_{i-1}).
// With balanced = true the face conductances are rescaled so that the sampled
// ground state satisfies L Q + Q^p = 0 exactly; the rescaling is 1 + O(h^2).
// Robin closure at r_max: r^{d-1} u' = r_max^{d-1} g u_n, g matched to Q'/Q.
class RadialLaplacian {
public:
    RadialLaplacian(GridPtr grid, Boundary bc, bool balanced = true);

    const RadialGrid& grid() const { return *grid_; }
    GridPtr grid_ptr() const { return grid_; }
    Boundary boundary() const { return bc_; }
    const Vec& cond() const { return cond_; }
    double robin() const { return g_; }

    void apply(const Vec& u, Vec& out) const;
    Vec apply(const Vec& u) const
    {
        Vec out;
        apply(u, out);
        return out;
    }
    // sum C (du)^2 + boundary term, the discrete int |u'|^2 r^{d-1} dr
    double dirichlet_form(const Vec& u) const;
    // I - a (L + diag(w))
    Tridiag system(double a, const Vec* w) const;
    void pin(Vec& u) const
    {
        if (bc_ == Boundary::dirichlet) u.back() = 0.0;
    }

private:
    GridPtr grid_;
    Boundary bc_;
    Vec cond_;
    double g_ = 0.0;
};

}  // namespace nlh
