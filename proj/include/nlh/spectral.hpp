#pragma once

#include <cstdint>
#include <memory>

#include <json.hpp>

#include "nlh/ground_state.hpp"
#include "nlh/laplacian.hpp"

namespace nlh {

// H^(n) = -L + n(d+n-2)/r^2 + V on the dual-cell grid.
// n = 0: the origin cell has no inner face (even extension); n >= 1: u_0 = 0.
class RadialOperator {
public:
    RadialOperator(const RadialLaplacian& lap, int n);

    int index() const { return n_; }
    const RadialLaplacian& laplacian() const { return lap_; }
    const RadialGrid& grid() const { return lap_.grid(); }
    const Vec& potential() const { return pot_; }
    std::size_t first() const { return first_; }

    void apply(const Vec& u, Vec& out) const;
    Vec apply(const Vec& u) const
    {
        Vec out;
        apply(u, out);
        return out;
    }
    // <u, H u>
    double form(const Vec& u) const;
    // symmetrized tridiagonal on nodes first..n-1 (Dirichlet at r_max)
    void symmetric(Vec& diag, Vec& off) const;

private:
    RadialLaplacian lap_;
    int n_;
    std::size_t first_;
    Vec pot_;
};

RadialOperator assemble_H(const RadialLaplacian& lap, int n);

// ||H u|| / ||u|| over the interior nodes (the closure row at r_max is excluded)
double kernel_residual(const RadialOperator& h, const Vec& u);

// number of eigenvalues of the symmetric tridiagonal below x
std::size_t sturm_count(const Vec& diag, const Vec& off, double x);

struct Eigenpair {
    double e0 = 0.0;         // -e0 is the lowest eigenvalue
    Vec Y;                   // unit discrete L^2, Y(0) > 0
    double int_Y = 0.0;      // |S^{d-1}| int Y r^{d-1} dr; Y / int_Y has unit mass
    std::size_t negative = 0;
};

Eigenpair ground_eig(const RadialOperator& h0);

struct ShootOptions {
    double r_start = 1e-3;
    double r_end = 60.0;
    double tol = 1e-12;
};
// e0 from the ODE Y'' + (d-1)/r Y' = (V + e0) Y by bisection on the far-field sign
double shoot_e0(int d, const ShootOptions& opt = {});

Vec build_Psi0(const RadialGrid& g, const Vec& Y, double m);

// eigenvalues in [-zero_mode_tol, 0) are treated as the discrete image of the zero mode
constexpr double zero_mode_tol = 1e-6;

struct SpectralData {
    Parameters prm;
    GridPtr grid;
    std::shared_ptr<const RadialLaplacian> lap;
    std::shared_ptr<const RadialOperator> h0;
    double e0 = 0.0;
    Vec Y;
    double int_Y = 0.0;
    std::size_t negative = 0;   // Sturm count of eigenvalues below 0 (strict)
    Vec Psi0;
    Vec Q, LQ;
};

SpectralData make_spectral(const Parameters& prm, Boundary bc = Boundary::robin);

struct ZeroModePair {
    int n = 0;
    Vec T;                // regular zero mode, T ~ r^n at 0
    Vec dlogT;            // T'/T
    Vec Gamma;            // singular zero mode, Gamma ~ r^{-(d+n-2)} at infinity; NaN at r = 0
    double origin_exponent = 0.0;
    double infinity_exponent = 0.0;
};

ZeroModePair zero_modes(int n, const RadialGrid& g);

// cosine similarity in the grid inner product, nodes with r in (0, r_cut]
double cosine(const RadialGrid& g, const Vec& a, const Vec& b, double r_cut = 1e300);

// int |A^(n) v|^2 r^{d-1} dr with A = -d_r + (log T)', evaluated on cell faces
double factorized_form(const RadialGrid& g, const ZeroModePair& z, const Vec& v);

// Dot H^s norms: s = 1 gradient form, s = 2 ||L v||, s = 3 ||d_r L v||
double hdot_sq(const RadialLaplacian& lap, const Vec& v, int s);

double hardy_check(const RadialLaplacian& lap, const Vec& v, int s);

// sum_j c_j exp(-r^2/sigma_j^2) r^{k_j}, k in 0..6, sigma in [1, 10]
Vec random_field(const RadialGrid& g, std::uint64_t seed, std::uint64_t index, int terms = 4);

struct CoercivityResult {
    double c1 = 0.0, c2 = 0.0, c3 = 0.0;   // minimum quotients at the Dot H^1, H^2, H^3 levels
    std::size_t samples = 0;
    double hardy_max[3] = {0.0, 0.0, 0.0};
};

struct CoercivityViolation : Error {
    CoercivityViolation(const std::string& what, Vec w, int which_)
        : Error(what), witness(std::move(w)), which(which_)
    {
    }
    Vec witness;
    int which;
};

// v minus its components along Y and Psi0
Vec project_out(const SpectralData& sd, Vec v);
// the three quotients for one field
void coercivity_quotients(const SpectralData& sd, const Vec& v, double q[3]);

CoercivityResult coercivity_estimate(const SpectralData& sd, std::size_t samples, std::uint64_t seed,
                                     int workers = 1);

nlohmann::json spectral_report(const SpectralData& sd, const CoercivityResult* co);

}  // namespace nlh
