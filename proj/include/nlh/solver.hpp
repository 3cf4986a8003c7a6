#pragma once

#include <functional>
#include <iosfwd>
#include <memory>
#include <string>

#include "nlh/laplacian.hpp"

namespace nlh {

using Time = long double;

struct SolverConfig {
    double dt_init = 1e-3;
    double dt_min = 1e-16;
    double dt_max = 1.0;
    double blowup_linf = 1e6;
    double dissip_linf = 1e-4;
    double safety = 0.9;
    double t_end = 100.0;
    double rtol = 1e-7;
    double atol = 1e-10;
    double c_dt = 0.05;              // dt <= c_dt |u|_inf^{-(p-1)}
    std::string integrator = "ars222";
    Boundary bc = Boundary::robin;
    bool nonlinear = true;
    bool balanced = true;            // well-balanced conductances
    bool linearize_about_Q = true;   // implicit part carries p Q^{p-1}
    double snap_dt = 1.0;            // snapshot cadence in t
    double snap_growth = 1.25;       // extra snapshot when |u|_inf moved by this factor
    bool snap_every_step = false;
    bool keep_coarse = false;        // store the single-step solution with each snapshot
    long max_steps = 5000000;

    void validate() const;
};

enum class Verdict { dissipation, blowup, horizon };
std::string to_string(Verdict v);
int verdict_flag(Verdict v);

// E(u) = 1/2 int |u'|^2 - (d-2)/(2d) int |u|^{2d/(d-2)}, radial measure r^{d-1} dr.
// Fourth order quadrature on [0, r_max] plus the exterior part of a Q-shaped tail.
class EnergyFunctional {
public:
    explicit EnergyFunctional(GridPtr grid);
    double operator()(const Vec& u) const;
    double grad_sq(const Vec& u) const;   // int |u'|^2 r^{d-1} dr
    double potential(const Vec& u) const; // int |u|^{p+1} r^{d-1} dr

private:
    GridPtr grid_;
    double tail_grad_, tail_pot_, q_end_;
};

double energy(const RadialField& u);

struct Snapshot {
    Time t;
    Vec u;
    Vec u_coarse;   // single-step solution of the last accepted step (empty for the initial state)
};

struct RunRecord {
    int d = 7;
    GridPtr grid;
    SolverConfig cfg;
    std::vector<Time> t;
    Vec dt, linf, h1dot, energy, energy_err;
    std::vector<Snapshot> snaps;
    Verdict verdict = Verdict::horizon;
    std::size_t rejected = 0;
    Time T_est = 0.0;
    double T_unc = 0.0;
    bool has_T = false;

    const Vec& final_u() const { return snaps.back().u; }
};

// One IMEX step of size dt and its embedded error data.
class Stepper {
public:
    Stepper(GridPtr grid, const SolverConfig& cfg);

    const RadialLaplacian& laplacian() const { return lap_; }
    const SolverConfig& config() const { return cfg_; }
    // single step
    Vec step(const Vec& u, double dt) const;
    // full step vs two half steps; returns the two-half-step solution and the scaled error
    Vec attempt(const Vec& u, double dt, double& err, Vec* coarse = nullptr) const;
    // right-hand side L u + |u|^{p-1} u
    Vec rhs(const Vec& u) const;

private:
    GridPtr grid_;
    SolverConfig cfg_;
    RadialLaplacian lap_;
    Vec w_;   // implicit potential
    double p_;
    void explicit_part(const Vec& u, Vec& out) const;
};

using Observer = std::function<void(Time t, const Vec& u)>;

RunRecord evolve(const RadialField& u0, const SolverConfig& cfg, const Observer& obs = {});

// Linear fit of |u|_inf^{-(p-1)} against t over the last decade of growth.
struct TEstimate {
    Time T = 0.0;
    double uncertainty = 0.0;
    std::size_t samples = 0;
    double kappa_consistency = 0.0;   // slope-implied kappa
};
TEstimate estimate_T(const std::vector<Time>& t, const Vec& linf, int d);
TEstimate estimate_T(const RunRecord& rec);

struct ComparisonResult {
    bool ordered = true;
    double worst = 0.0;          // max(u_low - u_high) seen
    Time t_reached = 0.0;
    bool low_monotone_down = true;    // d_t u_low <= tol
    bool high_monotone_up = true;     // d_t u_high >= -tol
};
ComparisonResult comparison_check(const RadialField& low, const RadialField& high, const SolverConfig& cfg);

void write_run_csv(std::ostream& os, const RunRecord& rec, const std::string& header);
void write_field(std::ostream& os, const RadialGrid& g, const Vec& u, double t);

}  // namespace nlh
