#pragma once

#include <iosfwd>

#include "nlh/solver.hpp"
#include "nlh/spectral.hpp"

namespace nlh {

struct ConstructionError : Error {
    ConstructionError(const std::string& what, double t) : Error(what), t_fail(t) {}
    double t_fail;
};

struct MinimalApproximant {
    int sign = 1;
    int n = 7;
    double epsilon = 0.01;
    RadialField u_at_0;
    // fixed-scale traces over [-n, 0], one entry per accepted step
    Vec t, a, v_inf, v_h1;
    double order_violation = 0.0;   // max of (Q - u) for sign +, max of (u - Q, -u) for sign -
    double monotone_violation = 0.0;  // max of -sign * (u(t_k) - u(t_{k-1}))
    double lambda0 = 0.0, a0 = 0.0;   // modulation cross-check at t = 0
    bool decomposed = false;
};

// u(-n) = Q + sign eps e^{-n e0} Y evolved to t = 0
MinimalApproximant construct(int sign, int n, double epsilon, const SolverConfig& cfg, const SpectralData& sd);

// slope of log|a| against t where |a| >= ratio |v|_inf
struct ExpFit {
    double slope = 0.0;
    std::size_t samples = 0;
};
ExpFit backward_slope(const MinimalApproximant& m, double ratio = 100.0);

// max |v|_inf / (eps e^{e0 t})^2 over the trace
double remainder_constant(const MinimalApproximant& m, double e0);

struct CauchyReport {
    std::vector<int> n;
    Vec sup_diff;          // |u_0(n_{k+1}) - u_0(n_k)|_inf
    Vec ratio;             // successive sup_diff ratios
    double expected_ratio = 0.0;  // e^{-e0 dn} for the first gap
    bool decreasing = true;
    std::vector<MinimalApproximant> approx;
};
CauchyReport cauchy_in_n(int sign, double epsilon, const std::vector<int>& n_list, const SolverConfig& cfg,
                         const SpectralData& sd, int workers = 1);

struct FateReport {
    Verdict verdict = Verdict::horizon;
    Verdict expected = Verdict::horizon;
    bool consistent = false;
    bool has_rate = false;
    double exponent_hat = 0.0, kappa_hat = 0.0;
    Time T_est = 0.0;
    double h1_ratio = 0.0;   // final / initial |grad u|
    RunRecord record;
};
FateReport forward_fate(const MinimalApproximant& m, const SolverConfig& cfg);

// g(x) = (1 + x)^p - 1 - p x
double convex_gap(double x, int d);

struct JensenReport {
    std::size_t checked = 0;
    std::size_t violations = 0;
    double worst = 0.0;           // max of (e0 m + g(m)) - dm/dt
    double mdot0 = 0.0;
    bool convex_increasing = true;
    double T_ode = 0.0;           // blow-up time of m' = e0 m + g(m) from m(0)
    double T_run = 0.0;
    Vec t, m, mdot;
};
// requires a forward record of a + approximant with snapshots
JensenReport jensen_lower_bound(const RunRecord& forward, const SpectralData& sd);

void write_minimal_summary(std::ostream& os, const std::vector<MinimalApproximant>& approx,
                           const std::vector<double>& sup_diff, const std::vector<FateReport>& fates,
                           const std::string& header);
void write_minimal_trace(std::ostream& os, const MinimalApproximant& m, const std::string& header);

}  // namespace nlh
