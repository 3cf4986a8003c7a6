#pragma once

#include <iosfwd>

#include "nlh/interp.hpp"
#include "nlh/solver.hpp"
#include "nlh/spectral.hpp"

namespace nlh {

struct DecompositionFailure : Error {
    using Error::Error;
};

struct TrustRegionViolation : DecompositionFailure {
    using DecompositionFailure::DecompositionFailure;
};

struct ModulationState {
    double t = 0.0;
    double s = 0.0;
    double lambda = 1.0;
    double a = 0.0;
    Vec eps;
    double eps_h1 = 0.0, eps_h2 = 0.0;
    double dist_M = 0.0;
    double eHe = 0.0;     // int eps H eps
    double He2 = 0.0;     // int (H eps)^2
    double energy = 0.0;  // E(u)
    double residual = 0.0;
    int iterations = 0;
};

struct DecomposeOptions {
    double tol = 1e-10;
    int max_iter = 50;
    double closeness = 0.5;
};

ModulationState decompose(const RadialField& u, const SpectralData& sd, double lambda_guess, double a_guess,
                          const DecomposeOptions& opt = {});

// u rebuilt from (lambda, a, eps) on the grid of sd
Vec reconstruct(const ModulationState& st, const SpectralData& sd);

struct ModulationTrace {
    std::vector<ModulationState> states;
    Vec a_s, lambda_s;     // finite differences in s; lambda_s holds lambda_s / lambda
    bool exited = false;   // a decomposition failed
    double exit_t = 0.0;
    std::string exit_reason;
};

// incremental form of track: push states in time order, stops accepting after the first failure
class Tracker {
public:
    Tracker(const SpectralData& sd, GridPtr field_grid, const DecomposeOptions& opt = {}, bool wait_for_entry = false);
    // returns false once the trace has exited
    bool push(Time t, const Vec& u);
    bool exited() const { return tr_.exited; }
    const ModulationTrace& trace() const { return tr_; }
    ModulationTrace finish();

private:
    const SpectralData& sd_;
    GridPtr grid_;
    DecomposeOptions opt_;
    bool wait_;
    EnergyFunctional en_;
    double lam_ = 1.0, a_ = 0.0;
    ModulationTrace tr_;
};

// the first decomposition is seeded with lambda = u(0)^{-2/(d-2)}; with wait_for_entry, leading
// snapshots that fail to decompose are skipped instead of ending the trace
ModulationTrace track(const RunRecord& rec, const SpectralData& sd, const DecomposeOptions& opt = {},
                      bool wait_for_entry = false);

struct EnergyReport {
    double cumulative = 0.0;     // int (a^2 + |eps|_{H2}^2) ds
    double eta2 = 0.0;           // sup dist_M^2
    double ratio = 0.0;          // cumulative / eta2
    double lyapunov_C = 0.0;     // max (increment of 1/2 eHe) / a^4 over steps with a positive increment
    std::size_t lyapunov_checked = 0;
    std::size_t lyapunov_violations = 0;  // increments > tol while a^4 < 1e-3 int (H eps)^2
    double energy_C = 0.0;       // max |E(u) - E(Q)| / (a^2 + |eps|_{H1}^2)
};

EnergyReport energy_diagnostics(const ModulationTrace& tr, const SpectralData& sd);

struct SlopeFit {
    double slope = 0.0;
    double r2 = 0.0;
    std::size_t samples = 0;
    double s0 = 0.0, s1 = 0.0;
};

// d log|a| / ds over states with K (a^2 + |eps|_{H2}^2) <= |a| <= a_max
SlopeFit instability_slope(const ModulationTrace& tr, double K = 10.0, double a_max = 1.0);

// empirical constants in |a_s - e0 a| <= C (a^2 + |eps|_{H2}^2) and |lambda_s / lambda| <= C (a^2 + |eps|_{H2})
struct LawConstants {
    double modulation_C = 0.0;
    double scale_C = 0.0;
    std::size_t samples = 0;
};
LawConstants law_constants(const ModulationTrace& tr, double e0, double K = 10.0);

void write_trace_csv(std::ostream& os, const ModulationTrace& tr, const std::string& header);

}  // namespace nlh
