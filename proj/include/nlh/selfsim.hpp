#pragma once

#include <array>
#include <iosfwd>
#include <memory>

#include "nlh/interp.hpp"
#include "nlh/solver.hpp"

namespace nlh {

struct FrameMismatch : Error {
    using Error::Error;
};

// uniform y-grid on [0, y_max]; rho() integrates f(|y|) rho(y) dy over R^d
class SelfSimGrid {
public:
    SelfSimGrid(int d, int n = 1200, double y_max = 12.0);

    int d() const { return d_; }
    std::size_t size() const { return y_.size(); }
    double y_max() const { return y_.back(); }
    double h() const { return h_; }
    const Vec& y() const { return y_; }
    const Vec& rho() const { return rho_; }
    double integrate(const Vec& f) const;
    // fourth-order central differences, even across y = 0
    Vec gradient(const Vec& w) const;

private:
    int d_;
    double h_;
    Vec y_, rho_;
};

using SelfSimGridPtr = std::shared_ptr<const SelfSimGrid>;

struct SelfSimFrame {
    SelfSimGridPtr grid;
    Time T = 0.0;
    Time t = 0.0;
    double s = 0.0;    // -log(T - t)
    Vec w;
    double err = 0.0;  // |E(w) - E(w from the single-step solution)|, 0 if unknown
};

// w(y) = (T - t)^{1/(p-1)} u(sqrt(T - t) y)
SelfSimFrame renormalize(const RadialField& u, Time t, Time T, SelfSimGridPtr grid);

double energy_w(const SelfSimFrame& f);
double mass_w(const SelfSimFrame& f);   // int w^2 rho
double I_w(const SelfSimFrame& f);
bool blowup_criterion(const SelfSimFrame& f, double tol = 1e-8);

// closed forms for w = c
double energy_const(double c, int d);
double I_const(double c, int d);

// frames from the snapshots of a run with t < T that fit in the radial domain
std::vector<SelfSimFrame> frames_from_run(const RunRecord& rec, Time T, SelfSimGridPtr grid);

struct LyapunovReport {
    bool monotone = true;
    std::size_t frames = 0;
    std::size_t violations = 0;
    double worst_excess = 0.0;         // max (E_{k+1} - E_k - tol_k)
    double median_rel_dissipation = 0.0;  // median |(-dE/ds) - int w_s^2 rho| / int w_s^2 rho
    double E_first = 0.0, E_last = 0.0;
    double l2_constant = 0.0;          // max int w^2 rho / E(w(0))^{2/(p+1)}, when 0 < E(w(0)) <= 1
    double spacetime_max = 0.0;        // max over s of int_s^{s+1} (int (|w'|^2 + w^2 + |w|^{p+1}) rho)^2 ds
};

// tol_k = factor * max(err_k, err_{k+1}) + abs_floor
LyapunovReport lyapunov_check(const std::vector<SelfSimFrame>& frames, double factor = 10.0,
                              double abs_floor = 1e-12);

struct RateCheck {
    double kappa_hat = 0.0;
    double exponent_hat = 0.0;
    std::size_t samples = 0;
};
// median of |u|_inf (T - t)^{1/(p-1)} over the last decade; exponent from a log-log fit
RateCheck rate_check(const std::vector<Time>& t, const Vec& linf, int d, Time T);
RateCheck rate_check(const RunRecord& rec, Time T);

// criterion at T = t + f * remaining for f in {0.9, 1, 1.1}
std::array<bool, 3> criterion_probe(const RadialField& u, Time t, double remaining, SelfSimGridPtr grid);

void write_frames_csv(std::ostream& os, const std::vector<SelfSimFrame>& frames, const std::string& header);

}  // namespace nlh
