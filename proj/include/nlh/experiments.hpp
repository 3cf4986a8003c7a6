#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <string>

#include <json.hpp>

#include "nlh/minimal.hpp"
#include "nlh/modulation.hpp"
#include "nlh/selfsim.hpp"

namespace nlh {

struct BracketError : Error {
    using Error::Error;
};

// initial data families
//   Q              Q_mu
//   Q_plus_Y       Q_mu + c Y
//   Q_plus_gauss   Q_mu + c exp(-r^2/sigma^2)
//   gauss          c exp(-r^2/sigma^2)
//   Q_plus_random  Q_mu + c phi/|phi|_inf, phi = random_field(seed, index)
struct InitialData {
    std::string family = "Q_plus_Y";
    double c = 0.0;
    double mu = 1.0;
    double sigma = 1.0;
    std::uint64_t index = 0;
};

Vec make_initial(const InitialData& id, const SpectralData& sd, std::uint64_t seed);
void validate(const InitialData& id);

enum class Class { soliton, dissipation, type1_blowup, undecided };
std::string to_string(Class c);

struct ClassifyConfig {
    double neighborhood = 0.3;   // |u0 - Q|_{H1} < neighborhood |Q|_{H1}
    bool override_neighborhood = false;
    double K = 10.0;
    double delta = 0.01;
    double alpha = 0.1;
    double K_tilde = 2.0;
    double a_floor = 1e-6;       // |a| below this is decomposition/round-off noise
    double h2_floor = 1e-8;      // eps_h2 below this counts as zero
    double exponent_tol = 0.1;   // relative, on 1/(p-1)
    double snap_dt = 0.25;
    bool selfsim = true;
};

constexpr double never = std::numeric_limits<double>::infinity();

struct Classification {
    Class cls = Class::undecided;
    Verdict solver = Verdict::horizon;
    bool exploratory = false;
    double neighborhood_distance = 0.0;
    double T_ins = never, T_trans = never, T_exit = never;
    double trapped_time = 0.0;
    bool has_rate = false;
    double exponent_hat = 0.0, kappa_hat = 0.0;
    Time T_est = 0.0;
    double T_unc = 0.0;
    double lambda_min = 1.0, lambda_max = 1.0, lambda_end = 1.0, a_max = 0.0;
    double eps_h2_first = 0.0, eps_h2_last = 0.0;
    std::size_t frames = 0;
    bool I_positive = false;
    bool lyapunov_monotone = true;
    double h1_initial = 0.0, h1_final = 0.0, h1_max = 0.0;
    bool h1_growing = false;   // Dot H^1 norm increasing over the last 10 steps
    RunRecord record;
    ModulationTrace trace;

    nlohmann::json evidence() const;
};

double neighborhood_distance(const Vec& u0, const SpectralData& sd);

Classification classify(const Vec& u0, const SpectralData& sd, const SolverConfig& scfg, const ClassifyConfig& ccfg);

struct BisectionLevel {
    int level = 0;
    double c_low = 0.0, c_high = 0.0, c_mid = 0.0;
    Class mid_class = Class::undecided;
    double trapped_low = 0.0, trapped_high = 0.0, trapped_mid = 0.0;
    double trapped_bracket = 0.0;   // mean of the endpoint trapped times after the update
};

struct BisectionResult {
    double c_star = 0.0;
    double width = 0.0;
    bool landed_on_threshold = false;   // a midpoint classified as neither side
    std::vector<BisectionLevel> levels;
    bool trapped_monotone_last5 = false;
};

BisectionResult bisect_threshold(const std::function<Vec(double)>& family, double c_low, double c_high,
                                 const SpectralData& sd, const SolverConfig& scfg, const ClassifyConfig& ccfg,
                                 double rel_width = 1e-6, int max_levels = 60);

// configuration tree (JSON), with defaults filled in
struct ExperimentConfig {
    std::string kind = "spectrum";
    Parameters prm;
    Boundary bc = Boundary::robin;
    SolverConfig solver;
    InitialData initial;
    ClassifyConfig classify;
    std::uint64_t seed = 1;
    int workers = 1;
    std::string out = "out";

    // spectrum
    std::size_t samples = 1000;
    // shoot
    InitialData family;
    double c_low = -0.1, c_high = 0.1, rel_width = 1e-6;
    int max_levels = 60;
    // minimal
    std::vector<int> signs{1, -1};
    double epsilon = 0.01;
    std::vector<int> n_list{3, 5, 7, 9};
    int n_forward = 7;
    std::vector<double> epsilon_sweep{0.005, 0.01, 0.02};
    SolverConfig forward;
    // selfsim
    int y_points = 1200;
    double y_max = 12.0;
    std::vector<double> values;
    bool write_snapshots = false;
};

ExperimentConfig parse_config(const nlohmann::json& j);
nlohmann::json to_json(const ExperimentConfig& c);
nlohmann::json load_config_file(const std::string& path);

std::uint64_t fnv1a64(const std::string& s);
std::string config_hash(const ExperimentConfig& c);

struct RunOverrides {
    std::string kind;
    std::string out;
    bool has_seed = false;
    std::uint64_t seed = 0;
    int workers = 0;
    bool override_neighborhood = false;
};

// runs one experiment, writes its outputs and manifest.json; returns the manifest
nlohmann::json run_config(ExperimentConfig cfg, const RunOverrides& ov = {});

}  // namespace nlh
