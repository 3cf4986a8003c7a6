#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "nlh/experiments.hpp"

int main(int argc, char** argv)
{
    CLI::App app{"nlh: energy-critical heat flow near the ground state"};
    app.require_subcommand(1);

    struct Opts {
        std::string config;
        std::string out;
        std::uint64_t seed = 0;
        int workers = 0;
        bool override_neighborhood = false;
    } o;

    const char* kinds[] = {"spectrum", "evolve", "shoot", "minimal", "classify", "selfsim"};
    const char* help[] = {"spectral report for the linearized operator",
                          "evolve one initial datum and track its modulation",
                          "bisect the dissipation / blow-up threshold along a family",
                          "construct the minimal solutions and their forward fates",
                          "classify one initial datum into the trichotomy",
                          "self-similar diagnostics (sweep when selfsim.values is set)"};
    for (int k = 0; k < 6; ++k) {
        auto* sc = app.add_subcommand(kinds[k], help[k]);
        sc->add_option("--config", o.config, "JSON config file")->check(CLI::ExistingFile);
        sc->add_option("--out", o.out, "output directory");
        sc->add_option("--seed", o.seed, "random seed");
        sc->add_option("--workers", o.workers, "worker threads")->check(CLI::PositiveNumber);
        sc->add_flag("--override-neighborhood", o.override_neighborhood,
                     "allow data outside the neighborhood of Q (exploratory)");
    }
    CLI11_PARSE(app, argc, argv);

    const std::string kind = app.get_subcommands().front()->get_name();
    try {
        nlohmann::json j = o.config.empty() ? nlohmann::json::object() : nlh::load_config_file(o.config);
        if (!j.is_object()) throw nlh::ConfigError("config: top level must be an object");
        if (!j.contains("kind")) j["kind"] = kind;
        nlh::ExperimentConfig cfg = nlh::parse_config(j);
        nlh::RunOverrides ov;
        ov.kind = kind == "selfsim" && (cfg.kind == "selfsim-sweep" || !cfg.values.empty()) ? "selfsim-sweep" : kind;
        ov.out = o.out;
        ov.has_seed = app.get_subcommands().front()->count("--seed") > 0;
        ov.seed = o.seed;
        ov.workers = o.workers;
        ov.override_neighborhood = o.override_neighborhood;
        nlohmann::json manifest = nlh::run_config(cfg, ov);
        std::cout << manifest.dump(2) << '\n';
    } catch (const nlh::ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
