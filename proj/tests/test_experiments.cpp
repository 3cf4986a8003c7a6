#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "nlh/experiments.hpp"

using namespace nlh;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const SpectralData& sd_ref()
{
    static const SpectralData sd = make_spectral(Parameters{});
    return sd;
}

fs::path scratch(const std::string& name)
{
    fs::path p = fs::temp_directory_path() / ("nlh_test_" + name);
    fs::remove_all(p);
    return p;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string config_error(const json& j)
{
    try {
        parse_config(j);
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "";
}

}  // namespace

TEST_SUITE("experiments")
{
    TEST_CASE("defaults parse and round-trip through JSON")
    {
        ExperimentConfig c = parse_config(json::object());
        CHECK(c.kind == "spectrum");
        CHECK(c.prm.d == 7);
        CHECK(c.classify.K == 10.0);
        CHECK(c.classify.neighborhood == 0.3);
        ExperimentConfig c2 = parse_config(to_json(c));
        CHECK(to_json(c2) == to_json(c));
        CHECK(config_hash(c2) == config_hash(c));
    }

    TEST_CASE("unknown fields and wrong types name the offending field")
    {
        CHECK(config_error({{"solver", {{"tend", 3}}}}).find("solver.tend") != std::string::npos);
        CHECK(config_error({{"bogus", 1}}).find("bogus") != std::string::npos);
        CHECK(config_error({{"grid", {{"cells", "many"}}}}).find("grid.cells") != std::string::npos);
        CHECK(config_error({{"kind", "dance"}}).find("dance") != std::string::npos);
        CHECK(config_error({{"params", {{"d", 5}}}}).find("dimension") != std::string::npos);
        CHECK(config_error({{"params", {{"d", 5}, {"low_dimension", true}}}}).empty());
        CHECK(config_error({{"initial", {{"family", "sech"}}}}).find("sech") != std::string::npos);
        CHECK(config_error({{"minimal", {{"signs", {1, 2}}}}}).find("signs") != std::string::npos);
        CHECK(config_error({{"shoot", {{"c_low", 1.0}, {"c_high", 0.0}}}}).find("c_low") != std::string::npos);
    }

    TEST_CASE("parse errors carry line and column")
    {
        fs::path d = scratch("parse");
        fs::create_directories(d);
        std::ofstream(d / "bad.json") << "{\n  \"kind\": \"evolve\",\n  \"solver\": {\"t_end\": 3,}\n}\n";
        try {
            load_config_file((d / "bad.json").string());
            FAIL("no exception");
        } catch (const ConfigError& e) {
            std::string w = e.what();
            CHECK(w.find("line 3") != std::string::npos);
            CHECK(w.find("column") != std::string::npos);
        }
        CHECK_THROWS_AS(load_config_file((d / "missing.json").string()), ConfigError);
    }

    TEST_CASE("FNV-1a reference values and hash sensitivity")
    {
        CHECK(fnv1a64("") == 0xcbf29ce484222325ull);
        CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cull);
        CHECK(fnv1a64("foobar") == 0x85944171f73967e8ull);
        ExperimentConfig a = parse_config(json::object());
        ExperimentConfig b = a;
        b.out = "elsewhere";
        b.workers = 4;
        CHECK(config_hash(a) == config_hash(b));
        b.seed = 99;
        CHECK(config_hash(a) != config_hash(b));
        CHECK(config_hash(a).size() == 16);
    }

    TEST_CASE("initial data families")
    {
        const auto& sd = sd_ref();
        InitialData id;
        id.family = "Q";
        CHECK(make_initial(id, sd, 1) == sd.Q);
        id.family = "Q_plus_Y";
        id.c = 0.02;
        Vec u = make_initial(id, sd, 1);
        for (std::size_t i = 0; i < u.size(); i += 101) CHECK(u[i] == doctest::Approx(sd.Q[i] + 0.02 * sd.Y[i]));
        id.family = "gauss";
        id.c = 2.0;
        id.sigma = 3.0;
        u = make_initial(id, sd, 1);
        CHECK(u[0] == doctest::Approx(2.0));
        id.family = "Q_plus_random";
        id.c = 0.01;
        Vec r1 = make_initial(id, sd, 5), r2 = make_initial(id, sd, 5), r3 = make_initial(id, sd, 6);
        CHECK(r1 == r2);
        CHECK(r1 != r3);
        double m = 0.0;
        for (std::size_t i = 0; i < r1.size(); ++i) m = std::max(m, std::abs(r1[i] - sd.Q[i]));
        CHECK(m == doctest::Approx(0.01));
        id.mu = -1.0;
        CHECK_THROWS_AS(make_initial(id, sd, 1), ConfigError);
    }

    TEST_CASE("neighborhood distance and the override")
    {
        const auto& sd = sd_ref();
        CHECK(neighborhood_distance(sd.Q, sd) == 0.0);
        Vec far = sd.grid->sample([](double r) { return 0.1 * std::exp(-r * r); });
        CHECK(neighborhood_distance(far, sd) > 0.3);
        SolverConfig s;
        s.t_end = 5.0;
        ClassifyConfig cc;
        CHECK_THROWS_AS(classify(far, sd, s, cc), ConfigError);
        cc.override_neighborhood = true;
        Classification cl = classify(far, sd, s, cc);
        CHECK(cl.exploratory);
    }

    TEST_CASE("classification of the three model data")
    {
        const auto& sd = sd_ref();
        ClassifyConfig cc;
        SolverConfig s;
        s.t_end = 40.0;
        Classification q = classify(sd.Q, sd, s, cc);
        CHECK(q.cls == Class::soliton);
        CHECK(q.T_ins == never);
        CHECK(std::abs(q.lambda_end - 1.0) < 1e-3);

        InitialData id;
        id.c = 0.05;
        Classification up = classify(make_initial(id, sd, 1), sd, s, cc);
        CHECK(up.cls == Class::type1_blowup);
        CHECK(up.h1_growing);
        CHECK(up.T_exit < double(up.T_est));
        CHECK(up.I_positive);

        // mid-transient horizon is reported as undecided
        id.c = -0.05;
        Classification mid = classify(make_initial(id, sd, 1), sd, s, cc);
        CHECK(mid.cls == Class::undecided);
        CHECK(mid.solver == Verdict::horizon);
        s.t_end = 1500.0;
        Classification down = classify(make_initial(id, sd, 1), sd, s, cc);
        CHECK(down.cls == Class::dissipation);
        CHECK_FALSE(down.I_positive);

        json ev = down.evidence();
        CHECK(ev["class"] == "Dissipation");
        CHECK(ev.contains("T_ins"));
        CHECK(ev.contains("T_trans"));
        CHECK(ev.contains("T_exit"));
    }

    TEST_CASE("bisection rejects a bracket with equal verdicts")
    {
        const auto& sd = sd_ref();
        SolverConfig s;
        s.t_end = 200.0;
        auto fam = [&](double c) {
            InitialData id;
            id.c = c;
            return make_initial(id, sd, 1);
        };
        CHECK_THROWS_AS(bisect_threshold(fam, 0.03, 0.05, sd, s, ClassifyConfig{}), BracketError);
        CHECK_THROWS_AS(bisect_threshold(fam, 0.05, 0.03, sd, s, ClassifyConfig{}), ConfigError);
    }

    TEST_CASE("run_config writes a manifest and reruns are bit-identical")
    {
        fs::path d = scratch("run");
        json j = {{"kind", "spectrum"}, {"spectrum", {{"samples", 100}}}, {"out", d.string()}};
        ExperimentConfig c = parse_config(j);
        json m1 = run_config(c);
        CHECK(fs::exists(d / "manifest.json"));
        CHECK(m1["config_hash"] == config_hash(c));
        for (const auto& f : m1["files"]) CHECK(fs::exists(d / f.get<std::string>()));
        json rep = json::parse(slurp(d / "spectrum.json"));
        CHECK(rep["e0"].get<double>() > 0);
        CHECK(rep["negative_eigenvalues"] == 1);
        std::string prof = slurp(d / "profiles.csv");
        CHECK(prof.rfind("# d=7\n# p=1.8\n", 0) == 0);
        CHECK(prof.find("# config_hash=" + config_hash(c)) != std::string::npos);
        json m2 = run_config(c);
        CHECK(m1["file_hashes"] == m2["file_hashes"]);
    }

    TEST_CASE("classify config for Q writes a Soliton verdict")
    {
        fs::path d = scratch("classify_q");
        json j = {{"kind", "classify"},
                  {"initial", {{"family", "Q"}}},
                  {"solver", {{"t_end", 40}}},
                  {"classify", {{"selfsim", false}}},
                  {"out", d.string()}};
        run_config(parse_config(j));
        json v = json::parse(slurp(d / "verdict.json"));
        CHECK(v["class"] == "Soliton");
    }

    TEST_CASE("command line front end")
    {
        fs::path d = scratch("cli");
        fs::create_directories(d);
        std::ofstream(d / "cfg.json") << R"({"kind": "spectrum", "spectrum": {"samples": 100}})";
        std::string cmd = std::string(NLH_CLI_PATH) + " spectrum --config " + (d / "cfg.json").string() + " --out " +
                          (d / "out").string() + " --seed 3 > " + (d / "log").string() + " 2>&1";
        CHECK(std::system(cmd.c_str()) == 0);
        json m = json::parse(slurp(d / "out" / "manifest.json"));
        CHECK(m["seed"] == 3);
        std::ofstream(d / "bad.json") << R"({"solver": {"tend": 1}})";
        cmd = std::string(NLH_CLI_PATH) + " evolve --config " + (d / "bad.json").string() + " --out " +
              (d / "out2").string() + " > " + (d / "log2").string() + " 2>&1";
        int rc = std::system(cmd.c_str());
        CHECK(WEXITSTATUS(rc) == 2);
        CHECK(slurp(d / "log2").find("solver.tend") != std::string::npos);
    }

    TEST_CASE("shipped configs parse")
    {
        std::size_t n = 0;
        for (const auto& e : fs::directory_iterator(NLH_CONFIG_DIR)) {
            if (e.path().extension() != ".json") continue;
            CAPTURE(e.path().string());
            CHECK_NOTHROW(parse_config(load_config_file(e.path().string())));
            ++n;
        }
        CHECK(n >= 6);
    }

    TEST_CASE("class names")
    {
        CHECK(to_string(Class::soliton) == "Soliton");
        CHECK(to_string(Class::dissipation) == "Dissipation");
        CHECK(to_string(Class::type1_blowup) == "TypeI-Blowup");
        CHECK(to_string(Class::undecided) == "Undecided");
    }
}
