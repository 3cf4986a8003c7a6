#include "nlh/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "nlh/parallel.hpp"

namespace nlh {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------- initial data

void validate(const InitialData& id)
{
    static const std::set<std::string> fams{"Q", "Q_plus_Y", "Q_plus_gauss", "gauss", "Q_plus_random"};
    if (!fams.count(id.family)) throw ConfigError("initial data: unknown family '" + id.family + "'");
    if (!(id.mu > 0)) throw ConfigError("initial data: mu must be positive");
    if (!(id.sigma > 0)) throw ConfigError("initial data: sigma must be positive");
    if (!std::isfinite(id.c)) throw ConfigError("initial data: c must be finite");
}

Vec make_initial(const InitialData& id, const SpectralData& sd, std::uint64_t seed)
{
    validate(id);
    const auto& g = *sd.grid;
    GroundState gs(g.d());
    Vec u(g.size(), 0.0);
    if (id.family != "gauss") {
        const double f = std::pow(id.mu, -0.5 * (g.d() - 2));
        for (std::size_t i = 0; i < u.size(); ++i) u[i] = f * gs.Q(g.r(i) / id.mu);
    }
    if (id.family == "Q_plus_Y") {
        for (std::size_t i = 0; i < u.size(); ++i) u[i] += id.c * sd.Y[i];
    } else if (id.family == "Q_plus_gauss" || id.family == "gauss") {
        for (std::size_t i = 0; i < u.size(); ++i) {
            double r = g.r(i) / id.sigma;
            u[i] += id.c * std::exp(-r * r);
        }
    } else if (id.family == "Q_plus_random") {
        Vec phi = random_field(g, seed, id.index);
        double m = 0.0;
        for (double x : phi) m = std::max(m, std::abs(x));
        if (m > 0)
            for (std::size_t i = 0; i < u.size(); ++i) u[i] += id.c * phi[i] / m;
    }
    return u;
}

// ---------------------------------------------------------------- classification

std::string to_string(Class c)
{
    switch (c) {
    case Class::soliton: return "Soliton";
    case Class::dissipation: return "Dissipation";
    case Class::type1_blowup: return "TypeI-Blowup";
    case Class::undecided: return "Undecided";
    }
    return "?";
}

double neighborhood_distance(const Vec& u0, const SpectralData& sd)
{
    Vec d(u0.size());
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = u0[i] - sd.Q[i];
    return std::sqrt(std::max(0.0, sd.lap->dirichlet_form(d))) / std::sqrt(sd.lap->dirichlet_form(sd.Q));
}

namespace {

json time_json(double t) { return std::isfinite(t) ? json(t) : json(nullptr); }

bool increasing_tail(const Vec& v, std::size_t k)
{
    if (v.size() < k + 1) return false;
    for (std::size_t i = v.size() - k; i < v.size(); ++i)
        if (!(v[i] > v[i - 1])) return false;
    return true;
}

}  // namespace

json Classification::evidence() const
{
    json j;
    j["class"] = to_string(cls);
    j["solver_verdict"] = to_string(solver);
    j["exploratory"] = exploratory;
    j["neighborhood_distance"] = neighborhood_distance;
    j["T_ins"] = time_json(T_ins);
    j["T_trans"] = time_json(T_trans);
    j["T_exit"] = time_json(T_exit);
    j["trapped_time"] = trapped_time;
    j["has_rate"] = has_rate;
    if (has_rate) {
        j["exponent_hat"] = exponent_hat;
        j["kappa_hat"] = kappa_hat;
    }
    if (solver == Verdict::blowup) {
        j["T_est"] = double(T_est);
        j["T_uncertainty"] = T_unc;
    }
    j["lambda"] = {{"min", lambda_min}, {"max", lambda_max}, {"end", lambda_end}};
    j["a_max"] = a_max;
    j["eps_h2"] = {{"first", eps_h2_first}, {"last", eps_h2_last}};
    j["trace_states"] = trace.states.size();
    j["trace_exit_reason"] = trace.exit_reason;
    j["selfsim_frames"] = frames;
    j["I_positive"] = I_positive;
    j["lyapunov_monotone"] = lyapunov_monotone;
    j["h1"] = {{"initial", h1_initial}, {"final", h1_final}, {"max", h1_max}, {"growing", h1_growing}};
    j["t_final"] = double(record.t.back());
    j["steps"] = record.t.size();
    return j;
}

Classification classify(const Vec& u0, const SpectralData& sd, const SolverConfig& scfg, const ClassifyConfig& ccfg)
{
    Classification cl;
    cl.neighborhood_distance = neighborhood_distance(u0, sd);
    if (!(cl.neighborhood_distance < ccfg.neighborhood)) {
        if (!ccfg.override_neighborhood)
            throw ConfigError("classify: initial data outside the neighborhood of Q (relative Dot H^1 distance " +
                              std::to_string(cl.neighborhood_distance) + " >= " +
                              std::to_string(ccfg.neighborhood) + "); use the neighborhood override");
        cl.exploratory = true;
    }
    if (sd.grid->d() < 7) cl.exploratory = true;

    Tracker tk(sd, sd.grid, {}, cl.exploratory);
    Time next = 0;
    auto obs = [&](Time t, const Vec& u) {
        if (tk.exited() || t < next) return;
        tk.push(t, u);
        next = t + Time(ccfg.snap_dt);
    };
    cl.record = evolve(RadialField{sd.grid, u0, 0.0}, scfg, obs);
    const RunRecord& rec = cl.record;
    cl.trace = tk.finish();
    cl.solver = rec.verdict;

    const auto& S = cl.trace.states;
    if (!S.empty()) {
        cl.lambda_min = cl.lambda_max = S.front().lambda;
        for (const auto& st : S) {
            cl.lambda_min = std::min(cl.lambda_min, st.lambda);
            cl.lambda_max = std::max(cl.lambda_max, st.lambda);
            cl.a_max = std::max(cl.a_max, std::abs(st.a));
        }
        cl.lambda_end = S.back().lambda;
        cl.eps_h2_first = S.front().eps_h2;
        cl.eps_h2_last = S.back().eps_h2;
        const double d2 = ccfg.delta * ccfg.delta;
        for (const auto& st : S) {
            double a = std::abs(st.a);
            if (st.dist_M > d2 || (a > ccfg.a_floor && a >= ccfg.K * st.eps_h2 * st.eps_h2)) {
                cl.T_ins = st.t;
                break;
            }
        }
        if (std::isfinite(cl.T_ins)) {
            for (const auto& st : S) {
                if (st.t < cl.T_ins) continue;
                if (std::abs(st.a) > ccfg.delta || st.dist_M > ccfg.K_tilde * ccfg.delta) {
                    cl.T_trans = st.t;
                    break;
                }
            }
        }
        if (std::isfinite(cl.T_trans)) {
            for (const auto& st : S) {
                if (st.t < cl.T_trans) continue;
                if (std::abs(st.a) > ccfg.alpha || st.dist_M > ccfg.K_tilde * ccfg.alpha) {
                    cl.T_exit = st.t;
                    break;
                }
            }
        }
    }
    if (!std::isfinite(cl.T_exit) && cl.trace.exited) {
        cl.T_exit = cl.trace.exit_t;
        if (!std::isfinite(cl.T_trans)) cl.T_trans = cl.T_exit;
        if (!std::isfinite(cl.T_ins)) cl.T_ins = cl.T_trans;
    }
    cl.trapped_time = std::isfinite(cl.T_exit) ? cl.T_exit : double(rec.t.back());

    cl.h1_initial = rec.h1dot.front();
    cl.h1_final = rec.h1dot.back();
    cl.h1_max = *std::max_element(rec.h1dot.begin(), rec.h1dot.end());
    cl.h1_growing = increasing_tail(rec.h1dot, 10);

    const int d = sd.grid->d();
    const double target = 1.0 / (GroundState(d).p() - 1.0);
    if (rec.verdict == Verdict::blowup && rec.has_T) {
        cl.T_est = rec.T_est;
        cl.T_unc = rec.T_unc;
        try {
            RateCheck rc = rate_check(rec, rec.T_est);
            cl.exponent_hat = rc.exponent_hat;
            cl.kappa_hat = rc.kappa_hat;
            cl.has_rate = true;
        } catch (const InsufficientData&) {
            cl.has_rate = false;
        }
    }

    if (ccfg.selfsim) {
        auto yg = std::make_shared<SelfSimGrid>(d);
        Time T = rec.verdict == Verdict::blowup && rec.has_T ? rec.T_est : rec.t.back() + Time(1.0);
        std::vector<SelfSimFrame> fr = frames_from_run(rec, T, yg);
        cl.frames = fr.size();
        for (const auto& f : fr)
            if (I_w(f) > 1e-8 * std::max(1.0, mass_w(f))) cl.I_positive = true;
        if (rec.verdict == Verdict::blowup && fr.size() >= 3) cl.lyapunov_monotone = lyapunov_check(fr).monotone;
    }

    switch (rec.verdict) {
    case Verdict::blowup:
        cl.cls = cl.has_rate && std::abs(cl.exponent_hat / target - 1.0) <= ccfg.exponent_tol ? Class::type1_blowup
                                                                                              : Class::undecided;
        break;
    case Verdict::dissipation: cl.cls = Class::dissipation; break;
    case Verdict::horizon: {
        bool trapped = !cl.trace.exited && !S.empty() && !std::isfinite(cl.T_ins) && cl.a_max <= 1.0 / ccfg.K &&
                       cl.eps_h2_last <= std::max(cl.eps_h2_first, ccfg.h2_floor);
        cl.cls = trapped ? Class::soliton : Class::undecided;
        break;
    }
    }
    return cl;
}

BisectionResult bisect_threshold(const std::function<Vec(double)>& family, double c_low, double c_high,
                                 const SpectralData& sd, const SolverConfig& scfg, const ClassifyConfig& ccfg,
                                 double rel_width, int max_levels)
{
    if (!(c_low < c_high)) throw ConfigError("bisect_threshold: need c_low < c_high");
    if (!(rel_width > 0)) throw ConfigError("bisect_threshold: rel_width must be positive");
    ClassifyConfig cc = ccfg;
    cc.selfsim = false;
    Classification lo = classify(family(c_low), sd, scfg, cc);
    Classification hi = classify(family(c_high), sd, scfg, cc);
    if (lo.cls == hi.cls)
        throw BracketError("bisect_threshold: both endpoints classified " + to_string(lo.cls));
    bool flipped = false;
    if (lo.cls == Class::type1_blowup && hi.cls == Class::dissipation) flipped = true;
    else if (!(lo.cls == Class::dissipation && hi.cls == Class::type1_blowup))
        throw BracketError("bisect_threshold: endpoints must be Dissipation and TypeI-Blowup, got " +
                           to_string(lo.cls) + " and " + to_string(hi.cls));
    // a: dissipative side, b: blow-up side
    double a = flipped ? c_high : c_low, b = flipped ? c_low : c_high;
    double ta = (flipped ? hi : lo).trapped_time, tb = (flipped ? lo : hi).trapped_time;
    const double target = rel_width * (c_high - c_low);
    BisectionResult res;
    for (int level = 1; level <= max_levels && std::abs(b - a) > target; ++level) {
        double m = 0.5 * (a + b);
        Classification cm = classify(family(m), sd, scfg, cc);
        BisectionLevel lv;
        lv.level = level;
        lv.c_mid = m;
        lv.mid_class = cm.cls;
        lv.trapped_mid = cm.trapped_time;
        if (cm.cls == Class::dissipation) {
            a = m;
            ta = cm.trapped_time;
        } else if (cm.cls == Class::type1_blowup) {
            b = m;
            tb = cm.trapped_time;
        } else {
            res.landed_on_threshold = true;
        }
        lv.c_low = std::min(a, b);
        lv.c_high = std::max(a, b);
        lv.trapped_low = flipped ? tb : ta;
        lv.trapped_high = flipped ? ta : tb;
        lv.trapped_bracket = 0.5 * (ta + tb);
        res.levels.push_back(lv);
        if (res.landed_on_threshold) {
            res.c_star = m;
            res.width = 0.0;
            break;
        }
    }
    if (!res.landed_on_threshold) {
        res.c_star = 0.5 * (a + b);
        res.width = std::abs(b - a);
    }
    const auto& L = res.levels;
    if (L.size() >= 5) {
        res.trapped_monotone_last5 = true;
        for (std::size_t k = L.size() - 4; k < L.size(); ++k)
            if (!(L[k].trapped_bracket > L[k - 1].trapped_bracket)) res.trapped_monotone_last5 = false;
    }
    return res;
}

// ---------------------------------------------------------------- configuration

namespace {

class Reader {
public:
    Reader(const json& j, std::string path) : j_(j), path_(std::move(path))
    {
        if (!j_.is_object()) throw ConfigError("config: '" + where() + "' must be an object");
    }

    template <class T>
    void get(const char* key, T& dst)
    {
        seen_.insert(key);
        auto it = j_.find(key);
        if (it == j_.end()) return;
        try {
            dst = it->template get<T>();
        } catch (const json::exception&) {
            throw ConfigError("config: field '" + field(key) + "' has the wrong type (" + it->type_name() + ")");
        }
    }
    void get_num(const char* key, double& dst)
    {
        seen_.insert(key);
        auto it = j_.find(key);
        if (it == j_.end()) return;
        if (!it->is_number()) throw ConfigError("config: field '" + field(key) + "' must be a number");
        dst = it->get<double>();
    }
    bool has(const char* key) const { return j_.contains(key); }
    Reader child(const char* key)
    {
        seen_.insert(key);
        static const json empty = json::object();
        auto it = j_.find(key);
        return Reader(it == j_.end() ? empty : *it, field(key));
    }
    void finish() const
    {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!seen_.count(it.key())) throw ConfigError("config: unknown field '" + field(it.key()) + "'");
    }
    std::string field(const std::string& k) const { return path_.empty() ? k : path_ + "." + k; }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
    std::string where() const { return path_.empty() ? "<root>" : path_; }
};

void read_solver(Reader r, SolverConfig& s)
{
    r.get_num("dt_init", s.dt_init);
    r.get_num("dt_min", s.dt_min);
    r.get_num("dt_max", s.dt_max);
    r.get_num("blowup_linf", s.blowup_linf);
    r.get_num("dissip_linf", s.dissip_linf);
    r.get_num("safety", s.safety);
    r.get_num("t_end", s.t_end);
    r.get_num("rtol", s.rtol);
    r.get_num("atol", s.atol);
    r.get_num("c_dt", s.c_dt);
    r.get("integrator", s.integrator);
    r.get("nonlinear", s.nonlinear);
    r.get("balanced", s.balanced);
    r.get("linearize_about_Q", s.linearize_about_Q);
    r.get_num("snap_dt", s.snap_dt);
    r.get_num("snap_growth", s.snap_growth);
    r.get("keep_coarse", s.keep_coarse);
    r.get("max_steps", s.max_steps);
    r.finish();
    s.validate();
}

json solver_json(const SolverConfig& s)
{
    return {{"dt_init", s.dt_init},
            {"dt_min", s.dt_min},
            {"dt_max", s.dt_max},
            {"blowup_linf", s.blowup_linf},
            {"dissip_linf", s.dissip_linf},
            {"safety", s.safety},
            {"t_end", s.t_end},
            {"rtol", s.rtol},
            {"atol", s.atol},
            {"c_dt", s.c_dt},
            {"integrator", s.integrator},
            {"nonlinear", s.nonlinear},
            {"balanced", s.balanced},
            {"linearize_about_Q", s.linearize_about_Q},
            {"snap_dt", s.snap_dt},
            {"snap_growth", s.snap_growth},
            {"keep_coarse", s.keep_coarse},
            {"max_steps", s.max_steps}};
}

void read_initial(Reader r, InitialData& id)
{
    r.get("family", id.family);
    r.get_num("c", id.c);
    r.get_num("mu", id.mu);
    r.get_num("sigma", id.sigma);
    r.get("index", id.index);
    r.finish();
    validate(id);
}

json initial_json(const InitialData& id)
{
    return {{"family", id.family}, {"c", id.c}, {"mu", id.mu}, {"sigma", id.sigma}, {"index", id.index}};
}

}  // namespace

ExperimentConfig parse_config(const json& j)
{
    static const std::set<std::string> kinds{"spectrum", "evolve", "shoot", "minimal",
                                             "classify", "selfsim", "selfsim-sweep"};
    ExperimentConfig c;
    c.forward.t_end = 3000.0;
    c.forward.dissip_linf = 1e-5;
    Reader r(j, "");
    r.get("kind", c.kind);
    if (!kinds.count(c.kind)) throw ConfigError("config: unknown kind '" + c.kind + "'");
    r.get("seed", c.seed);
    r.get("workers", c.workers);
    if (c.workers < 1) throw ConfigError("config: workers must be >= 1");
    r.get("out", c.out);
    {
        Reader p = r.child("params");
        p.get("d", c.prm.d);
        p.get("low_dimension", c.prm.low_dimension);
        p.finish();
    }
    {
        Reader g = r.child("grid");
        g.get("cells", c.prm.n);
        g.get_num("r_max", c.prm.r_max);
        g.get_num("first_cell", c.prm.first_cell);
        g.get_num("cutoff_M", c.prm.cutoff_m);
        std::string b = to_string(c.bc);
        g.get("boundary", b);
        c.bc = parse_boundary(b);
        g.finish();
    }
    c.prm.validate();
    read_solver(r.child("solver"), c.solver);
    c.solver.bc = c.bc;
    read_initial(r.child("initial"), c.initial);
    {
        Reader k = r.child("classify");
        k.get_num("neighborhood", c.classify.neighborhood);
        k.get("override_neighborhood", c.classify.override_neighborhood);
        k.get_num("K", c.classify.K);
        k.get_num("delta", c.classify.delta);
        k.get_num("alpha", c.classify.alpha);
        k.get_num("K_tilde", c.classify.K_tilde);
        k.get_num("a_floor", c.classify.a_floor);
        k.get_num("h2_floor", c.classify.h2_floor);
        k.get_num("exponent_tol", c.classify.exponent_tol);
        k.get_num("snap_dt", c.classify.snap_dt);
        k.get("selfsim", c.classify.selfsim);
        k.finish();
        if (!(c.classify.neighborhood > 0 && c.classify.K > 0 && c.classify.delta > 0 &&
              c.classify.alpha > c.classify.delta && c.classify.K_tilde >= 1 && c.classify.snap_dt > 0))
            throw ConfigError("config: classify thresholds need 0 < delta < alpha, K > 0, K_tilde >= 1");
    }
    {
        Reader s = r.child("spectrum");
        s.get("samples", c.samples);
        s.finish();
    }
    {
        Reader s = r.child("shoot");
        c.family = c.initial;
        if (s.has("family")) read_initial(s.child("family"), c.family);
        else s.child("family");
        s.get_num("c_low", c.c_low);
        s.get_num("c_high", c.c_high);
        s.get_num("rel_width", c.rel_width);
        s.get("max_levels", c.max_levels);
        s.finish();
        if (!(c.c_low < c.c_high)) throw ConfigError("config: shoot.c_low must be below shoot.c_high");
    }
    {
        Reader m = r.child("minimal");
        m.get("signs", c.signs);
        m.get_num("epsilon", c.epsilon);
        m.get("n_list", c.n_list);
        m.get("n_forward", c.n_forward);
        m.get("epsilon_sweep", c.epsilon_sweep);
        c.forward.bc = c.bc;
        read_solver(m.child("forward"), c.forward);
        c.forward.bc = c.bc;
        m.finish();
        for (int s : c.signs)
            if (s != 1 && s != -1) throw ConfigError("config: minimal.signs entries must be +1 or -1");
    }
    {
        Reader s = r.child("selfsim");
        s.get("y_points", c.y_points);
        s.get_num("y_max", c.y_max);
        s.get("values", c.values);
        s.finish();
    }
    {
        Reader o = r.child("output");
        o.get("write_snapshots", c.write_snapshots);
        o.finish();
    }
    r.finish();
    return c;
}

json to_json(const ExperimentConfig& c)
{
    json j;
    j["kind"] = c.kind;
    j["seed"] = c.seed;
    j["workers"] = c.workers;
    j["out"] = c.out;
    j["params"] = {{"d", c.prm.d}, {"low_dimension", c.prm.low_dimension}};
    j["grid"] = {{"cells", c.prm.n},
                 {"r_max", c.prm.r_max},
                 {"first_cell", c.prm.first_cell},
                 {"cutoff_M", c.prm.cutoff_m},
                 {"boundary", to_string(c.bc)}};
    j["solver"] = solver_json(c.solver);
    j["initial"] = initial_json(c.initial);
    const auto& k = c.classify;
    j["classify"] = {{"neighborhood", k.neighborhood}, {"override_neighborhood", k.override_neighborhood},
                     {"K", k.K}, {"delta", k.delta}, {"alpha", k.alpha}, {"K_tilde", k.K_tilde},
                     {"a_floor", k.a_floor}, {"h2_floor", k.h2_floor}, {"exponent_tol", k.exponent_tol}, {"snap_dt", k.snap_dt},
                     {"selfsim", k.selfsim}};
    j["spectrum"] = {{"samples", c.samples}};
    j["shoot"] = {{"family", initial_json(c.family)},
                  {"c_low", c.c_low},
                  {"c_high", c.c_high},
                  {"rel_width", c.rel_width},
                  {"max_levels", c.max_levels}};
    j["minimal"] = {{"signs", c.signs},
                    {"epsilon", c.epsilon},
                    {"n_list", c.n_list},
                    {"n_forward", c.n_forward},
                    {"epsilon_sweep", c.epsilon_sweep},
                    {"forward", solver_json(c.forward)}};
    j["selfsim"] = {{"y_points", c.y_points}, {"y_max", c.y_max}, {"values", c.values}};
    j["output"] = {{"write_snapshots", c.write_snapshots}};
    return j;
}

json load_config_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    const std::string text = ss.str();
    try {
        return json::parse(text, nullptr, true, true);
    } catch (const json::parse_error& e) {
        std::size_t line = 1, col = 1;
        for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
            if (text[i] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
        throw ConfigError("config: parse error in '" + path + "' at line " + std::to_string(line) + ", column " +
                          std::to_string(col) + ": " + e.what());
    }
}

std::uint64_t fnv1a64(const std::string& s)
{
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    return h;
}

std::string config_hash(const ExperimentConfig& c)
{
    json j = to_json(c);
    // bookkeeping fields do not change results
    j.erase("out");
    j.erase("workers");
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << fnv1a64(j.dump());
    return os.str();
}

// ---------------------------------------------------------------- runner

namespace {

struct Out {
    fs::path dir;
    std::string header;
    json files = json::array();

    std::ofstream open(const std::string& name)
    {
        fs::path p = dir / name;
        fs::create_directories(p.parent_path());
        std::ofstream os(p);
        if (!os) throw ConfigError("cannot write '" + p.string() + "'");
        files.push_back(name);
        return os;
    }
    void write_json(const std::string& name, const json& j)
    {
        auto os = open(name);
        os << std::setw(2) << j << '\n';
    }
};

std::string header_block(const ExperimentConfig& c, const std::string& hash)
{
    std::ostringstream os;
    os << std::setprecision(17);
    os << "# d=" << c.prm.d << '\n';
    os << "# p=" << c.prm.p() << '\n';
    os << "# grid=cells:" << c.prm.n << ",r_max:" << c.prm.r_max << ",first_cell:" << c.prm.first_cell
       << ",boundary:" << to_string(c.bc) << '\n';
    os << "# config_hash=" << hash << '\n';
    return os.str();
}

void write_field_file(Out& out, const std::string& name, const RadialGrid& g, const Vec& u, double t)
{
    auto os = out.open(name);
    os << out.header;
    write_field(os, g, u, t);
}

json rate_json(const RunRecord& rec)
{
    json j;
    j["verdict"] = to_string(rec.verdict);
    j["t_final"] = double(rec.t.back());
    j["steps"] = rec.t.size();
    j["rejected"] = rec.rejected;
    if (rec.verdict == Verdict::blowup && rec.has_T) {
        j["T_est"] = double(rec.T_est);
        j["T_uncertainty"] = rec.T_unc;
        try {
            RateCheck rc = rate_check(rec, rec.T_est);
            j["exponent_hat"] = rc.exponent_hat;
            j["kappa_hat"] = rc.kappa_hat;
        } catch (const InsufficientData& e) {
            j["rate_error"] = e.what();
        }
    }
    return j;
}

void run_spectrum(const ExperimentConfig& c, const SpectralData& sd, Out& out)
{
    CoercivityResult co;
    bool have_co = true;
    json extra;
    try {
        co = coercivity_estimate(sd, c.samples, c.seed, c.workers);
    } catch (const CoercivityViolation& e) {
        have_co = false;
        extra["coercivity_violation"] = {{"which", e.which}, {"message", e.what()}};
        write_field_file(out, "coercivity_witness.csv", *sd.grid, e.witness, 0.0);
    }
    json rep = spectral_report(sd, have_co ? &co : nullptr);
    double es = shoot_e0(c.prm.d);
    rep["e0_shooting"] = es;
    rep["e0_relative_difference"] = std::abs(es - sd.e0) / sd.e0;
    for (auto it = extra.begin(); it != extra.end(); ++it) rep[it.key()] = it.value();
    out.write_json("spectrum.json", rep);

    const auto& g = *sd.grid;
    auto os = out.open("profiles.csv");
    os << out.header << "r,Q,LambdaQ,Y,Psi0\n" << std::setprecision(17);
    for (std::size_t i = 0; i < g.size(); ++i)
        os << g.r(i) << ',' << sd.Q[i] << ',' << sd.LQ[i] << ',' << sd.Y[i] << ',' << sd.Psi0[i] << '\n';

    auto zs = out.open("zero_modes.csv");
    zs << out.header << "r,T0,Gamma0,T1,Gamma1,T2,Gamma2\n" << std::setprecision(17);
    ZeroModePair z[3] = {zero_modes(0, g), zero_modes(1, g), zero_modes(2, g)};
    for (std::size_t i = 1; i < g.size(); ++i) {
        zs << g.r(i);
        for (auto& zm : z) zs << ',' << zm.T[i] << ',' << zm.Gamma[i];
        zs << '\n';
    }
}

void run_evolve(const ExperimentConfig& c, const SpectralData& sd, Out& out)
{
    Vec u0 = make_initial(c.initial, sd, c.seed);
    RunRecord rec = evolve(RadialField{sd.grid, u0, 0.0}, c.solver);
    {
        auto os = out.open("run.csv");
        write_run_csv(os, rec, out.header);
    }
    write_field_file(out, "initial.csv", *sd.grid, u0, 0.0);
    write_field_file(out, "final.csv", *sd.grid, rec.final_u(), double(rec.snaps.back().t));
    if (c.write_snapshots)
        for (std::size_t k = 0; k < rec.snaps.size(); ++k) {
            std::ostringstream nm;
            nm << "snapshots/snap_" << std::setw(5) << std::setfill('0') << k << ".csv";
            write_field_file(out, nm.str(), *sd.grid, rec.snaps[k].u, double(rec.snaps[k].t));
        }
    json summary = rate_json(rec);
    summary["neighborhood_distance"] = neighborhood_distance(u0, sd);
    ModulationTrace tr = track(rec, sd);
    {
        auto os = out.open("trace.csv");
        write_trace_csv(os, tr, out.header);
    }
    summary["trace_states"] = tr.states.size();
    summary["trace_exit_t"] = tr.exited ? json(tr.exit_t) : json(nullptr);
    if (tr.states.size() >= 2) {
        EnergyReport er = energy_diagnostics(tr, sd);
        summary["energy_diagnostics"] = {{"cumulative", er.cumulative}, {"eta2", er.eta2},
                                         {"ratio", er.ratio}, {"lyapunov_C", er.lyapunov_C},
                                         {"lyapunov_checked", er.lyapunov_checked},
                                         {"lyapunov_violations", er.lyapunov_violations},
                                         {"energy_C", er.energy_C}};
        LawConstants lc = law_constants(tr, sd.e0);
        summary["law_constants"] = {{"modulation_C", lc.modulation_C}, {"scale_C", lc.scale_C},
                                    {"samples", lc.samples}};
        try {
            SlopeFit sf = instability_slope(tr);
            summary["instability_slope"] = {{"slope", sf.slope}, {"e0", sd.e0}, {"samples", sf.samples}};
        } catch (const InsufficientData&) {
        }
    }
    out.write_json("summary.json", summary);
}

void run_classify(const ExperimentConfig& c, const SpectralData& sd, Out& out)
{
    Vec u0 = make_initial(c.initial, sd, c.seed);
    Classification cl = classify(u0, sd, c.solver, c.classify);
    out.write_json("verdict.json", cl.evidence());
    {
        auto os = out.open("run.csv");
        write_run_csv(os, cl.record, out.header);
    }
    {
        auto os = out.open("trace.csv");
        write_trace_csv(os, cl.trace, out.header);
    }
}

void run_shoot(const ExperimentConfig& c, const SpectralData& sd, Out& out)
{
    InitialData fam = c.family;
    auto family = [&](double x) {
        InitialData id = fam;
        id.c = x;
        return make_initial(id, sd, c.seed);
    };
    BisectionResult br = bisect_threshold(family, c.c_low, c.c_high, sd, c.solver, c.classify, c.rel_width,
                                          c.max_levels);
    {
        auto os = out.open("bisection.csv");
        os << out.header << "level,c_low,c_high,c_mid,mid_class,trapped_mid,trapped_low,trapped_high,trapped_bracket\n"
           << std::setprecision(17);
        for (const auto& lv : br.levels)
            os << lv.level << ',' << lv.c_low << ',' << lv.c_high << ',' << lv.c_mid << ',' << to_string(lv.mid_class)
               << ',' << lv.trapped_mid << ',' << lv.trapped_low << ',' << lv.trapped_high << ','
               << lv.trapped_bracket << '\n';
    }
    out.write_json("threshold.json", {{"c_star", br.c_star},
                                      {"bracket_width", br.width},
                                      {"landed_on_threshold", br.landed_on_threshold},
                                      {"levels", br.levels.size()},
                                      {"trapped_monotone_last5", br.trapped_monotone_last5}});
}

void run_minimal(const ExperimentConfig& c, const SpectralData& sd, Out& out)
{
    json rep = json::object();
    std::vector<MinimalApproximant> all;
    std::vector<double> diffs;
    std::vector<FateReport> fates;
    for (int sign : c.signs) {
        const std::string tag = sign > 0 ? "plus" : "minus";
        CauchyReport cr = cauchy_in_n(sign, c.epsilon, c.n_list, c.solver, sd, c.workers);
        json js;
        js["sup_diff"] = cr.sup_diff;
        js["ratio"] = cr.ratio;
        js["expected_ratio"] = cr.expected_ratio;
        js["decreasing"] = cr.decreasing;
        json per = json::array();
        for (std::size_t k = 0; k < cr.approx.size(); ++k) {
            const auto& m = cr.approx[k];
            json e = {{"n", m.n},
                      {"order_violation", m.order_violation},
                      {"monotone_violation", m.monotone_violation},
                      {"remainder_constant", remainder_constant(m, sd.e0)},
                      {"lambda0", m.lambda0},
                      {"a0", m.a0}};
            try {
                e["backward_slope"] = backward_slope(m).slope;
            } catch (const InsufficientData&) {
            }
            per.push_back(e);
            {
                auto os = out.open("trace_" + tag + "_n" + std::to_string(m.n) + ".csv");
                write_minimal_trace(os, m, out.header);
            }
            write_field_file(out, "field_" + tag + "_n" + std::to_string(m.n) + ".csv", *sd.grid, m.u_at_0.u, 0.0);
        }
        js["approximants"] = per;
        auto it = std::find(c.n_list.begin(), c.n_list.end(), c.n_forward);
        const MinimalApproximant* fwd = nullptr;
        MinimalApproximant extra;
        if (it != c.n_list.end()) {
            fwd = &cr.approx[std::size_t(it - c.n_list.begin())];
        } else {
            extra = construct(sign, c.n_forward, c.epsilon, c.solver, sd);
            fwd = &extra;
        }
        SolverConfig fc = c.forward;
        if (sign > 0) fc.keep_coarse = false;
        FateReport fr = forward_fate(*fwd, fc);
        js["forward"] = rate_json(fr.record);
        js["forward"]["consistent"] = fr.consistent;
        js["forward"]["h1_ratio"] = fr.h1_ratio;
        if (sign > 0 && fr.verdict == Verdict::blowup) {
            JensenReport jr = jensen_lower_bound(fr.record, sd);
            js["jensen"] = {{"checked", jr.checked},   {"violations", jr.violations},
                            {"worst", jr.worst},       {"mdot0", jr.mdot0},
                            {"convex_increasing", jr.convex_increasing},
                            {"T_ode", jr.T_ode},       {"T_run", jr.T_run}};
        }
        json sweep = json::array();
        for (double e : c.epsilon_sweep) {
            MinimalApproximant m = construct(sign, c.n_forward, e, c.solver, sd);
            sweep.push_back({{"epsilon", e}, {"remainder_constant", remainder_constant(m, sd.e0)}});
        }
        js["epsilon_sweep"] = sweep;
        rep[tag] = js;
        for (std::size_t k = 0; k < cr.approx.size(); ++k) {
            all.push_back(cr.approx[k]);
            diffs.push_back(k < cr.sup_diff.size() ? cr.sup_diff[k] : std::nan(""));
            fates.push_back(cr.approx[k].n == fwd->n ? fr : FateReport{});
        }
    }
    {
        auto os = out.open("minimal_summary.csv");
        os << out.header << "sign,n,epsilon,sup_diff,fate,exponent_hat,kappa_hat\n" << std::setprecision(12);
        for (std::size_t k = 0; k < all.size(); ++k) {
            os << (all[k].sign > 0 ? '+' : '-') << ',' << all[k].n << ',' << all[k].epsilon << ',';
            if (std::isfinite(diffs[k])) os << diffs[k];
            os << ',';
            if (all[k].n == c.n_forward) {
                os << to_string(fates[k].verdict) << ',';
                if (fates[k].has_rate) os << fates[k].exponent_hat << ',' << fates[k].kappa_hat;
                else os << ',';
            } else {
                os << ",,";
            }
            os << '\n';
        }
    }
    out.write_json("minimal.json", rep);
}

json selfsim_one(const ExperimentConfig& c, const SpectralData& sd, const InitialData& id, Out& out,
                 const std::string& tag)
{
    Vec u0 = make_initial(id, sd, c.seed);
    SolverConfig s = c.solver;
    s.keep_coarse = true;
    RunRecord rec = evolve(RadialField{sd.grid, u0, 0.0}, s);
    auto yg = std::make_shared<SelfSimGrid>(c.prm.d, c.y_points, c.y_max);
    json j = rate_json(rec);
    j["c"] = id.c;
    Time T = rec.verdict == Verdict::blowup && rec.has_T ? rec.T_est : rec.t.back() + Time(1.0);
    std::vector<SelfSimFrame> fr = frames_from_run(rec, T, yg);
    {
        auto os = out.open("frames" + tag + ".csv");
        write_frames_csv(os, fr, out.header);
    }
    j["frames"] = fr.size();
    bool anyI = false;
    for (const auto& f : fr) anyI = anyI || blowup_criterion(f);
    j["criterion_any"] = anyI;
    if (fr.size() >= 3) {
        LyapunovReport lr = lyapunov_check(fr);
        j["lyapunov"] = {{"monotone", lr.monotone},
                         {"violations", lr.violations},
                         {"worst_excess", lr.worst_excess},
                         {"median_rel_dissipation", lr.median_rel_dissipation},
                         {"E_first", lr.E_first},
                         {"E_last", lr.E_last},
                         {"E_kappa", energy_const(kappa_const(c.prm.d), c.prm.d)},
                         {"l2_constant", lr.l2_constant},
                         {"spacetime_max", lr.spacetime_max}};
    }
    if (rec.verdict == Verdict::blowup && rec.has_T && rec.snaps.size() >= 2) {
        // probe the criterion one decade before the threshold
        const Snapshot* probe = &rec.snaps.front();
        for (const auto& sn : rec.snaps) {
            double m = 0.0;
            for (double x : sn.u) m = std::max(m, std::abs(x));
            if (m > rec.cfg.blowup_linf / 10.0) break;
            probe = &sn;
        }
        double rem = double(rec.T_est - probe->t);
        if (rem > 0 && std::sqrt(1.1 * rem) * yg->y_max() <= sd.grid->r_max()) {
            auto pr = criterion_probe(RadialField{sd.grid, probe->u, double(probe->t)}, probe->t, rem, yg);
            j["criterion_probe"] = {{"t", double(probe->t)}, {"remaining", rem}, {"T_factors", {0.9, 1.0, 1.1}},
                                    {"criterion", {pr[0], pr[1], pr[2]}}};
        }
    }
    return j;
}

void run_selfsim(const ExperimentConfig& c, const SpectralData& sd, Out& out)
{
    if (c.kind == "selfsim" && c.values.empty()) {
        out.write_json("selfsim.json", selfsim_one(c, sd, c.initial, out, ""));
        return;
    }
    std::vector<double> vals = c.values.empty() ? std::vector<double>{c.initial.c} : c.values;
    json arr = json::array();
    for (std::size_t k = 0; k < vals.size(); ++k) {
        InitialData id = c.initial;
        id.c = vals[k];
        arr.push_back(selfsim_one(c, sd, id, out, "_" + std::to_string(k)));
    }
    out.write_json("selfsim.json", {{"runs", arr}});
}

}  // namespace

json run_config(ExperimentConfig cfg, const RunOverrides& ov)
{
    if (!ov.kind.empty()) cfg.kind = ov.kind == "selfsim-sweep" ? "selfsim-sweep" : ov.kind;
    if (!ov.out.empty()) cfg.out = ov.out;
    if (ov.has_seed) cfg.seed = ov.seed;
    if (ov.workers > 0) cfg.workers = ov.workers;
    if (ov.override_neighborhood) cfg.classify.override_neighborhood = true;
    static const std::set<std::string> kinds{"spectrum", "evolve", "shoot", "minimal",
                                             "classify", "selfsim", "selfsim-sweep"};
    if (!kinds.count(cfg.kind)) throw ConfigError("unknown experiment kind '" + cfg.kind + "'");
    cfg.prm.validate();
    cfg.solver.bc = cfg.bc;
    cfg.forward.bc = cfg.bc;

    Out out;
    out.dir = cfg.out;
    std::error_code ec;
    fs::create_directories(out.dir, ec);
    if (ec || !fs::is_directory(out.dir)) throw ConfigError("cannot create output directory '" + cfg.out + "'");
    const std::string hash = config_hash(cfg);
    out.header = header_block(cfg, hash);

    SpectralData sd = make_spectral(cfg.prm, Boundary::robin);
    if (cfg.kind == "spectrum") run_spectrum(cfg, sd, out);
    else if (cfg.kind == "evolve") run_evolve(cfg, sd, out);
    else if (cfg.kind == "classify") run_classify(cfg, sd, out);
    else if (cfg.kind == "shoot") run_shoot(cfg, sd, out);
    else if (cfg.kind == "minimal") run_minimal(cfg, sd, out);
    else run_selfsim(cfg, sd, out);

    out.write_json("config.resolved.json", to_json(cfg));
    json manifest;
    manifest["kind"] = cfg.kind;
    manifest["config_hash"] = hash;
    manifest["seed"] = cfg.seed;
    manifest["d"] = cfg.prm.d;
    manifest["exploratory"] = cfg.prm.d < 7;
    manifest["files"] = out.files;
    json hashes = json::object();
    for (const auto& f : out.files) {
        std::ifstream in(out.dir / f.get<std::string>(), std::ios::binary);
        std::stringstream ss;
        ss << in.rdbuf();
        std::ostringstream hs;
        hs << std::hex << std::setw(16) << std::setfill('0') << fnv1a64(ss.str());
        hashes[f.get<std::string>()] = hs.str();
    }
    manifest["file_hashes"] = hashes;
    {
        std::ofstream os(out.dir / "manifest.json");
        if (!os) throw ConfigError("cannot write manifest in '" + cfg.out + "'");
        os << std::setw(2) << manifest << '\n';
    }
    return manifest;
}

}  // namespace nlh
