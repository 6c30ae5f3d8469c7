#pragma once

#include "fbx/io.hpp"

#include <chrono>
#include <filesystem>
#include <map>

namespace fbx {

inline constexpr const char* kArtifactVersion = "0.1.0";

/// Config validation failure carrying every problem found.
class ConfigError : public DomainError {
public:
    explicit ConfigError(std::vector<std::string> errors)
        : DomainError(join(errors)), errors_(std::move(errors))
    {
    }
    const std::vector<std::string>& errors() const { return errors_; }

private:
    static std::string join(const std::vector<std::string>& e)
    {
        std::string s = "invalid config:";
        for (const auto& x : e)
            s += "\n  - " + x;
        return s;
    }
    std::vector<std::string> errors_;
};

struct ProblemConfig {
    int dimension = 2;
    double h = 1.0 / 64;
    double half_width = 1.0; ///< domain [-w, w]^n
    std::string fixture = "poly-diag-0.3-0.7";
    std::string solver = "active-set"; ///< or "psor"
    double tol = 1e-10;
};

struct DiagnosticsConfig {
    std::vector<std::vector<double>> centers; ///< empty: the origin
    double r_max = 0.4;
    double theta = std::pow(2.0, -0.25);
    int count = 200;
    std::vector<double> lambdas = default_weiss_lambdas();
    double monotonicity_tol = 0.05;
    double phi_lower_bound = 2.0; ///< checked with the same tolerance under --assert
    double tau_eig = kKernelEigenThreshold;
    double tau_a = kAnomalousSlack;
};

struct AnomalousConfig {
    int n = 3;
    int m = 1;
    double h = 1.0 / 512;
    double tol_k = 1e-4;
    double coarse_h = 1.0 / 128;
};

struct ExperimentConfig {
    std::string command;
    ProblemConfig problem;
    DiagnosticsConfig diagnostics;
    AnomalousConfig anomalous;
    std::vector<std::string> manifests; ///< report inputs
    std::string output_dir = "out";
    bool deterministic = true;
};

inline Json to_json(const ExperimentConfig& c)
{
    Json centers = Json::array();
    for (const auto& x : c.diagnostics.centers)
        centers.push_back(x);
    return {{"command", c.command},
            {"problem",
             {{"dimension", c.problem.dimension},
              {"h", c.problem.h},
              {"half_width", c.problem.half_width},
              {"fixture", c.problem.fixture},
              {"solver", c.problem.solver},
              {"tol", c.problem.tol}}},
            {"diagnostics",
             {{"centers", centers},
              {"r_max", c.diagnostics.r_max},
              {"theta", c.diagnostics.theta},
              {"count", c.diagnostics.count},
              {"lambdas", c.diagnostics.lambdas},
              {"monotonicity_tol", c.diagnostics.monotonicity_tol},
              {"phi_lower_bound", c.diagnostics.phi_lower_bound},
              {"tau_eig", c.diagnostics.tau_eig},
              {"tau_a", c.diagnostics.tau_a}}},
            {"anomalous",
             {{"n", c.anomalous.n},
              {"m", c.anomalous.m},
              {"h", c.anomalous.h},
              {"tol_k", c.anomalous.tol_k},
              {"coarse_h", c.anomalous.coarse_h}}},
            {"manifests", c.manifests},
            {"output_dir", c.output_dir},
            {"deterministic", c.deterministic}};
}

namespace detail {

// Reads optional key `k` of object `o` into `out`, recording type errors.
template <class T>
void read_field(const Json& o, const std::string& path, const char* k, T& out, std::vector<std::string>& errors)
{
    if (!o.contains(k))
        return;
    try {
        out = o.at(k).get<T>();
    } catch (const Json::exception&) {
        errors.push_back(path + "." + k + ": wrong type");
    }
}

inline void check_keys(const Json& o, const std::string& path, std::initializer_list<const char*> allowed,
                       std::vector<std::string>& errors)
{
    for (const auto& [key, _] : o.items()) {
        bool ok = false;
        for (const char* a : allowed)
            ok = ok || key == a;
        if (!ok)
            errors.push_back(path + ": unknown key '" + key + "'");
    }
}

} // namespace detail

/// Parses and validates a config document; every problem is reported at once.
inline ExperimentConfig parse_config(const Json& j)
{
    std::vector<std::string> errors;
    ExperimentConfig c;
    if (!j.is_object())
        throw ConfigError({"config must be a JSON object"});
    detail::check_keys(j, "config", {"command", "problem", "diagnostics", "anomalous", "manifests", "output_dir", "deterministic"}, errors);
    detail::read_field(j, "config", "command", c.command, errors);
    detail::read_field(j, "config", "output_dir", c.output_dir, errors);
    detail::read_field(j, "config", "deterministic", c.deterministic, errors);
    detail::read_field(j, "config", "manifests", c.manifests, errors);
    auto section = [&](const char* name) -> const Json* {
        if (!j.contains(name))
            return nullptr;
        if (!j.at(name).is_object()) {
            errors.push_back(std::string("config.") + name + ": must be an object");
            return nullptr;
        }
        return &j.at(name);
    };
    if (const Json* p = section("problem")) {
        detail::check_keys(*p, "problem", {"dimension", "h", "half_width", "fixture", "solver", "tol"}, errors);
        detail::read_field(*p, "problem", "dimension", c.problem.dimension, errors);
        detail::read_field(*p, "problem", "h", c.problem.h, errors);
        detail::read_field(*p, "problem", "half_width", c.problem.half_width, errors);
        detail::read_field(*p, "problem", "fixture", c.problem.fixture, errors);
        detail::read_field(*p, "problem", "solver", c.problem.solver, errors);
        detail::read_field(*p, "problem", "tol", c.problem.tol, errors);
    }
    if (const Json* d = section("diagnostics")) {
        detail::check_keys(*d, "diagnostics",
                           {"centers", "r_max", "theta", "count", "lambdas", "monotonicity_tol", "phi_lower_bound", "tau_eig", "tau_a"},
                           errors);
        detail::read_field(*d, "diagnostics", "centers", c.diagnostics.centers, errors);
        detail::read_field(*d, "diagnostics", "r_max", c.diagnostics.r_max, errors);
        detail::read_field(*d, "diagnostics", "theta", c.diagnostics.theta, errors);
        detail::read_field(*d, "diagnostics", "count", c.diagnostics.count, errors);
        detail::read_field(*d, "diagnostics", "lambdas", c.diagnostics.lambdas, errors);
        detail::read_field(*d, "diagnostics", "monotonicity_tol", c.diagnostics.monotonicity_tol, errors);
        detail::read_field(*d, "diagnostics", "phi_lower_bound", c.diagnostics.phi_lower_bound, errors);
        detail::read_field(*d, "diagnostics", "tau_eig", c.diagnostics.tau_eig, errors);
        detail::read_field(*d, "diagnostics", "tau_a", c.diagnostics.tau_a, errors);
    }
    if (const Json* a = section("anomalous")) {
        detail::check_keys(*a, "anomalous", {"n", "m", "h", "tol_k", "coarse_h"}, errors);
        detail::read_field(*a, "anomalous", "n", c.anomalous.n, errors);
        detail::read_field(*a, "anomalous", "m", c.anomalous.m, errors);
        detail::read_field(*a, "anomalous", "h", c.anomalous.h, errors);
        detail::read_field(*a, "anomalous", "tol_k", c.anomalous.tol_k, errors);
        detail::read_field(*a, "anomalous", "coarse_h", c.anomalous.coarse_h, errors);
    }

    static const std::vector<std::string> commands{"solve", "diagnose", "classify", "construct-anomalous", "report"};
    if (std::find(commands.begin(), commands.end(), c.command) == commands.end())
        errors.push_back("command: must be one of solve, diagnose, classify, construct-anomalous, report");
    if (!c.deterministic)
        errors.push_back("deterministic: runs are always deterministic; the flag cannot be false");
    if (c.output_dir.empty())
        errors.push_back("output_dir: must not be empty");
    auto positive = [&](double v, const char* name) {
        if (!(v > 0.0) || !std::isfinite(v))
            errors.push_back(std::string(name) + ": must be positive");
    };
    const bool grid_command = c.command == "solve" || c.command == "diagnose" || c.command == "classify";
    if (grid_command) {
        if (c.problem.dimension != 2 && c.problem.dimension != 3)
            errors.push_back("problem.dimension: must be 2 or 3");
        positive(c.problem.h, "problem.h");
        positive(c.problem.half_width, "problem.half_width");
        positive(c.problem.tol, "problem.tol");
        if (c.problem.solver != "active-set" && c.problem.solver != "psor")
            errors.push_back("problem.solver: must be active-set or psor");
        if (c.problem.h > 0.0 && c.problem.half_width > 0.0) {
            const double cells = 2.0 * c.problem.half_width / c.problem.h;
            if (std::abs(cells - std::round(cells)) > 1e-9 || cells < 8)
                errors.push_back("problem.h: must divide the domain edge into at least 8 cells");
        }
        try {
            if (c.problem.dimension == 2)
                fixture_by_name<2>(c.problem.fixture, c.problem.h);
            else if (c.problem.dimension == 3)
                fixture_by_name<3>(c.problem.fixture, c.problem.h);
        } catch (const DomainError& e) {
            errors.push_back(std::string("problem.fixture: ") + e.what());
        }
    }
    if (c.command == "diagnose" || c.command == "classify") {
        positive(c.diagnostics.r_max, "diagnostics.r_max");
        positive(c.diagnostics.monotonicity_tol, "diagnostics.monotonicity_tol");
        positive(c.diagnostics.tau_eig, "diagnostics.tau_eig");
        positive(c.diagnostics.tau_a, "diagnostics.tau_a");
        if (!(c.diagnostics.theta > 0.0 && c.diagnostics.theta < 1.0))
            errors.push_back("diagnostics.theta: must lie in (0, 1)");
        if (c.diagnostics.count < 1)
            errors.push_back("diagnostics.count: must be at least 1");
        for (const auto& x : c.diagnostics.centers)
            if (static_cast<int>(x.size()) != c.problem.dimension)
                errors.push_back("diagnostics.centers: every center needs problem.dimension coordinates");
        for (double l : c.diagnostics.lambdas)
            positive(l, "diagnostics.lambdas");
    }
    if (c.command == "construct-anomalous") {
        positive(c.anomalous.h, "anomalous.h");
        positive(c.anomalous.tol_k, "anomalous.tol_k");
        positive(c.anomalous.coarse_h, "anomalous.coarse_h");
        if (c.anomalous.m < 1 || c.anomalous.n - c.anomalous.m - 1 < 1)
            errors.push_back("anomalous: need 1 <= m <= n - 2");
        if (c.anomalous.h > 0.0 && std::abs(1.0 / c.anomalous.h - std::round(1.0 / c.anomalous.h)) > 1e-9)
            errors.push_back("anomalous.h: must be 1/N");
    }
    if (c.command == "report" && c.manifests.empty())
        errors.push_back("manifests: report needs at least one manifest path");
    if (!errors.empty())
        throw ConfigError(errors);
    return c;
}

inline ExperimentConfig load_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError({"cannot open config file '" + path + "'"});
    Json j;
    try {
        in >> j;
    } catch (const Json::parse_error& e) {
        throw ConfigError({std::string("config is not valid JSON: ") + e.what()});
    }
    return parse_config(j);
}

/// Hash of the canonical serialization, so equivalent documents hash alike.
/// Hash of the canonical config. The output directory is left out: where results are written
/// does not change what they are.
inline std::string config_hash(const ExperimentConfig& c)
{
    Json j = to_json(c);
    j.erase("output_dir");
    return hex64(fnv1a(j.dump()));
}

struct StageStatus {
    std::string name;
    std::string status; ///< ok | failed
    std::string message;
};

struct RunManifest {
    std::string config_hash;
    std::string command;
    std::string artifact_version = kArtifactVersion;
    double wall_clock_seconds = 0.0;
    std::vector<StageStatus> stages;
    std::vector<std::string> outputs; ///< relative to the manifest directory
    bool checks_pass = true;          ///< acceptance checks for --assert
    std::vector<std::string> failed_checks;
};

inline Json to_json(const RunManifest& m)
{
    Json stages = Json::array();
    for (const auto& s : m.stages)
        stages.push_back({{"name", s.name}, {"status", s.status}, {"message", s.message}});
    return {{"config_hash", m.config_hash},
            {"command", m.command},
            {"artifact_version", m.artifact_version},
            {"wall_clock_seconds", m.wall_clock_seconds},
            {"stages", stages},
            {"outputs", m.outputs},
            {"checks_pass", m.checks_pass},
            {"failed_checks", m.failed_checks}};
}

namespace detail {

class RunContext {
public:
    RunContext(const ExperimentConfig& cfg, std::filesystem::path dir) : cfg_(cfg), dir_(std::move(dir))
    {
        std::filesystem::create_directories(dir_);
        manifest.config_hash = config_hash(cfg);
        manifest.command = cfg.command;
    }

    const ExperimentConfig& config() const { return cfg_; }
    const std::string& hash() const { return manifest.config_hash; }

    std::ofstream open(const std::string& name)
    {
        std::ofstream os(dir_ / name, std::ios::binary);
        if (!os)
            throw std::runtime_error("cannot write " + (dir_ / name).string());
        manifest.outputs.push_back(name);
        return os;
    }

    void write_json(const std::string& name, Json j)
    {
        j["config_hash"] = hash();
        auto os = open(name);
        os << dump_json(j);
    }

    void check(bool ok, const std::string& what)
    {
        if (!ok) {
            manifest.checks_pass = false;
            manifest.failed_checks.push_back(what);
        }
    }

    RunManifest manifest;

private:
    const ExperimentConfig& cfg_;
    std::filesystem::path dir_;
};

template <int Dim>
SolveResult<Dim> run_solve(RunContext& ctx)
{
    const auto& p = ctx.config().problem;
    ObstacleProblemSpec<Dim> spec{BoxDomain<Dim>::cube(p.half_width), p.h, 0.0, 1.0, fixture_by_name<Dim>(p.fixture, p.h)};
    SolveResult<Dim> r = [&] {
        if (p.solver == "psor") {
            PsorOptions o;
            o.tol = p.tol;
            o.record_history = false;
            return solve_psor(spec, o);
        }
        ActiveSetOptions o;
        o.tol = p.tol;
        return solve_active_set(spec, o);
    }();
    if (!r.report.converged)
        throw NumericalError("solver did not converge: complementarity residual " + std::to_string(r.report.comp_residual));
    return r;
}

template <int Dim>
std::vector<Eigen::VectorXd> centers_of(const ExperimentConfig& cfg)
{
    std::vector<Eigen::VectorXd> out;
    for (const auto& c : cfg.diagnostics.centers)
        out.push_back(Eigen::Map<const Eigen::VectorXd>(c.data(), Dim));
    if (out.empty())
        out.push_back(Eigen::VectorXd::Zero(Dim));
    return out;
}

inline ClassifierConfig classifier_config(const DiagnosticsConfig& d)
{
    ClassifierConfig c;
    c.tau_eig = d.tau_eig;
    c.tau_a = d.tau_a;
    c.r_max = d.r_max;
    c.theta = d.theta;
    return c;
}

template <int Dim>
void run_grid_command(RunContext& ctx)
{
    const auto& cfg = ctx.config();
    auto solved = run_solve<Dim>(ctx);
    ctx.manifest.stages.push_back({"solve", "ok", ""});
    if (cfg.command == "solve") {
        {
            auto os = ctx.open("u.bin");
            write_binary(solved.u, os);
        }
        ctx.write_json("solve.json", {{"report", to_json(solved.report)}, {"h", solved.u.h()}, {"dimension", Dim}});
        ctx.check(solved.report.converged, "solver converged");
        return;
    }
    GridSpace<Dim> space(solved.u);
    const auto ccfg = classifier_config(cfg.diagnostics);
    if (cfg.command == "diagnose") {
        Json summary = Json::array();
        const auto centers = centers_of<Dim>(cfg);
        for (std::size_t i = 0; i < centers.size(); ++i) {
            const auto fit = fit_blowup(space, centers[i], kReliableRadiusCells * space.h());
            if (!fit.A)
                throw NumericalError("diagnose: no quadratic blow-up at center " + std::to_string(i));
            RadialProfile prof = radial_profile(space, to_polynomial(*fit.A), centers[i],
                                                geometric_radii(cfg.diagnostics.r_max, cfg.diagnostics.theta,
                                                                cfg.diagnostics.count, space.h()));
            prof.lambdas = cfg.diagnostics.lambdas;
            const auto rep = monotonicity_report(prof, cfg.diagnostics.monotonicity_tol);
            double min_phi = std::numeric_limits<double>::infinity();
            for (const auto& q : prof.rows)
                if (q.valid && q.phi_defined)
                    min_phi = std::min(min_phi, q.phi);
            {
                auto os = ctx.open("profile_" + std::to_string(i) + ".csv");
                write_profile_csv(prof, os, ctx.hash());
            }
            Json mj = to_json(rep);
            mj["center"] = to_json(centers[i]);
            mj["min_phi"] = number(min_phi);
            mj["A"] = to_json(Eigen::MatrixXd(fit.A->matrix()));
            ctx.write_json("monotonicity_" + std::to_string(i) + ".json", mj);
            ctx.check(rep.pass(), "monotonicity at center " + std::to_string(i));
            ctx.check(!(min_phi < cfg.diagnostics.phi_lower_bound - cfg.diagnostics.monotonicity_tol),
                      "phi lower bound at center " + std::to_string(i));
        }
        ctx.manifest.stages.push_back({"diagnose", "ok", ""});
        return;
    }
    // classify: the requested centers, or every free-boundary face when none are given
    std::vector<Eigen::VectorXd> points;
    if (cfg.diagnostics.centers.empty()) {
        for (const auto& x : free_boundary_points(solved.u, contact_mask(solved.u, contact_threshold(space.h()))))
            points.push_back(Eigen::VectorXd(x));
    } else {
        points = centers_of<Dim>(cfg);
    }
    Json items = Json::array();
    std::map<std::string, int> counts{{"regular", 0}, {"singular", 0}, {"unresolved", 0}};
    for (const auto& x : points) {
        Json item;
        try {
            const auto c = classify_point(space, x, ccfg);
            item = to_json(c);
            ++counts[to_string(c.kind)];
        } catch (const std::out_of_range& e) {
            // points too close to the boundary for the reliable radii
            item = {{"x0", to_json(x)}, {"kind", "unresolved"}, {"reason", e.what()}};
            ++counts["unresolved"];
        }
        items.push_back(item);
    }
    ctx.write_json("classification.json", {{"points", items}, {"counts", counts}});
    ctx.manifest.stages.push_back({"classify", "ok", ""});
}

inline void run_anomalous(RunContext& ctx)
{
    const auto& a = ctx.config().anomalous;
    AxisymSpec spec;
    spec.n = a.n;
    spec.m = a.m;
    spec.h = a.h;
    AnomalousOptions opt;
    opt.tol_k = a.tol_k;
    opt.coarse_h = a.coarse_h;
    const auto run = construct_anomalous(spec, opt);
    ctx.manifest.stages.push_back({"construct-anomalous", "ok", ""});
    ctx.write_json("anomalous_run.json", to_json(run));
    {
        auto os = ctx.open("anomalous_profile.csv");
        write_profile_csv(run.profile, os, ctx.hash());
    }
    {
        auto os = ctx.open("bisection_trace.csv");
        CsvWriter w(os, ctx.hash(), {"h", "k", "touches", "iterations"});
        for (const auto& l : run.levels)
            for (const auto& s : l.kstar.trace)
                w.row(s.h, s.k, s.touches, s.iterations);
    }
    {
        auto os = ctx.open("free_boundary.csv");
        CsvWriter w(os, ctx.hash(), {"z", "r"});
        for (const auto& p : run.free_boundary)
            w.row(p[0], p[1]);
    }
    const double lam = run.origin.lambda_star.value;
    ctx.check(run.traces_monotone(), "monotone predicate trace");
    ctx.check(run.origin.kind == PointKind::singular && run.origin.m == 1 && run.origin.anomalous,
              "origin singular, m = 1, anomalous");
    ctx.check(lam >= 2.05 && lam <= 2.95, "lambda_star in [2.05, 2.95]");
    ctx.check(run.cusp.beta >= 1.0 && run.cusp.beta <= 1.45, "cusp exponent in [1.0, 1.45]");
    ctx.check(run.beta_change <= 0.05, "cusp exponent stable under h-halving");
    ctx.check(std::abs(run.density_exponent - (lam - 2.0)) <= 0.2, "density exponent near lambda_star - 2");
    ctx.check(run.properties.pass(), "properties (i)-(iii)");
}

// One summary row per classified point, diagnosed center or anomalous run.
inline void run_report(RunContext& ctx)
{
    auto os = ctx.open("summary.csv");
    CsvWriter w(os, ctx.hash(), {"manifest", "command", "item", "kind", "label", "m", "lambda_star", "beta", "k_star",
                                 "density_exponent", "monotonicity_pass"});
    std::ostringstream text;
    text << std::left << std::setw(28) << "manifest" << std::setw(22) << "command" << std::setw(6) << "item"
         << std::setw(12) << "kind" << std::setw(11) << "label" << std::setw(4) << "m" << std::setw(12) << "lambda*"
         << std::setw(10) << "beta" << std::setw(10) << "k*" << std::setw(10) << "dens.exp" << "monotone\n";
    auto fmt = [](const Json& v) {
        if (!v.is_number())
            return std::string("-");
        std::ostringstream s;
        s << std::setprecision(6) << v.get<double>();
        return s.str();
    };
    auto nan_of = [](const Json& v) { return v.is_number() ? v.get<double>() : std::numeric_limits<double>::quiet_NaN(); };
    auto add = [&](const std::string& man, const std::string& cmd, int item, const std::string& kind, const std::string& label,
                   int m, const Json& lam, const Json& beta, const Json& k, const Json& dens, const std::string& mono) {
        w.row(man, cmd, item, kind, label, m, nan_of(lam), nan_of(beta), nan_of(k), nan_of(dens), mono);
        text << std::left << std::setw(28) << man.substr(0, 27) << std::setw(22) << cmd << std::setw(6) << item
             << std::setw(12) << kind << std::setw(11) << (label.empty() ? "-" : label) << std::setw(4)
             << (m >= 0 ? std::to_string(m) : "-") << std::setw(12) << fmt(lam) << std::setw(10) << fmt(beta)
             << std::setw(10) << fmt(k) << std::setw(10) << fmt(dens) << (mono.empty() ? "-" : mono) << '\n';
    };
    auto read = [](const std::filesystem::path& p) {
        std::ifstream in(p);
        if (!in)
            throw DomainError("report: missing file " + p.string());
        Json j;
        in >> j;
        return j;
    };
    for (const auto& mpath : ctx.config().manifests) {
        const std::filesystem::path mp(mpath);
        const Json man = read(mp);
        const std::filesystem::path dir = mp.parent_path();
        const std::string cmd = man.value("command", "");
        const std::string name = dir.filename().string();
        for (const auto& f : man.at("outputs")) {
            const std::string file = f.get<std::string>();
            if (!std::filesystem::exists(dir / file))
                throw DomainError("report: missing file " + (dir / file).string());
        }
        for (const auto& f : man.at("outputs")) {
            const std::string file = f.get<std::string>();
            if (file == "classification.json") {
                const Json j = read(dir / file);
                int i = 0;
                for (const auto& p : j.at("points")) {
                    const Json lam = p.contains("lambda_star") ? p["lambda_star"]["value"] : Json();
                    add(name, cmd, i++, p.value("kind", ""), p.value("label", ""), p.value("m", -1), lam, Json(), Json(),
                        Json(), "");
                }
            } else if (file == "anomalous_run.json") {
                const Json j = read(dir / file);
                const Json& o = j.at("origin");
                add(name, cmd, 0, o.value("kind", ""), o.value("label", ""), o.value("m", -1),
                    o.contains("lambda_star") ? o["lambda_star"]["value"] : Json(), j["cusp"]["beta"], j["k_star"],
                    j["density_exponent"], "");
            } else if (file.rfind("monotonicity_", 0) == 0) {
                const Json j = read(dir / file);
                const int item = std::stoi(file.substr(13));
                add(name, cmd, item, "", "", -1, Json(), Json(), Json(), Json(), j.at("pass").get<bool>() ? "pass" : "fail");
            }
        }
    }
    auto ts = ctx.open("summary.txt");
    ts << "# fbx config " << ctx.hash() << '\n' << text.str();
    ctx.manifest.stages.push_back({"report", "ok", ""});
}

} // namespace detail

/// Executes one config into `out_dir` and writes manifest.json last. Stage failures are recorded
/// in the manifest (and rethrown) with the outputs written so far kept.
inline RunManifest run(const ExperimentConfig& cfg, const std::filesystem::path& out_dir)
{
    const auto t0 = std::chrono::steady_clock::now();
    detail::RunContext ctx(cfg, out_dir);
    std::exception_ptr failure;
    try {
        if (cfg.command == "construct-anomalous")
            detail::run_anomalous(ctx);
        else if (cfg.command == "report")
            detail::run_report(ctx);
        else if (cfg.problem.dimension == 2)
            detail::run_grid_command<2>(ctx);
        else
            detail::run_grid_command<3>(ctx);
    } catch (const std::exception& e) {
        ctx.manifest.stages.push_back({cfg.command, "failed", e.what()});
        ctx.manifest.checks_pass = false;
        failure = std::current_exception();
    }
    ctx.manifest.wall_clock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    {
        // only files that exist are listed
        std::vector<std::string> present;
        for (const auto& f : ctx.manifest.outputs)
            if (std::filesystem::exists(out_dir / f))
                present.push_back(f);
        ctx.manifest.outputs = present;
        std::ofstream os(out_dir / "manifest.json", std::ios::binary);
        os << dump_json(to_json(ctx.manifest));
    }
    if (failure)
        std::rethrow_exception(failure);
    return ctx.manifest;
}

} // namespace fbx
