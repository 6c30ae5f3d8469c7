#pragma once

#include "fbx/anomalous.hpp"

#include <json.hpp>

#include <cstdint>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>

namespace fbx {

using Json = nlohmann::json;

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(const std::string& s)
{
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::string hex64(std::uint64_t v)
{
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << v;
    return os.str();
}

/// Serialized JSON text: keys sorted (nlohmann's object is an ordered map), two-space indent,
/// non-finite numbers written as null.
inline std::string dump_json(const Json& j) { return j.dump(2) + "\n"; }

inline Json number(double v)
{
    if (!std::isfinite(v))
        return nullptr;
    return v;
}

inline Json to_json(const Eigen::VectorXd& v)
{
    Json a = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i)
        a.push_back(number(v[i]));
    return a;
}

inline Json to_json(const Eigen::MatrixXd& m)
{
    Json a = Json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        Eigen::VectorXd row = m.row(i).transpose();
        a.push_back(to_json(row));
    }
    return a;
}

inline Json to_json(const SolveReport& r)
{
    return {{"iterations", r.iterations},
            {"coarse_iterations", r.coarse_iterations},
            {"comp_residual", number(r.comp_residual)},
            {"pde_residual", number(r.pde_residual)},
            {"positivity_violation", number(r.positivity_violation)},
            {"multiplier_violation", number(r.multiplier_violation)},
            {"min_u", number(r.min_u)},
            {"roundoff_floor", number(r.roundoff_floor)},
            {"converged", r.converged},
            {"method", r.method},
            {"fell_back", r.fell_back}};
}

inline Json to_json(const MonotonicityReport& rep)
{
    Json cols = Json::array();
    for (const auto& c : rep.columns)
        cols.push_back({{"name", c.name},
                        {"worst_violation", number(c.worst_violation)},
                        {"r_small", number(c.r_small)},
                        {"r_big", number(c.r_big)},
                        {"pass", c.pass}});
    return {{"tol_rel", rep.tol_rel}, {"pass", rep.pass()}, {"columns", cols}};
}

inline Json to_json(const FrequencyEstimate& e)
{
    return {{"value", number(e.value)},
            {"method", to_string(e.method)},
            {"slope_value", number(e.slope_value)},
            {"plateau_value", number(e.plateau_value)},
            {"r_lo", number(e.r_lo)},
            {"r_hi", number(e.r_hi)},
            {"residual", number(e.residual)},
            {"disagreement", number(e.disagreement)},
            {"resolved", e.resolved},
            {"reason", e.reason}};
}

inline Json to_json(const PointClassification& c)
{
    Json j = {{"x0", to_json(c.x0)},
              {"kind", to_string(c.kind)},
              {"label", c.label()},
              {"m", c.m},
              {"anomalous", c.anomalous},
              {"halfspace_residual", number(c.fit.halfspace_residual)},
              {"quadratic_residual", number(c.fit.quadratic_residual)},
              {"data_norm", number(c.fit.data_norm)},
              {"tie_density", number(c.tie_density)},
              {"reason", c.reason}};
    if (c.fit.e.size() > 0)
        j["e"] = to_json(c.fit.e);
    if (c.fit.A)
        j["A"] = to_json(Eigen::MatrixXd(c.fit.A->matrix()));
    if (c.kind == PointKind::singular || c.lambda_star.resolved || !c.lambda_star.reason.empty())
        j["lambda_star"] = to_json(c.lambda_star);
    return j;
}

inline Json to_json(const std::vector<BisectionStep>& trace)
{
    Json a = Json::array();
    for (const auto& s : trace)
        a.push_back({{"k", s.k}, {"touches", s.touches}, {"iterations", s.iterations}, {"h", s.h}});
    return a;
}

inline Json to_json(const CuspFit& c)
{
    return {{"beta", number(c.beta)},
            {"residual", number(c.residual)},
            {"z_lo", c.z_lo},
            {"z_hi", c.z_hi},
            {"points", static_cast<std::int64_t>(c.points.size())}};
}

inline Json to_json(const AnomalousRun& run)
{
    Json levels = Json::array();
    for (const auto& l : run.levels) {
        Json lj = {{"h", l.h},
                   {"k_star", l.kstar.k_star},
                   {"k_lo", l.kstar.k_lo},
                   {"k_hi", l.kstar.k_hi},
                   {"bisections", l.kstar.bisections},
                   {"monotone", l.kstar.monotone},
                   {"trace", to_json(l.kstar.trace)}};
        if (l.cusp)
            lj["cusp"] = to_json(*l.cusp);
        else
            lj["cusp_error"] = l.cusp_error;
        levels.push_back(lj);
    }
    const auto& p = run.properties;
    return {{"n", run.spec.n},
            {"m", run.spec.m},
            {"h", run.spec.h},
            {"k_star", run.kstar().k_star},
            {"traces_monotone", run.traces_monotone()},
            {"levels", levels},
            {"solve", to_json(run.kstar().solution->report)},
            {"origin", to_json(run.origin)},
            {"frequency_window", {run.freq_window.first, run.freq_window.second}},
            {"density_exponent", number(run.density_exponent)},
            {"cell_density_exponent", number(run.cell_density_exponent)},
            {"cusp", to_json(run.cusp)},
            {"beta_change", number(run.beta_change)},
            {"properties",
             {{"symmetry_defect", p.symmetry_defect},
              {"max_dz_positive", p.max_dz_positive},
              {"symmetric", p.symmetric},
              {"monotone_in_z", p.monotone_in_z},
              {"slices_are_intervals", p.slices_are_intervals},
              {"pass", p.pass()}}},
            {"three_halves_bound", {{"c_outer", run.three_halves.c_outer}, {"ratio_inner", run.three_halves.ratio_inner}, {"violated", run.three_halves.violated}}},
            {"free_boundary_points", static_cast<std::int64_t>(run.free_boundary.size())}};
}

/// CSV writer: LF line ends, 17 significant digits, a leading comment line carrying the config hash.
class CsvWriter {
public:
    CsvWriter(std::ostream& os, const std::string& config_hash, const std::vector<std::string>& header) : os_(os)
    {
        os_ << "# fbx config " << config_hash << '\n';
        for (std::size_t i = 0; i < header.size(); ++i)
            os_ << (i ? "," : "") << header[i];
        os_ << '\n';
        os_.precision(17);
    }

    template <class... T>
    void row(const T&... v)
    {
        bool first = true;
        ((write(v, first)), ...);
        os_ << '\n';
    }

private:
    void sep(bool& first)
    {
        if (!first)
            os_ << ',';
        first = false;
    }
    void write(double v, bool& first)
    {
        sep(first);
        if (std::isfinite(v))
            os_ << v;
        else
            os_ << "nan";
    }
    void write(const std::string& v, bool& first)
    {
        sep(first);
        os_ << v;
    }
    void write(const char* v, bool& first) { write(std::string(v), first); }
    void write(int v, bool& first)
    {
        sep(first);
        os_ << v;
    }
    void write(long v, bool& first)
    {
        sep(first);
        os_ << v;
    }
    void write(bool v, bool& first)
    {
        sep(first);
        os_ << (v ? 1 : 0);
    }

    std::ostream& os_;
};

inline void write_profile_csv(const RadialProfile& p, std::ostream& os, const std::string& config_hash)
{
    os << "# fbx config " << config_hash << '\n';
    write_profile_csv(p, os);
}

} // namespace fbx
