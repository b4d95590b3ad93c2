#include "run_config.hpp"

#include <charconv>
#include <cmath>
#include <numbers>
#include <set>

#include "ladderlab/error.hpp"
#include "ladderlab/geometry.hpp"
#include "ladderlab/io.hpp"

namespace ladderlab::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where)
{
    require(j.is_object(), ErrorKind::Precondition, where + ": expected an object");
    for (const auto& [key, value] : j.items())
        require(known.count(key) > 0, ErrorKind::Precondition, where + ": unknown key \"" + key + "\"");
}

template <class T>
void read(const json& j, const char* key, T& out, const std::string& where)
{
    auto it = j.find(key);
    if (it == j.end()) return;
    try {
        out = it->get<T>();
    } catch (const json::exception& e) {
        fail(ErrorKind::Precondition, where + "." + key + ": " + e.what());
    }
}

double parse_double(std::string_view s, const std::string& what)
{
    double x = 0.0;
    const auto r = std::from_chars(s.data(), s.data() + s.size(), x);
    require(r.ec == std::errc() && r.ptr == s.data() + s.size(), ErrorKind::Precondition,
            "cannot parse " + what + " '" + std::string(s) + "'");
    return x;
}

std::vector<double> masses_from_json(const json& j)
{
    if (j.is_array()) {
        try {
            return j.get<std::vector<double>>();
        } catch (const json::exception& e) {
            fail(ErrorKind::Precondition, std::string("masses: ") + e.what());
        }
    }
    reject_unknown(j, {"start", "stop", "step"}, "masses");
    double start = 0, stop = 0, step = 0;
    read(j, "start", start, "masses");
    read(j, "stop", stop, "masses");
    read(j, "step", step, "masses");
    require(step > 0.0, ErrorKind::Precondition, "masses.step must be > 0");
    require(stop >= start, ErrorKind::Precondition, "masses.stop must be >= masses.start");
    std::vector<double> out;
    const auto count = static_cast<std::int64_t>(std::floor((stop - start) / step + 1e-9));
    for (std::int64_t k = 0; k <= count; ++k) out.push_back(start + static_cast<double>(k) * step);
    return out;
}

} // namespace

WeylMode RunConfig::weyl_mode() const { return mode == "smoothed" ? WeylMode::Smoothed : WeylMode::Sharp; }

TestFunction RunConfig::test_function() const
{
    if (psi.profile == "autocorrelation") return TestFunction::bump_autocorrelation(psi.hat_radius, psi.hat0);
    return TestFunction::bump(psi.hat_radius, psi.hat0);
}

Integrator RunConfig::integrator() const
{
    if (flow.integrator == "midpoint") return Integrator::ImplicitMidpoint;
    if (flow.integrator == "composition4") return Integrator::Composition4;
    if (flow.integrator == "composition6") return Integrator::Composition6;
    if (flow.integrator == "dopri5") return Integrator::DormandPrince;
    fail(ErrorKind::Precondition, "unknown integrator '" + flow.integrator +
                                      "' (midpoint, composition4, composition6, dopri5)");
}

json default_metric_json()
{
    const double L = 2.0 * std::numbers::pi;
    return {{"n", 3},
            {"surface", {{"kind", "flat_torus"}, {"lengths", {L, L}}, {"resolution", {64, 64}}}},
            {"lapse", {{"kind", "constant"}, {"value", 1.0}}}};
}

RunConfig default_config()
{
    RunConfig c;
    c.metric = metric_to_json(metric_from_json(default_metric_json()));
    c.nu = {std::numbers::sqrt2};
    c.masses = masses_from_json(json{{"start", 50}, {"stop", 200}, {"step", 10}});
    c.eps = {0.1, 0.05, 0.02};
    return c;
}

RunConfig config_from_json(const json& j, const fs::path& base_dir)
{
    const std::string w = "config";
    reject_unknown(j, {"schema", "metric", "metric_file", "backend", "pencil", "nu", "mode", "window", "psi",
                       "masses", "m_max", "s_grid", "eps", "seed", "tolerances", "volume", "flow", "periods",
                       "include_negative_branch", "include_zero_modes", "cache_dir", "out_dir", "format"},
                   w);
    std::string schema;
    read(j, "schema", schema, w);
    require(schema == kConfigSchema, ErrorKind::Precondition,
            "config.schema must be \"" + std::string(kConfigSchema) + "\" (got \"" + schema + "\")");

    RunConfig c = default_config();
    require(!(j.contains("metric") && j.contains("metric_file")), ErrorKind::Precondition,
            "config: give either \"metric\" or \"metric_file\", not both");
    json metric = default_metric_json();
    if (j.contains("metric")) metric = j["metric"];
    if (j.contains("metric_file")) {
        fs::path p = j["metric_file"].get<std::string>();
        if (p.is_relative()) p = base_dir / p;
        try {
            metric = json::parse(read_file(p));
        } catch (const json::exception& e) {
            fail(ErrorKind::Precondition, "metric file " + p.string() + ": " + e.what());
        }
    }
    c.metric = metric_to_json(metric_from_json(metric));

    read(j, "backend", c.backend, w);
    if (j.contains("pencil")) {
        const json& p = j["pencil"];
        reject_unknown(p, {"basis_cutoff", "real_tol", "cluster_tol", "sample_resolution"}, "pencil");
        read(p, "basis_cutoff", c.pencil.basis_cutoff, "pencil");
        read(p, "real_tol", c.pencil.real_tol, "pencil");
        read(p, "cluster_tol", c.pencil.cluster_tol, "pencil");
        read(p, "sample_resolution", c.pencil.sample_resolution, "pencil");
    }
    read(j, "nu", c.nu, w);
    read(j, "mode", c.mode, w);
    read(j, "window", c.window, w);
    if (j.contains("psi")) {
        const json& p = j["psi"];
        reject_unknown(p, {"profile", "hat_radius", "hat0"}, "psi");
        read(p, "profile", c.psi.profile, "psi");
        read(p, "hat_radius", c.psi.hat_radius, "psi");
        read(p, "hat0", c.psi.hat0, "psi");
    }
    if (j.contains("masses")) c.masses = masses_from_json(j["masses"]);
    read(j, "m_max", c.m_max, w);
    read(j, "s_grid", c.s_grid, w);
    read(j, "eps", c.eps, w);
    read(j, "seed", c.seed, w);
    if (j.contains("tolerances")) {
        const json& t = j["tolerances"];
        reject_unknown(t, {"weyl", "accuracy", "orbit", "shell_cap", "clustering_cv"}, "tolerances");
        read(t, "weyl", c.tolerances.weyl, "tolerances");
        read(t, "accuracy", c.tolerances.accuracy, "tolerances");
        read(t, "orbit", c.tolerances.orbit, "tolerances");
        read(t, "shell_cap", c.tolerances.shell_cap, "tolerances");
        read(t, "clustering_cv", c.tolerances.clustering_cv, "tolerances");
    }
    if (j.contains("volume")) {
        const json& v = j["volume"];
        reject_unknown(v, {"samples", "line_samples", "gl_nodes"}, "volume");
        read(v, "samples", c.volume.samples, "volume");
        read(v, "line_samples", c.volume.line_samples, "volume");
        read(v, "gl_nodes", c.volume.gl_nodes, "volume");
    }
    if (j.contains("flow")) {
        const json& f = j["flow"];
        reject_unknown(f, {"x", "direction", "duration", "step", "integrator", "record_every"}, "flow");
        read(f, "x", c.flow.x, "flow");
        read(f, "direction", c.flow.direction, "flow");
        read(f, "duration", c.flow.duration, "flow");
        read(f, "step", c.flow.step, "flow");
        read(f, "integrator", c.flow.integrator, "flow");
        read(f, "record_every", c.flow.record_every, "flow");
    }
    if (j.contains("periods")) {
        const json& p = j["periods"];
        reject_unknown(p, {"bound", "budget", "max_time"}, "periods");
        read(p, "bound", c.periods.bound, "periods");
        read(p, "budget", c.periods.budget, "periods");
        read(p, "max_time", c.periods.max_time, "periods");
    }
    read(j, "include_negative_branch", c.include_negative_branch, w);
    read(j, "include_zero_modes", c.include_zero_modes, w);
    read(j, "cache_dir", c.cache_dir, w);
    read(j, "out_dir", c.out_dir, w);
    read(j, "format", c.format, w);
    validate(c);
    return c;
}

RunConfig load_config(const fs::path& path)
{
    json j;
    try {
        j = json::parse(read_file(path));
    } catch (const json::exception& e) {
        fail(ErrorKind::Precondition, "config " + path.string() + ": " + e.what());
    } catch (const Error& e) {
        fail(ErrorKind::Precondition, "config " + path.string() + " cannot be read");
    }
    return config_from_json(j, path.parent_path());
}

json to_json(const RunConfig& c)
{
    return {
        {"schema", kConfigSchema},
        {"metric", c.metric},
        {"backend", c.backend},
        {"pencil",
         {{"basis_cutoff", c.pencil.basis_cutoff},
          {"real_tol", c.pencil.real_tol},
          {"cluster_tol", c.pencil.cluster_tol},
          {"sample_resolution", c.pencil.sample_resolution}}},
        {"nu", c.nu},
        {"mode", c.mode},
        {"window", c.window},
        {"psi", {{"profile", c.psi.profile}, {"hat_radius", c.psi.hat_radius}, {"hat0", c.psi.hat0}}},
        {"masses", c.masses},
        {"m_max", c.m_max},
        {"s_grid", c.s_grid},
        {"eps", c.eps},
        {"seed", c.seed},
        {"tolerances",
         {{"weyl", c.tolerances.weyl},
          {"accuracy", c.tolerances.accuracy},
          {"orbit", c.tolerances.orbit},
          {"shell_cap", c.tolerances.shell_cap},
          {"clustering_cv", c.tolerances.clustering_cv}}},
        {"volume",
         {{"samples", c.volume.samples}, {"line_samples", c.volume.line_samples}, {"gl_nodes", c.volume.gl_nodes}}},
        {"flow",
         {{"x", c.flow.x},
          {"direction", c.flow.direction},
          {"duration", c.flow.duration},
          {"step", c.flow.step},
          {"integrator", c.flow.integrator},
          {"record_every", c.flow.record_every}}},
        {"periods", {{"bound", c.periods.bound}, {"budget", c.periods.budget}, {"max_time", c.periods.max_time}}},
        {"include_negative_branch", c.include_negative_branch},
        {"include_zero_modes", c.include_zero_modes},
        {"cache_dir", c.cache_dir},
        {"out_dir", c.out_dir},
        {"format", c.format},
    };
}

void validate(const RunConfig& c)
{
    auto positive = [](double x, const std::string& name) {
        require(std::isfinite(x) && x > 0.0, ErrorKind::Precondition, name + " must be > 0");
    };
    positive(c.tolerances.weyl, "tolerances.weyl");
    positive(c.tolerances.accuracy, "tolerances.accuracy");
    positive(c.tolerances.orbit, "tolerances.orbit");
    positive(c.tolerances.shell_cap, "tolerances.shell_cap");
    positive(c.tolerances.clustering_cv, "tolerances.clustering_cv");
    positive(c.pencil.basis_cutoff, "pencil.basis_cutoff");
    positive(c.pencil.real_tol, "pencil.real_tol");
    positive(c.pencil.cluster_tol, "pencil.cluster_tol");
    positive(c.window, "window");
    positive(c.psi.hat_radius, "psi.hat_radius");
    positive(c.flow.step, "flow.step");
    positive(c.periods.max_time, "periods.max_time");
    require(!c.nu.empty(), ErrorKind::Precondition, "at least one nu is required");
    for (double nu : c.nu) positive(nu, "nu");
    for (double e : c.eps) positive(e, "eps");
    require(!c.masses.empty(), ErrorKind::Precondition, "the mass grid is empty");
    for (std::size_t i = 0; i < c.masses.size(); ++i) {
        require(std::isfinite(c.masses[i]) && c.masses[i] >= 0.0, ErrorKind::Precondition, "masses must be >= 0");
        if (i) require(c.masses[i] > c.masses[i - 1], ErrorKind::Precondition, "the mass grid must be strictly increasing");
    }
    require(c.m_max >= 0, ErrorKind::Precondition, "m_max must be >= 0");
    require(c.s_grid >= 8, ErrorKind::Precondition, "s_grid must be >= 8");
    require(c.volume.samples > 0 && c.volume.line_samples > 1 && c.volume.gl_nodes > 0, ErrorKind::Precondition,
            "volume sample counts must be positive");
    require(c.flow.record_every >= 1, ErrorKind::Precondition, "flow.record_every must be >= 1");
    require(c.periods.bound >= 0 && c.periods.budget >= 0, ErrorKind::Precondition,
            "periods.bound and periods.budget must be >= 0");
    require(c.mode == "sharp" || c.mode == "smoothed", ErrorKind::Precondition,
            "mode must be sharp or smoothed (got '" + c.mode + "')");
    require(c.psi.profile == "bump" || c.psi.profile == "autocorrelation", ErrorKind::Precondition,
            "psi.profile must be bump or autocorrelation");
    require(c.format == "csv" || c.format == "json", ErrorKind::Precondition, "format must be csv or json");
    require(c.backend == "auto" || c.backend == "product" || c.backend == "constant-shift" || c.backend == "pencil",
            ErrorKind::Precondition, "backend must be auto, product, constant-shift or pencil");
    (void)c.integrator();
}

std::string canonical_bytes(const RunConfig& c) { return canonical_json(to_json(c)); }

std::string config_hash(const RunConfig& c) { return sha256_hex(canonical_bytes(c)); }

std::vector<double> parse_mass_range(const std::string& text)
{
    const auto a = text.find(':');
    const auto b = text.find(':', a == std::string::npos ? a : a + 1);
    require(a != std::string::npos && b != std::string::npos, ErrorKind::Precondition,
            "mass range must look like A:B:STEP (got '" + text + "')");
    const std::string_view s(text);
    const double start = parse_double(s.substr(0, a), "mass range start");
    const double stop = parse_double(s.substr(a + 1, b - a - 1), "mass range stop");
    const double step = parse_double(s.substr(b + 1), "mass range step");
    return masses_from_json(json{{"start", start}, {"stop", stop}, {"step", step}});
}

std::vector<double> parse_list(const std::string& text)
{
    std::vector<double> out;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto comma = text.find(',', pos);
        const auto end = comma == std::string::npos ? text.size() : comma;
        out.push_back(parse_double(std::string_view(text).substr(pos, end - pos), "list entry"));
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    return out;
}

} // namespace ladderlab::cli
