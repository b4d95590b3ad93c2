#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <memory>
#include <ostream>

#include "ladderlab/counting.hpp"
#include "ladderlab/dynamics.hpp"
#include "ladderlab/error.hpp"
#include "ladderlab/geometry.hpp"
#include "ladderlab/io.hpp"
#include "ladderlab/ladder.hpp"
#include "ladderlab/liouville.hpp"

namespace ladderlab::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string fd(double x) { return format_double(x); }

struct Session {
    const RunConfig& config;
    StandardStationaryMetric metric;
    std::optional<SliceBuilder> builder;
    std::shared_ptr<SpectrumCache> cache;
    fs::path out_dir;
    std::ostream& log;

    Session(const RunConfig& c, std::ostream& l, bool spectra)
        : config(c), metric(metric_from_json(c.metric)), out_dir(c.out_dir), log(l)
    {
        if (spectra) {
            SliceBuilderOptions options;
            if (c.backend != "auto") options.backend = backend_from_string(c.backend);
            options.pencil = c.pencil;
            builder.emplace(metric, options);
            if (!c.cache_dir.empty()) {
                cache = std::make_shared<SpectrumCache>(fs::path(c.cache_dir), builder->cache_key());
                builder->attach_cache(cache);
            }
        }
        // locations do not change results, so they stay out of the recorded config
        json recorded = to_json(c);
        recorded.erase("out_dir");
        recorded.erase("cache_dir");
        write_json("run_config.json", recorded);
    }

    void write(const std::string& name, const std::string& bytes) const { write_file_atomic(out_dir / name, bytes); }
    void write_json(const std::string& name, const json& j) const { write(name, canonical_json(j, 2) + "\n"); }

    /// File-name suffix distinguishing several nu values.
    std::string tag(std::size_t k) const { return config.nu.size() > 1 ? "_nu" + std::to_string(k) : ""; }

    void log_cache() const
    {
        if (cache)
            log << "cache " << cache->directory().string() << ": " << cache->hits() << " hits, " << cache->misses()
                << " misses\n";
    }
};

/// Smoothed count at one mass, widening the stored window until the tail
/// bound meets the requested accuracy.
SmoothedCount smoothed_count(SliceBuilder& builder, double m, double nu, const TestFunction& psi,
                             const SmoothedOptions& options)
{
    double width = smoothed_half_width(builder.count_upper(m), nu * m, psi, options.accuracy);
    for (int attempt = 0;; ++attempt) {
        const SpectrumSlice slice = builder.build_window(m, nu, width);
        try {
            return count_smoothed(slice, nu, psi, options);
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::Accuracy || attempt >= 6 || builder.backend() == Backend::Pencil) throw;
            width *= 1.5;
        }
    }
}

SmoothedOptions smoothed_options(const RunConfig& c)
{
    SmoothedOptions so;
    so.include_zero_modes = c.include_zero_modes;
    so.positive_branch_only = false;
    so.accuracy = c.tolerances.accuracy;
    return so;
}

std::optional<double> try_volume(const StandardStationaryMetric& metric, double nu, std::ostream& log)
{
    try {
        require_admissible(metric, nu);
        return liouville_volume(metric, nu).value;
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::EmptyLadder && e.kind() != ErrorKind::Precondition) throw;
        log << "warning: no Weyl prediction at nu = " << fd(nu) << ": " << e.what() << "\n";
        return std::nullopt;
    }
}

/// Closed form on product metrics and constant-coefficient tori, numeric
/// shooting otherwise. `reach` is the largest |period| of interest.
PeriodSet period_set_for(const StandardStationaryMetric& metric, double nu, const RunConfig& c, double reach)
{
    const bool closed = metric.is_product() || metric.has_constant_coefficients();
    if (closed) {
        int bound = c.periods.bound;
        if (bound == 0) {
            const PeriodSet unit = period_set_closed_form(metric, nu, 1);
            double shortest = std::numeric_limits<double>::infinity();
            for (const auto& e : unit.entries)
                if (e.period > 0.0) shortest = std::min(shortest, e.period);
            bound = std::isfinite(shortest) ? std::max(1, static_cast<int>(std::ceil(reach / shortest))) : 1;
        }
        return period_set_closed_form(metric, nu, bound);
    }
    NumericPeriodOptions o;
    o.max_winding = c.periods.bound > 0 ? c.periods.bound : 2;
    o.max_time = std::max(c.periods.max_time, reach);
    o.orbit_tol = c.tolerances.orbit;
    o.seed = c.seed;
    return period_set_numeric(metric, nu, c.periods.budget, o);
}

json period_set_json(const PeriodSet& set)
{
    json entries = json::array();
    for (const auto& e : set.entries)
        entries.push_back({{"period", e.period},
                           {"affine", e.affine},
                           {"action", e.action},
                           {"winding", e.winding},
                           {"descriptor", e.descriptor},
                           {"residual", e.residual}});
    return {{"method", std::string(to_string(set.method))},
            {"periodic_flow", set.periodic_flow},
            {"entries", entries}};
}

} // namespace

// ---------------------------------------------------------------------------

int cmd_spectrum(const RunConfig& c, std::ostream& out, std::ostream& log)
{
    Session session(c, log, true);
    SliceBuilder& builder = *session.builder;
    const double nu_lo = *std::min_element(c.nu.begin(), c.nu.end());
    const double nu_hi = *std::max_element(c.nu.begin(), c.nu.end());
    const std::optional<TestFunction> psi =
        c.weyl_mode() == WeylMode::Smoothed ? std::optional(c.test_function()) : std::nullopt;

    std::string csv = "m,stored,complete_abs_lo,complete_abs_hi,has_zero_mode,max_imag\n";
    json rows = json::array();
    out << "backend " << to_string(builder.backend()) << "\n";
    for (double m : c.masses) {
        double width = c.window;
        if (psi) width = smoothed_half_width(builder.count_upper(m), nu_hi * m, *psi, c.tolerances.accuracy);
        const std::size_t hits = session.cache ? session.cache->hits() : 0;
        const SpectrumSlice slice = builder.build(m, nu_lo * m - width, nu_hi * m + width);
        if (session.cache)
            log << (session.cache->hits() > hits ? "cache hit" : "computed") << " m = " << fd(m) << "\n";
        std::int64_t stored = 0;
        for (const auto& e : slice.eigenvalues) stored += e.multiplicity;
        out << "m = " << fd(m) << ": complete for |lambda| in [" << fd(slice.complete_abs_lo) << ", "
            << fd(slice.complete_abs_hi) << "], " << stored << " eigenvalues stored\n";
        csv += fd(m) + ',' + std::to_string(stored) + ',' + fd(slice.complete_abs_lo) + ',' +
               fd(slice.complete_abs_hi) + ',' + (slice.has_zero_mode ? "1" : "0") + ',' + fd(slice.max_imag) + '\n';
        rows.push_back({{"m", m},
                        {"stored", stored},
                        {"complete_abs_lo", slice.complete_abs_lo},
                        {"complete_abs_hi", std::isfinite(slice.complete_abs_hi) ? json(slice.complete_abs_hi)
                                                                                 : json("inf")},
                        {"has_zero_mode", slice.has_zero_mode},
                        {"max_imag", slice.max_imag}});
    }
    if (c.format == "csv")
        session.write("spectrum_summary.csv", csv);
    else
        session.write_json("spectrum_summary.json",
                           {{"backend", std::string(to_string(builder.backend()))}, {"slices", rows}});
    session.log_cache();
    return 0;
}

int cmd_count(const RunConfig& c, std::ostream& out, std::ostream& log)
{
    Session session(c, log, true);
    SliceBuilder& builder = *session.builder;
    const WeylMode mode = c.weyl_mode();
    const int n = session.metric.n();

    std::string csv = "nu,m,count,prediction,relative_error,tail_bound\n";
    json rows = json::array();
    for (double nu : c.nu) {
        const std::optional<double> mu = try_volume(session.metric, nu, log);
        double a0 = kNaN;
        std::optional<TestFunction> psi;
        if (mode == WeylMode::Sharp) {
            if (mu) a0 = (c.include_negative_branch ? 2.0 : 1.0) * weyl_prediction(*mu, c.window, 1.0, n, mode);
        } else {
            psi = c.test_function();
            if (mu) a0 = weyl_prediction(*mu, psi->hat0(), 1.0, n, mode);
        }
        for (double m : c.masses) {
            double count = 0.0, tail = 0.0;
            if (mode == WeylMode::Sharp) {
                CountOptions co;
                co.include_negative_branch = c.include_negative_branch;
                co.include_zero_modes = c.include_zero_modes;
                count = static_cast<double>(count_sharp(builder.build_window(m, nu, c.window), nu, c.window, co));
            } else {
                const SmoothedCount sc = smoothed_count(builder, m, nu, *psi, smoothed_options(c));
                count = sc.value;
                tail = sc.tail_bound;
            }
            const double prediction = a0 * std::pow(m, n - 2);
            const double rel = (count - prediction) / prediction;
            csv += fd(nu) + ',' + fd(m) + ',' + fd(count) + ',' + fd(prediction) + ',' + fd(rel) + ',' + fd(tail) + '\n';
            rows.push_back({{"nu", nu},
                            {"m", m},
                            {"count", count},
                            {"prediction", prediction},
                            {"relative_error", rel},
                            {"tail_bound", tail}});
            out << "nu = " << fd(nu) << " m = " << fd(m) << ": " << fd(count);
            if (std::isfinite(prediction)) out << " (prediction " << fd(prediction) << ")";
            out << "\n";
        }
    }
    if (c.format == "csv")
        session.write("counts.csv", csv);
    else
        session.write_json("counts.json", {{"mode", c.mode}, {"rows", rows}});
    session.log_cache();
    return 0;
}

int cmd_upsilon(const RunConfig& c, std::ostream& out, std::ostream& log)
{
    Session session(c, log, true);
    SliceBuilder& builder = *session.builder;
    const TestFunction psi = c.test_function();
    const std::vector<double> grid = periodic_grid(c.s_grid);
    const double cell = 2.0 * std::numbers::pi / c.s_grid;
    std::vector<double> eps = c.eps;
    require(!eps.empty(), ErrorKind::Precondition, "the eps sweep is empty");
    std::sort(eps.begin(), eps.end(), std::greater<>());

    json peaks_report = json::array();
    for (std::size_t k = 0; k < c.nu.size(); ++k) {
        const double nu = c.nu[k];
        JointSpectrum spectrum;
        spectrum.n = session.metric.n();
        spectrum.backend = builder.backend();
        for (int m = 0; m <= c.m_max; ++m) {
            const double width = smoothed_half_width(builder.count_upper(m), nu * m, psi, c.tolerances.accuracy);
            spectrum.slices.push_back(builder.build_window(m, nu, width));
        }
        double m0 = 0.0, tail = 0.0;
        std::vector<std::vector<double>> moduli;
        json per_eps = json::array();
        json series_json = json::array();
        for (double e : eps) {
            const UpsilonSeries series = upsilon1(spectrum, nu, psi, grid, c.m_max, e, smoothed_options(c));
            m0 = series.m0_contribution;
            tail = series.tail_bound;
            std::vector<double> modulus;
            std::string csv = "s,re,im,modulus\n";
            json values = json::array();
            for (std::size_t i = 0; i < grid.size(); ++i) {
                const auto v = series.values[i];
                modulus.push_back(std::abs(v));
                csv += fd(grid[i]) + ',' + fd(v.real()) + ',' + fd(v.imag()) + ',' + fd(modulus.back()) + '\n';
                if (c.format == "json") values.push_back({grid[i], v.real(), v.imag(), modulus.back()});
            }
            if (c.format == "csv")
                session.write("upsilon" + session.tag(k) + "_eps" + fd(e) + ".csv", csv);
            else
                series_json.push_back({{"eps", e}, {"columns", {"s", "re", "im", "modulus"}}, {"values", values}});
            json detected = json::array();
            for (std::size_t i : detect_peaks(modulus)) detected.push_back(grid[i]);
            per_eps.push_back({{"eps", e}, {"peaks", detected}});
            moduli.push_back(std::move(modulus));
        }
        if (c.format == "json")
            session.write_json("upsilon" + session.tag(k) + ".json",
                               {{"nu", nu}, {"psi", psi.describe()}, {"m0_contribution", m0},
                                {"tail_bound", tail}, {"series", series_json}});

        const double reach = psi.hat_support_radius();
        const PeriodSet periods = period_set_for(session.metric, nu, c, reach);
        const std::vector<double> predicted = singular_support_predict(periods.periods(), nu, reach);
        const std::vector<double> lifted = singular_support_predict_lifted(periods.lifted(), nu, reach);
        auto nearest_cells = [&](double s, const std::vector<double>& set) {
            double best = std::numeric_limits<double>::infinity();
            for (double p : set) best = std::min(best, circular_distance(s, p));
            return best / cell;
        };
        json persistent = json::array();
        bool all_match = true;
        // a peak of width eps may drift by O(eps) as eps shrinks
        const int match_cells = std::max(2, static_cast<int>(std::ceil(0.5 * eps.front() / cell)));
        for (std::size_t i : persistent_peaks(moduli, 3.0, match_cells)) {
            const double s = grid[i];
            const double d = nearest_cells(s, predicted);
            all_match = all_match && d <= 1.0;
            persistent.push_back({{"s", s},
                                  {"modulus", moduli.back()[i]},
                                  {"cells_to_prediction", d},
                                  {"cells_to_lifted_prediction", nearest_cells(s, lifted)}});
        }
        peaks_report.push_back({{"nu", nu},
                                {"psi", psi.describe()},
                                {"m_max", c.m_max},
                                {"grid_cell", cell},
                                {"m0_contribution", m0},
                                {"tail_bound", tail},
                                {"per_eps", per_eps},
                                {"persistent_peaks", persistent},
                                {"predicted", predicted},
                                {"predicted_lifted", lifted},
                                {"period_method", std::string(to_string(periods.method))},
                                {"all_peaks_within_one_cell", all_match}});
        out << "nu = " << fd(nu) << ": " << persistent.size() << " persistent peaks, " << predicted.size()
            << " predicted points; every peak within one cell: " << (all_match ? "yes" : "no") << "\n";
        for (const auto& p : persistent)
            out << "  peak s = " << fd(p["s"].get<double>()) << " (" << fd(p["cells_to_prediction"].get<double>())
                << " cells from the prediction)\n";
    }
    session.write_json("upsilon_peaks.json", peaks_report);
    session.log_cache();
    return 0;
}

int cmd_volume(const RunConfig& c, std::ostream& out, std::ostream& log)
{
    Session session(c, log, false);
    const StandardStationaryMetric& metric = session.metric;
    std::string csv = "nu,method,value,error,std_error,nodes,samples\n";
    json rows = json::array();
    out << std::left << std::setw(22) << "nu" << std::setw(13) << "method" << "value +- error\n";
    for (double nu : c.nu) {
        std::vector<VolumeResult> results;
        if (metric.is_product()) results.push_back(liouville_volume(metric, nu));
        QuadratureOptions qo;
        qo.line_samples = c.volume.line_samples;
        qo.gl_nodes = c.volume.gl_nodes;
        results.push_back(volume_quadrature(metric, nu, qo));
        MonteCarloOptions mo;
        mo.samples = c.volume.samples;
        mo.seed = c.seed;
        results.push_back(volume_montecarlo(metric, nu, mo));
        json entry = {{"nu", nu}};
        for (const auto& r : results) {
            const std::string method(to_string(r.method));
            csv += fd(nu) + ',' + method + ',' + fd(r.value) + ',' + fd(r.error) + ',' + fd(r.std_error) + ',' +
                   std::to_string(r.nodes) + ',' + std::to_string(r.samples) + '\n';
            entry[method] = to_json(r);
            out << std::setw(22) << fd(nu) << std::setw(13) << method << fd(r.value) << " +- " << fd(r.error) << "\n";
            for (const auto& w : r.warnings) log << "warning (" << method << "): " << w << "\n";
        }
        rows.push_back(entry);
    }
    if (c.format == "csv")
        session.write("volume.csv", csv);
    else
        session.write_json("volume.json", rows);
    return 0;
}

int cmd_flow(const RunConfig& c, std::ostream& out, std::ostream& log)
{
    Session session(c, log, false);
    const StandardStationaryMetric& metric = session.metric;
    const int d = metric.surface_dim();
    Vec x = Vec::Zero(d), direction = Vec::Zero(d);
    direction(0) = 1.0;
    if (!c.flow.x.empty()) {
        require(static_cast<int>(c.flow.x.size()) == d, ErrorKind::Precondition, "flow.x has the wrong dimension");
        x = Eigen::Map<const Vec>(c.flow.x.data(), d);
    }
    if (!c.flow.direction.empty()) {
        require(static_cast<int>(c.flow.direction.size()) == d, ErrorKind::Precondition,
                "flow.direction has the wrong dimension");
        direction = Eigen::Map<const Vec>(c.flow.direction.data(), d);
    }
    FlowOptions options;
    options.step = c.flow.step;
    options.integrator = c.integrator();
    options.record_every = c.flow.record_every;
    options.shell_cap = c.tolerances.shell_cap;

    json summary = json::array();
    for (std::size_t k = 0; k < c.nu.size(); ++k) {
        const double nu = c.nu[k];
        const PhaseState start = state_on_level(metric, x, direction, nu);
        const Trajectory traj = flow(metric, start, c.flow.duration, options);

        std::string header = "s,t";
        for (int i = 0; i < d; ++i) header += ",x" + std::to_string(i + 1);
        for (int i = 0; i < d; ++i) header += ",xi" + std::to_string(i + 1);
        std::string csv = header + ",tau,shell_residual\n";
        double lorentz = 0.0;
        for (const auto& sample : traj.samples) {
            const PhaseState& st = sample.state;
            csv += fd(sample.s) + ',' + fd(st.t);
            for (int i = 0; i < d; ++i) csv += ',' + fd(st.x(i));
            for (int i = 0; i < d; ++i) csv += ',' + fd(st.xi(i));
            csv += ',' + fd(st.tau) + ',' + fd(sample.shell_residual) + '\n';
            const LorentzDiagnostics ld = lorentz_diagnostics(metric, st);
            lorentz = std::max(lorentz, std::abs(ld.roundtrip - ld.nu) / ld.nu);
        }
        session.write("trajectory" + session.tag(k) + ".csv", csv);

        const PhaseState end = traj.samples.back().state;
        const PhaseState back = flow_to(metric, end, -c.flow.duration, options);
        double reversal = (back.x - start.x).norm() + (back.xi - start.xi).norm() + std::abs(back.t - start.t);
        summary.push_back({{"nu", nu},
                           {"integrator", std::string(to_string(options.integrator))},
                           {"step", options.step},
                           {"duration", c.flow.duration},
                           {"steps", traj.steps},
                           {"samples", traj.samples.size()},
                           {"shell_drift", traj.shell_drift},
                           {"tau_drift", traj.tau_drift},
                           {"reversal_error", reversal},
                           {"lorentz_roundtrip_error", lorentz}});
        out << "nu = " << fd(nu) << ": shell drift " << fd(traj.shell_drift) << ", tau drift " << fd(traj.tau_drift)
            << ", reversal error " << fd(reversal) << ", Lorentz round trip " << fd(lorentz) << "\n";
    }
    session.write_json("flow_summary.json", summary);
    return 0;
}

int cmd_periods(const RunConfig& c, std::ostream& out, std::ostream& log)
{
    Session session(c, log, false);
    json report = json::array();
    for (double nu : c.nu) {
        const PeriodSet set = period_set_for(session.metric, nu, c, c.psi.hat_radius);
        json entry = period_set_json(set);
        entry["nu"] = nu;
        report.push_back(entry);
        out << "nu = " << fd(nu) << ": " << set.entries.size() << " periods (" << to_string(set.method) << ")\n";
        for (const auto& e : set.entries)
            if (e.period > 0.0)
                out << "  s' = " << fd(e.period) << "  affine " << fd(e.affine) << "  " << e.descriptor << "\n";
    }
    session.write_json("periods.json", report);
    return 0;
}

int cmd_admissible(const RunConfig& c, std::ostream& out, std::ostream& log)
{
    Session session(c, log, false);
    std::string csv = "nu,verdict,bottom_min,bottom_max,critical_values\n";
    json rows = json::array();
    for (double nu : c.nu) {
        const AdmissibilityReport r = classify_admissibility(session.metric, nu);
        std::string crit;
        for (double v : r.critical_values) crit += (crit.empty() ? "" : ";") + fd(v);
        csv += fd(nu) + ',' + std::string(to_string(r.verdict)) + ',' + fd(r.bottom_min) + ',' + fd(r.bottom_max) +
               ',' + crit + '\n';
        rows.push_back({{"nu", nu},
                        {"verdict", std::string(to_string(r.verdict))},
                        {"bottom_min", r.bottom_min},
                        {"bottom_max", r.bottom_max},
                        {"critical_values", r.critical_values}});
        out << "nu = " << fd(nu) << ": " << to_string(r.verdict) << "\n";
    }
    if (c.format == "csv")
        session.write("admissibility.csv", csv);
    else
        session.write_json("admissibility.json", rows);
    return 0;
}

int cmd_verify_weyl(const RunConfig& c, std::ostream& out, std::ostream& log)
{
    Session session(c, log, true);
    for (std::size_t k = 0; k < c.nu.size(); ++k) {
        VerifyOptions o;
        o.nu = c.nu[k];
        o.mode = c.weyl_mode();
        o.C = c.window;
        if (o.mode == WeylMode::Smoothed) o.psi = c.test_function();
        o.masses = c.masses;
        o.include_negative_branch = c.include_negative_branch;
        o.include_zero_modes = c.include_zero_modes;
        o.tolerance = c.tolerances.weyl;
        o.accuracy = c.tolerances.accuracy;
        o.clustering_cv = c.tolerances.clustering_cv;
        const LadderReport r = verify_weyl(*session.builder, o);
        session.write_json("weyl_report" + session.tag(k) + ".json", to_json(r));
        session.write("weyl_counts" + session.tag(k) + ".csv", report_csv(r));
        out << "nu = " << fd(r.nu) << ": fitted a0 " << fd(r.fit.a0) << ", predicted " << fd(r.predicted_a0)
            << ", relative error " << fd(r.relative_error) << ", verdict " << to_string(r.verdict) << "\n";
        for (const auto& note : r.notes) out << "  note: " << note << "\n";
    }
    session.log_cache();
    return 0;
}

} // namespace ladderlab::cli
