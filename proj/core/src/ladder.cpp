#include "ladderlab/ladder.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ladderlab/error.hpp"
#include "ladderlab/io.hpp"

namespace ladderlab {

namespace {

std::string fmt(double x)
{
    std::ostringstream os;
    os.precision(17);
    os << x;
    return os.str();
}

double lattice_gap(const StandardStationaryMetric& metric)
{
    // |beta|_h and N for a constant-coefficient torus
    const Vec origin = Vec::Zero(metric.surface_dim());
    const Vec beta = metric.shift(origin);
    return metric.lapse(origin) - std::sqrt(beta.dot(metric.h(origin) * beta));
}

} // namespace

Backend select_backend(const StandardStationaryMetric& metric)
{
    if (metric.is_product()) return Backend::Product;
    if (metric.has_constant_coefficients()) return Backend::ConstantShift;
    require(is_torus(metric.surface()), ErrorKind::Precondition,
            "spheres support constant lapse and zero shift only (product backend)");
    return Backend::Pencil;
}

Backend backend_from_string(std::string_view name)
{
    if (name == "product") return Backend::Product;
    if (name == "constant-shift") return Backend::ConstantShift;
    if (name == "pencil") return Backend::Pencil;
    fail(ErrorKind::Precondition, "unknown backend '" + std::string(name) + "' (product, constant-shift, pencil)");
}

// ---------------------------------------------------------------------------

SliceBuilder::SliceBuilder(const StandardStationaryMetric& metric, SliceBuilderOptions options)
    : metric_(metric), options_(std::move(options)), backend_(options_.backend.value_or(select_backend(metric)))
{
    switch (backend_) {
    case Backend::Product:
        require(metric_.is_product(), ErrorKind::Precondition, "the product backend needs N = 1 and beta = 0");
        break;
    case Backend::ConstantShift:
        require(metric_.has_constant_coefficients(), ErrorKind::Precondition,
                "the constant-shift backend needs constant coefficients on a torus");
        break;
    case Backend::Pencil:
        require(is_torus(metric_.surface()), ErrorKind::Precondition, "the pencil backend needs a torus");
        break;
    case Backend::Synthetic: fail(ErrorKind::Precondition, "the synthetic backend cannot build slices");
    }
}

SliceBuilder::~SliceBuilder() = default;
SliceBuilder::SliceBuilder(SliceBuilder&&) noexcept = default;

nlohmann::json SliceBuilder::cache_key() const
{
    nlohmann::json key = {{"metric", metric_to_json(metric_)}, {"backend", std::string(to_string(backend_))}};
    if (backend_ == Backend::Pencil) {
        key["pencil"] = {{"basis_cutoff", options_.pencil.basis_cutoff},
                         {"real_tol", options_.pencil.real_tol},
                         {"cluster_tol", options_.pencil.cluster_tol},
                         {"sample_resolution", options_.pencil.sample_resolution}};
    }
    return key;
}

void SliceBuilder::attach_cache(std::shared_ptr<SpectrumCache> cache) { cache_ = std::move(cache); }

const SurfaceSpectrum& SliceBuilder::surface_spectrum(double cutoff)
{
    if (!surface_ || surface_->cutoff < cutoff) {
        // grow geometrically so sweeps over m rebuild the lattice only a few times
        const double target = surface_ ? std::max(cutoff, 1.25 * surface_->cutoff) : cutoff;
        const Vec origin = Vec::Zero(metric_.surface_dim());
        if (is_torus(metric_.surface()))
            surface_ = torus_laplace_spectrum(torus_lengths(metric_.surface()), target, options_.budget,
                                              metric_.h_inv(origin));
        else {
            const auto& sphere = std::get<RoundSphere>(metric_.surface());
            surface_ = sphere_laplace_spectrum(sphere.dimension, sphere.radius, target, options_.budget);
        }
    }
    return *surface_;
}

SpectrumSlice SliceBuilder::compute(double m, double abs_lo, double abs_hi)
{
    const double center = 0.5 * (abs_lo + abs_hi);
    const double half = 0.5 * (abs_hi - abs_lo);
    switch (backend_) {
    case Backend::Product: {
        const double omega = std::sqrt(std::max(0.0, abs_hi * abs_hi - m * m));
        const SurfaceSpectrum& surf = surface_spectrum(omega * (1.0 + 1e-12) + 1e-9);
        // Window(nu, w) stores |lambda| in [nu m - w, nu m + w]
        const LambdaPolicy policy = m > 0.0 ? LambdaPolicy::Window(center / m, half) : LambdaPolicy::Window(0.0, abs_hi);
        return product_slice(surf, m, policy);
    }
    case Backend::ConstantShift: {
        const Vec origin = Vec::Zero(metric_.surface_dim());
        const double gap = lattice_gap(metric_);
        const double cutoff = abs_hi / gap + m + 1.0;
        const LambdaPolicy policy = m > 0.0 ? LambdaPolicy::Window(center / m, half) : LambdaPolicy::Window(0.0, abs_hi);
        return constant_shift_torus_spectrum(metric_.lapse(origin), metric_.shift(origin),
                                             torus_lengths(metric_.surface()), m, cutoff, metric_.h(origin), policy,
                                             options_.budget);
    }
    case Backend::Pencil: return pencil_joint_spectrum(metric_, m, options_.pencil);
    case Backend::Synthetic: break;
    }
    fail(ErrorKind::Precondition, "unsupported backend");
}

SpectrumSlice SliceBuilder::build(double m, double abs_lo, double abs_hi)
{
    require(m >= 0.0, ErrorKind::Precondition, "mass must be >= 0");
    abs_lo = std::max(0.0, abs_lo);
    require(abs_hi >= abs_lo, ErrorKind::Precondition, "empty |lambda| range");
    SpectrumSlice slice;
    bool fresh = true;
    if (cache_) {
        if (auto cached = cache_->load(m, abs_lo, abs_hi); cached && cached->covers(abs_lo, abs_hi)) {
            slice = std::move(*cached);
            fresh = false;
        } else if (cached) {
            // widen to the union so the cached file only grows
            abs_lo = std::min(abs_lo, cached->complete_abs_lo);
            abs_hi = std::max(abs_hi, std::isfinite(cached->complete_abs_hi) ? cached->complete_abs_hi : abs_hi);
        }
    }
    if (fresh) {
        slice = compute(m, abs_lo, abs_hi);
        if (cache_) cache_->store(slice);
    }
    if (!slice.covers(abs_lo, abs_hi)) {
        fail(ErrorKind::Incompleteness,
             "spectrum at m = " + fmt(m) + " is complete only for |lambda| in [" + fmt(slice.complete_abs_lo) + ", " +
                 fmt(slice.complete_abs_hi) + "], the request needs [" + fmt(abs_lo) + ", " + fmt(abs_hi) +
                 "]; raise the pencil basis_cutoff");
    }
    slice.count_upper = count_upper(m);
    return slice;
}

SpectrumSlice SliceBuilder::build_window(double m, double nu, double half_width)
{
    return build(m, nu * m - half_width, nu * m + half_width);
}

std::function<double(double)> SliceBuilder::count_upper(double m) const
{
    const Vec origin = Vec::Zero(metric_.surface_dim());
    switch (backend_) {
    case Backend::Product: {
        SurfaceSpectrum small;
        if (is_torus(metric_.surface()))
            small = torus_laplace_spectrum(torus_lengths(metric_.surface()), 1.0, options_.budget, metric_.h_inv(origin));
        else {
            const auto& sphere = std::get<RoundSphere>(metric_.surface());
            small = sphere_laplace_spectrum(sphere.dimension, sphere.radius, 1.0, options_.budget);
        }
        return [count = small.count_upper, m](double L) {
            if (L < m) return 0.0;
            return 2.0 * count(std::sqrt(std::max(0.0, L * L - m * m)));
        };
    }
    case Backend::ConstantShift: {
        const SpectrumSlice tiny = constant_shift_torus_spectrum(metric_.lapse(origin), metric_.shift(origin),
                                                                 torus_lengths(metric_.surface()), m, 1e-3,
                                                                 metric_.h(origin), LambdaPolicy::Full(),
                                                                 options_.budget);
        return tiny.count_upper;
    }
    case Backend::Pencil: {
        const SurfaceSpectrum modes = torus_laplace_spectrum(torus_lengths(metric_.surface()),
                                                             options_.pencil.basis_cutoff, options_.budget,
                                                             metric_.h_inv(origin));
        const double total = 2.0 * modes.count_upper(options_.pencil.basis_cutoff);
        return [total](double) { return total; };
    }
    case Backend::Synthetic: break;
    }
    return {};
}

// ---------------------------------------------------------------------------

VolumeResult liouville_volume(const StandardStationaryMetric& metric, double nu)
{
    if (metric.is_product()) {
        const int d = metric.surface_dim();
        double vol = 0.0;
        if (is_torus(metric.surface())) {
            vol = metric.sqrt_det_h(Vec::Zero(d));
            for (double L : torus_lengths(metric.surface())) vol *= L;
        } else {
            const auto& sphere = std::get<RoundSphere>(metric.surface());
            vol = std::pow(sphere.radius, d) * unit_sphere_area(d + 1);
        }
        VolumeResult out;
        out.method = VolumeMethod::ClosedForm;
        out.value = volume_closed_form_product(vol, nu, metric.n());
        out.error = 4.0 * std::numeric_limits<double>::epsilon() * out.value;
        out.convention = sphere_constant_convention(metric.n());
        return out;
    }
    return volume_quadrature(metric, nu);
}

AdmissibilityReport require_admissible(const StandardStationaryMetric& metric, double nu)
{
    require(nu > 0.0, ErrorKind::Precondition, "nu must be > 0");
    const AdmissibilityReport report = classify_admissibility(metric, nu);
    if (report.verdict == Admissibility::EmptyLadder) {
        fail(ErrorKind::EmptyLadder, "nu = " + fmt(nu) + " lies below the bottom of the mass shell (min sqrt(N^2 - |beta|^2) = " +
                                         fmt(report.bottom_min) + "); the ladder has no eigenvalues near nu m");
    }
    if (report.verdict == Admissibility::CriticalLevel) {
        std::string values;
        for (double c : report.critical_values) values += (values.empty() ? "" : ", ") + fmt(c);
        fail(ErrorKind::Precondition, "nu = " + fmt(nu) + " is a critical level of sqrt(N^2 - |beta|^2) (critical values: " +
                                          values + "); the Weyl expansion is not available there");
    }
    return report;
}

std::string_view to_string(Verdict v)
{
    switch (v) {
    case Verdict::Pass: return "PASS";
    case Verdict::Fail: return "FAIL";
    case Verdict::InconclusiveClustering: return "INCONCLUSIVE-CLUSTERING";
    }
    return "?";
}

namespace {

ClusteringDiagnostic clustering_at(SliceBuilder& builder, const SpectrumSlice& base, const VerifyOptions& o)
{
    const double m = base.m;
    const double center = o.nu * m;
    double width = std::max(o.C, 4.0);
    SpectrumSlice slice = base;
    for (int attempt = 0; attempt < 8; ++attempt) {
        if (builder.backend() != Backend::Pencil) slice = builder.build_window(m, o.nu, width);
        std::vector<double> dist;
        for (const auto& e : slice.eigenvalues)
            if (e.lambda > 0.0) dist.push_back(std::abs(e.lambda - center));
        std::sort(dist.begin(), dist.end());
        const auto need = static_cast<std::size_t>(o.clustering_sample);
        if (builder.backend() == Backend::Pencil || (dist.size() >= need && dist[need - 1] < width)) break;
        width *= 2.0;
    }
    return detect_arithmetic_clustering(slice, o.nu, o.clustering_sample, o.clustering_cv);
}

double rms(const std::vector<double>& v, std::size_t lo, std::size_t hi)
{
    double s = 0.0;
    for (std::size_t i = lo; i < hi; ++i) s += v[i] * v[i];
    return hi > lo ? std::sqrt(s / static_cast<double>(hi - lo)) : 0.0;
}

} // namespace

LadderReport verify_weyl(SliceBuilder& builder, const VerifyOptions& o)
{
    const StandardStationaryMetric& metric = builder.metric();
    require(!o.masses.empty(), ErrorKind::Precondition, "mass grid is empty");
    for (std::size_t i = 1; i < o.masses.size(); ++i)
        require(o.masses[i] > o.masses[i - 1], ErrorKind::Precondition, "mass grid must be strictly increasing");
    require(o.tolerance > 0.0 && o.accuracy > 0.0, ErrorKind::Precondition, "tolerances must be > 0");
    if (o.mode == WeylMode::Smoothed) require(o.psi.has_value(), ErrorKind::Precondition, "smoothed mode needs psi");
    else require(o.C > 0.0, ErrorKind::Precondition, "window C must be > 0");

    require_admissible(metric, o.nu);

    LadderReport r;
    r.n = metric.n();
    r.nu = o.nu;
    r.mode = o.mode;
    r.C = o.C;
    r.backend = builder.backend();
    r.tolerance = o.tolerance;
    r.masses = o.masses;
    r.volume = liouville_volume(metric, o.nu);
    const double mu = r.volume.value;
    const double branch = (o.mode == WeylMode::Sharp && o.include_negative_branch) ? 2.0 : 1.0;
    if (o.mode == WeylMode::Sharp) {
        r.predicted_a0 = branch * weyl_prediction(mu, o.C, 1.0, r.n, WeylMode::Sharp);
    } else {
        r.psi_descriptor = o.psi->describe();
        r.predicted_a0 = weyl_prediction(mu, o.psi->hat0(), 1.0, r.n, WeylMode::Smoothed);
    }


    for (double m : o.masses) {
        require(m >= 1.0, ErrorKind::Precondition, "counting masses must be >= 1");
        SpectrumSlice slice;
        if (o.mode == WeylMode::Sharp) {
            slice = builder.build_window(m, o.nu, o.C);
            CountOptions co;
            co.include_negative_branch = o.include_negative_branch;
            co.include_zero_modes = o.include_zero_modes;
            r.counts.push_back(static_cast<double>(count_sharp(slice, o.nu, o.C, co)));
            r.tail_bounds.push_back(0.0);
        } else {
            SmoothedOptions so;
            so.include_zero_modes = o.include_zero_modes;
            so.accuracy = o.accuracy;
            // smallest window whose tail bound meets the accuracy, widened if stored eigenvalues say otherwise
            double smoothed_width = smoothed_half_width(builder.count_upper(m), o.nu * m, *o.psi, o.accuracy);
            for (int attempt = 0;; ++attempt) {
                slice = builder.build_window(m, o.nu, smoothed_width);
                try {
                    const SmoothedCount c = count_smoothed(slice, o.nu, *o.psi, so);
                    r.counts.push_back(c.value);
                    r.tail_bounds.push_back(c.tail_bound);
                    break;
                } catch (const Error& e) {
                    if (e.kind() != ErrorKind::Accuracy || attempt >= 6 || builder.backend() == Backend::Pencil) throw;
                    smoothed_width *= 1.5;
                }
            }
        }
        r.predictions.push_back(r.predicted_a0 * std::pow(m, r.n - 2));
        r.clustering.push_back(clustering_at(builder, slice, o));
    }

    r.fit = fit_weyl(r.masses, r.counts, r.n, {false, true});
    r.relative_error = std::abs(r.fit.a0 - r.predicted_a0) / std::abs(r.predicted_a0);
    try {
        r.two_term = fit_weyl(r.masses, r.counts, r.n, {true, true});
    } catch (const Error& e) {
        r.notes.push_back(std::string("two-term fit unavailable: ") + e.what());
    }
    {
        // leading coefficient pinned to the prediction, m^{n-3} coefficient fitted
        std::vector<double> y, x;
        for (std::size_t i = 0; i < r.masses.size(); ++i) {
            const double m = r.masses[i];
            y.push_back(r.counts[i] / std::pow(m, r.n - 2) - r.predicted_a0);
            x.push_back(1.0 / m);
        }
        double sxy = 0.0, sxx = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            sxy += x[i] * y[i];
            sxx += x[i] * x[i];
        }
        const double a1 = sxy / sxx;
        r.pinned_residuals.clear();
        for (std::size_t i = 0; i < x.size(); ++i) r.pinned_residuals.push_back((y[i] - a1 * x[i]) / r.predicted_a0);
        const std::size_t half = x.size() / 2;
        const double early = rms(r.pinned_residuals, 0, half), late = rms(r.pinned_residuals, half, x.size());
        r.residual_decay_ratio = early > 0.0 ? late / early : 0.0;
        r.residual_decays = r.residual_decay_ratio < o.decay_ratio;
    }

    std::size_t flagged = 0;
    for (const auto& c : r.clustering) flagged += c.arithmetic ? 1 : 0;
    r.clustered_fraction = static_cast<double>(flagged) / static_cast<double>(r.clustering.size());

    if (r.clustered_fraction >= o.clustering_fraction) {
        r.verdict = Verdict::InconclusiveClustering;
        std::ostringstream os;
        os << "eigenvalues near nu m form arithmetic progressions at " << flagged << " of " << r.clustering.size()
           << " masses (gap coefficient of variation < " << o.clustering_cv
           << "); periodic classical flow, the counting function oscillates at leading order";
        r.notes.push_back(os.str());
        if (!r.residual_decays) r.notes.push_back("two-term fit residual does not decay with m");
    } else {
        r.verdict = r.relative_error <= o.tolerance ? Verdict::Pass : Verdict::Fail;
    }
    for (const auto& w : r.volume.warnings) r.notes.push_back(w);
    return r;
}

// ---------------------------------------------------------------------------

nlohmann::json to_json(const VolumeResult& v)
{
    return {{"value", v.value},
            {"method", std::string(to_string(v.method))},
            {"error", v.error},
            {"std_error", v.std_error},
            {"nodes", v.nodes},
            {"samples", v.samples},
            {"convention", v.convention},
            {"warnings", v.warnings}};
}

nlohmann::json to_json(const LadderReport& r)
{
    nlohmann::json clustering = nlohmann::json::array();
    for (const auto& c : r.clustering)
        clustering.push_back({{"m", c.m}, {"gap_cv", c.gap_cv}, {"mean_gap", c.mean_gap}, {"arithmetic", c.arithmetic},
                              {"eigenvalues", c.eigenvalues}});
    nlohmann::json j = {
        {"n", r.n},
        {"nu", r.nu},
        {"mode", r.mode == WeylMode::Sharp ? "sharp" : "smoothed"},
        {"backend", std::string(to_string(r.backend))},
        {"masses", r.masses},
        {"counts", r.counts},
        {"predictions", r.predictions},
        {"tail_bounds", r.tail_bounds},
        {"volume", to_json(r.volume)},
        {"predicted_a0", r.predicted_a0},
        {"fitted_a0", r.fit.a0},
        {"fitted_a0_stderr", r.fit.a0_stderr},
        {"relative_error", r.relative_error},
        {"two_term", {{"a0", r.two_term.a0}, {"a1", r.two_term.a1}, {"residual_norm", r.two_term.residual_norm},
                      {"relative_residuals", r.two_term.relative_residuals}}},
        {"pinned_residuals", r.pinned_residuals},
        {"residual_decay_ratio", r.residual_decay_ratio},
        {"residual_decays", r.residual_decays},
        {"clustering", clustering},
        {"clustered_fraction", r.clustered_fraction},
        {"verdict", std::string(to_string(r.verdict))},
        {"tolerance", r.tolerance},
        {"notes", r.notes},
    };
    if (r.mode == WeylMode::Sharp)
        j["C"] = r.C;
    else
        j["psi"] = r.psi_descriptor;
    return j;
}

std::string report_csv(const LadderReport& r)
{
    std::string out = "m,count,prediction,relative_error\n";
    for (std::size_t i = 0; i < r.masses.size(); ++i) {
        const double rel = (r.counts[i] - r.predictions[i]) / r.predictions[i];
        out += format_double(r.masses[i]) + ',' + format_double(r.counts[i]) + ',' + format_double(r.predictions[i]) +
               ',' + format_double(rel) + '\n';
    }
    return out;
}

} // namespace ladderlab
