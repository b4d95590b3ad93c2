#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ladderlab/counting.hpp"
#include "ladderlab/geometry.hpp"
#include "ladderlab/liouville.hpp"
#include "ladderlab/spectra.hpp"
#include "ladderlab/test_function.hpp"

namespace ladderlab {

class SpectrumCache;

/// Product when N = 1 and beta = 0, constant-shift for other constant
/// coefficients on a torus, pencil otherwise.
Backend select_backend(const StandardStationaryMetric& metric);
Backend backend_from_string(std::string_view name);

struct SliceBuilderOptions {
    std::optional<Backend> backend; // forced backend; empty selects automatically
    PencilOptions pencil;
    std::size_t budget = kDefaultLatticeBudget;
};

/// Builds slices of the joint spectrum holding every eigenvalue with |lambda|
/// in a requested range, optionally through a spectrum cache.
class SliceBuilder {
public:
    explicit SliceBuilder(const StandardStationaryMetric& metric, SliceBuilderOptions options = {});
    ~SliceBuilder();
    SliceBuilder(SliceBuilder&&) noexcept;

    Backend backend() const { return backend_; }
    const StandardStationaryMetric& metric() const { return metric_; }

    /// Cache key: the metric and every option that changes stored spectra.
    nlohmann::json cache_key() const;
    void attach_cache(std::shared_ptr<SpectrumCache> cache);

    /// Slice complete for |lambda| in [abs_lo, abs_hi] (abs_lo may be 0).
    /// Incompleteness error, naming m, when the backend cannot reach it.
    SpectrumSlice build(double m, double abs_lo, double abs_hi);
    /// Window [nu m - w, nu m + w] clipped at 0.
    SpectrumSlice build_window(double m, double nu, double half_width);

    /// Upper bound on the multiplicity of all eigenvalues with |lambda| <= L at m.
    std::function<double(double)> count_upper(double m) const;

private:
    StandardStationaryMetric metric_;
    SliceBuilderOptions options_;
    Backend backend_;
    std::shared_ptr<SpectrumCache> cache_;
    std::optional<SurfaceSpectrum> surface_; // product backend, grown on demand

    SpectrumSlice compute(double m, double abs_lo, double abs_hi);
    const SurfaceSpectrum& surface_spectrum(double cutoff);
};

/// Closed form for product metrics, horizon-adapted quadrature otherwise.
VolumeResult liouville_volume(const StandardStationaryMetric& metric, double nu);

/// EmptyLadder error below the bottom of the shell, Precondition error at a
/// critical level, with an explanation.
AdmissibilityReport require_admissible(const StandardStationaryMetric& metric, double nu);

enum class Verdict { Pass, Fail, InconclusiveClustering };
std::string_view to_string(Verdict v);

struct VerifyOptions {
    double nu = 0.0;
    WeylMode mode = WeylMode::Sharp;
    double C = 0.5;                    // sharp window
    std::optional<TestFunction> psi;   // smoothed mode
    std::vector<double> masses;
    bool include_negative_branch = false;
    bool include_zero_modes = false;
    double tolerance = 0.05;           // relative error of the fitted leading coefficient
    double accuracy = 1e-6;            // smoothed tail bound
    int clustering_sample = 8;
    double clustering_cv = 0.1;
    double clustering_fraction = 0.8;  // flagged share of masses for the clustering verdict
    double decay_ratio = 0.5;          // pinned residual RMS, late half over early half
};

struct LadderReport {
    int n = 0;
    double nu = 0.0;
    WeylMode mode = WeylMode::Sharp;
    double C = 0.0;
    std::string psi_descriptor;
    Backend backend = Backend::Synthetic;
    std::vector<double> masses;
    std::vector<double> counts;
    std::vector<double> predictions;
    std::vector<double> tail_bounds;
    VolumeResult volume;
    double predicted_a0 = 0.0;
    WeylFit fit;
    WeylFit two_term;
    double relative_error = 0.0;
    /// Relative residuals with a0 pinned to the prediction and the m^{n-3}
    /// coefficient fitted; the decay ratio compares the late half to the early half.
    std::vector<double> pinned_residuals;
    double residual_decay_ratio = 0.0;
    bool residual_decays = false;
    std::vector<ClusteringDiagnostic> clustering;
    double clustered_fraction = 0.0;
    Verdict verdict = Verdict::Fail;
    double tolerance = 0.0;
    std::vector<std::string> notes;
};

/// Spectra, counts, Liouville volume, prediction and fit for one nu.
LadderReport verify_weyl(SliceBuilder& builder, const VerifyOptions& options);

nlohmann::json to_json(const LadderReport& report);
nlohmann::json to_json(const VolumeResult& result);
std::string report_csv(const LadderReport& report);

} // namespace ladderlab
