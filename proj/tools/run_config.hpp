#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ladderlab/dynamics.hpp"
#include "ladderlab/liouville.hpp"
#include "ladderlab/spectra.hpp"
#include "ladderlab/test_function.hpp"

namespace ladderlab::cli {

inline constexpr const char* kConfigSchema = "ladderlab.run/1";

struct Tolerances {
    double weyl = 0.05;       // relative error of the fitted leading coefficient
    double accuracy = 1e-6;   // smoothed-count tail bound
    double orbit = 1e-8;      // closing residual of numeric periods
    double shell_cap = 1e-6;  // hard cap on shell drift during flows
    double clustering_cv = 0.1;
};

struct PsiConfig {
    std::string profile = "bump"; // bump | autocorrelation
    double hat_radius = 0.5;
    double hat0 = 1.0;
};

struct VolumeConfig {
    std::int64_t samples = 1'000'000;
    int line_samples = 256;
    int gl_nodes = 48;
};

struct FlowConfig {
    std::vector<double> x;         // empty: origin
    std::vector<double> direction; // empty: first coordinate axis
    double duration = 100.0;
    double step = 0.01;
    std::string integrator = "composition4";
    int record_every = 10;
};

struct PeriodConfig {
    int bound = 0;      // winding bound; 0 picks one covering the psi_hat support
    int budget = 16;    // numeric seeds
    double max_time = 40.0;
};

struct RunConfig {
    nlohmann::json metric;        // normalized metric specification
    std::string backend = "auto";
    PencilOptions pencil;
    std::vector<double> nu;
    std::string mode = "sharp";   // sharp | smoothed
    double window = 0.5;          // C
    PsiConfig psi;
    std::vector<double> masses;
    int m_max = 300;
    int s_grid = 4096;
    std::vector<double> eps;
    std::uint64_t seed = 12345;
    Tolerances tolerances;
    VolumeConfig volume;
    FlowConfig flow;
    PeriodConfig periods;
    bool include_negative_branch = false;
    bool include_zero_modes = false;
    std::string cache_dir = ".ladderlab-cache";
    std::string out_dir = "ladderlab-out";
    std::string format = "csv";   // csv | json

    WeylMode weyl_mode() const;
    TestFunction test_function() const;
    Integrator integrator() const;
};

/// Product flat torus of side 2 pi, n = 3.
nlohmann::json default_metric_json();
RunConfig default_config();

/// Reads a RunConfig object. A "metric_file" entry is resolved relative to
/// `base_dir`. Unknown keys are rejected.
RunConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
RunConfig load_config(const std::filesystem::path& path);
nlohmann::json to_json(const RunConfig& config);

/// Tolerances > 0, strictly increasing mass grid, known enumerations.
void validate(const RunConfig& config);

/// Sorted keys and 17-digit floats.
std::string canonical_bytes(const RunConfig& config);
std::string config_hash(const RunConfig& config);

/// A:B:STEP, inclusive of B up to rounding.
std::vector<double> parse_mass_range(const std::string& text);
std::vector<double> parse_list(const std::string& text);

} // namespace ladderlab::cli
