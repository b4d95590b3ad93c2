#pragma once

#include <complex>
#include <cstdint>
#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "ladderlab/spectra.hpp"
#include "ladderlab/test_function.hpp"

namespace ladderlab {

struct CountOptions {
    bool include_negative_branch = false; // also count -lambda in the mirrored window
    bool include_zero_modes = false;      // lambda = 0 entries of the Jordan-block sector
};

/// #{lambda in [nu m - C, nu m + C]} with multiplicity, closed interval,
/// positive branch unless configured otherwise.
std::int64_t count_sharp(const SpectrumSlice& slice, double nu, double C, const CountOptions& options = {});
std::int64_t count_sharp(const JointSpectrum& spectrum, double nu, double C, double m,
                         const CountOptions& options = {});

struct SmoothedOptions {
    bool positive_branch_only = false;
    bool include_zero_modes = false;
    double accuracy = 1e-6; // absolute bound allowed for the unstored tail
};

struct SmoothedCount {
    double value = 0.0;
    double tail_bound = 0.0;
};

/// sum_j psi(lambda_j(m) - nu m) over the stored eigenvalues, with a bound on
/// the contribution of eigenvalues outside the completeness window.
SmoothedCount count_smoothed(const SpectrumSlice& slice, double nu, const TestFunction& psi,
                             const SmoothedOptions& options = {});
SmoothedCount count_smoothed(const JointSpectrum& spectrum, double nu, const TestFunction& psi, double m,
                             const SmoothedOptions& options = {});

/// Smallest half-width w such that a slice complete for |lambda| in
/// [center - w, center + w] leaves an unstored tail below accuracy / 2.
double smoothed_half_width(const std::function<double(double)>& count_upper, double center, const TestFunction& psi,
                           double accuracy);

// ---------------------------------------------------------------------------
// Generating functions

struct UpsilonSeries {
    double eps = 0.0;
    std::vector<double> s;
    std::vector<std::complex<double>> values;
    std::vector<double> coefficients; // c_m for m = 0..m_max (upsilon1 only)
    double m0_contribution = 0.0;     // c_0, reported separately
    double tail_bound = 0.0;          // sum of per-slice tail bounds
};

/// Abel-regularized partial sum sum_{m=0}^{m_max} c_m e^{ims - eps m}.
UpsilonSeries upsilon1_from_counts(const std::vector<double>& coefficients, const std::vector<double>& s_grid,
                                   double eps);

/// Upsilon^(1)(s) = sum_{m >= 0} sum_j psi(lambda_j(m) - m nu) e^{ims - eps m}.
/// Needs slices for every integer m in 0..m_max.
UpsilonSeries upsilon1(const JointSpectrum& spectrum, double nu, const TestFunction& psi,
                       const std::vector<double>& s_grid, int m_max, double eps,
                       const SmoothedOptions& options = {});

/// Upsilon^(2)(s) = sum_{m >= 0} sum_j psi(lambda_j(m) - m nu) e^{i lambda_j(m) s - eps m}.
UpsilonSeries upsilon2(const JointSpectrum& spectrum, double nu, const TestFunction& psi,
                       const std::vector<double>& s_grid, int m_max, double eps,
                       const SmoothedOptions& options = {});

/// Uniform grid of `count` points on [0, 2 pi).
std::vector<double> periodic_grid(int count);

/// Indices of local maxima (periodic) exceeding `factor` times the median.
std::vector<std::size_t> detect_peaks(const std::vector<double>& modulus, double factor = 3.0);

/// Peaks present at every eps (within `window` cells) whose height does not
/// decrease as eps decreases. `moduli` are ordered by decreasing eps; the
/// returned indices refer to the last (smallest eps) entry.
std::vector<std::size_t> persistent_peaks(const std::vector<std::vector<double>>& moduli, double factor = 3.0,
                                          int window = 2);

/// {nu s' mod 2 pi : s' in periods, |s'| <= hat_support_radius}, sorted and
/// deduplicated within `tol` on the circle.
std::vector<double> singular_support_predict(const std::vector<double>& periods, double nu,
                                             double hat_support_radius, double tol = 1e-9);

/// Same rule for the lifted orbit: each entry is (s', affine length); the
/// singular point is nu s' - affine mod 2 pi.
std::vector<double> singular_support_predict_lifted(const std::vector<std::pair<double, double>>& periods,
                                                    double nu, double hat_support_radius, double tol = 1e-9);

/// Circular distance on [0, 2 pi).
double circular_distance(double a, double b);

// ---------------------------------------------------------------------------
// Fits and bounds

struct WeylFitOptions {
    bool two_term = false;  // add the m^{n-3} column
    bool weighted = true;   // rows scaled by m^{-(n-2)}
};

struct WeylFit {
    double a0 = 0.0;
    double a1 = 0.0;
    double a0_stderr = 0.0;
    double residual_norm = 0.0;            // weighted residual 2-norm
    std::vector<double> residuals;         // raw residuals N(m) - fit(m)
    std::vector<double> relative_residuals; // (N(m) - fit(m)) / fit(m)
    int points = 0;
};

WeylFit fit_weyl(const std::vector<double>& masses, const std::vector<double>& counts, int n,
                 const WeylFitOptions& options = {});

struct SandwichResult {
    double lower = 0.0;          // N_{C - gamma} (1 - T(gamma / delta))
    double smoothed = 0.0;       // sum_j chi_{C,delta}(lambda_j - nu m)
    double upper = 0.0;          // N_{C + gamma} + outer contributions + tail
    std::int64_t count_inner = 0; // N_{C - gamma}
    std::int64_t count_outer = 0; // N_{C + gamma}
    double tail_bound = 0.0;
    bool holds() const { return lower <= smoothed && smoothed <= upper; }
};

/// Requires psi >= 0, psi_hat >= 0 and psi_hat(0) = 1.
SandwichResult tauberian_sandwich(const SpectrumSlice& slice, double nu, double C, double gamma, double delta,
                                  const TestFunction& psi);

struct ClusteringDiagnostic {
    double m = 0.0;
    std::vector<double> eigenvalues; // distinct positive eigenvalues nearest nu m
    double mean_gap = 0.0;
    double gap_cv = 0.0;             // std / mean of consecutive gaps
    bool arithmetic = false;
};

/// Arithmetic-progression detector on the `sample` distinct positive
/// eigenvalues nearest nu m: flags the slice when gap_cv < cv_threshold.
ClusteringDiagnostic detect_arithmetic_clustering(const SpectrumSlice& slice, double nu, int sample = 8,
                                                  double cv_threshold = 0.1);

} // namespace ladderlab
