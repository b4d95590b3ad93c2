#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ladderlab/geometry.hpp"

namespace ladderlab {

// ---------------------------------------------------------------------------
// Surface Laplace spectra
// ---------------------------------------------------------------------------

struct SurfaceLevel {
    double omega = 0.0;
    std::int64_t multiplicity = 0;
};

struct SurfaceSpectrum {
    std::vector<SurfaceLevel> levels; // ascending in omega
    double cutoff = 0.0;              // complete for omega <= cutoff
    std::string descriptor;
    /// Upper bound on the total multiplicity of levels with omega <= X, valid
    /// for any X (also beyond the cutoff).
    std::function<double(double)> count_upper;
};

inline constexpr std::size_t kDefaultLatticeBudget = 50'000'000;

/// All omega = |2 pi (k_1/L_1, ..., k_d/L_d)|_{h^{-1}} <= cutoff with multiplicities.
/// `h_inv` defaults to the identity.
SurfaceSpectrum torus_laplace_spectrum(const std::vector<double>& lengths, double cutoff,
                                       std::size_t budget = kDefaultLatticeBudget,
                                       const std::optional<Mat>& h_inv = std::nullopt);

/// omega_l = sqrt(l (l + d - 1)) / r with the dimension of degree-l spherical
/// harmonics in d + 1 variables as multiplicity.
SurfaceSpectrum sphere_laplace_spectrum(int d, double radius, double cutoff,
                                        std::size_t budget = kDefaultLatticeBudget);

std::int64_t spherical_harmonic_dimension(int d, std::int64_t l);

// ---------------------------------------------------------------------------
// Joint spectra of (mass, D_Z)
// ---------------------------------------------------------------------------

struct Eigenvalue {
    double lambda = 0.0;
    std::int64_t multiplicity = 0;
};

/// Eigenvalues of D_Z at a single mass m. Both signs are stored. The slice is
/// guaranteed complete for every lambda with |lambda| in
/// [complete_abs_lo, complete_abs_hi].
struct SpectrumSlice {
    double m = 0.0;
    std::vector<Eigenvalue> eigenvalues; // ascending
    double complete_abs_lo = 0.0;
    double complete_abs_hi = 0.0;
    bool has_zero_mode = false;          // lambda = 0 at m = 0 (Jordan-block sector)
    double max_imag = 0.0;               // pencil backend only
    /// Upper bound on the total multiplicity of all eigenvalues (stored or not)
    /// with |lambda| <= L. Used for tail estimates.
    std::function<double(double)> count_upper;

    /// True when every eigenvalue with lambda in [lo, hi] is stored.
    bool covers(double lo, double hi) const;
};

enum class Backend { Product, ConstantShift, Pencil, Synthetic };
std::string_view to_string(Backend b);

struct JointSpectrum {
    int n = 0;
    Backend backend = Backend::Synthetic;
    std::vector<SpectrumSlice> slices; // ascending in m

    const SpectrumSlice* find(double m) const;
    const SpectrumSlice& at(double m) const; // incompleteness error when missing
};

/// Which part of each slice to store. `Full` keeps everything below the
/// completeness guarantee; a window keeps |lambda| in [nu m - w, nu m + w].
struct LambdaPolicy {
    bool full = true;
    double nu = 0.0;
    double half_width = 0.0;

    static LambdaPolicy Full() { return {}; }
    static LambdaPolicy Window(double nu, double half_width) { return {false, nu, half_width}; }
};

/// lambda = +-sqrt(m^2 + omega^2). A window beyond sqrt(m^2 + cutoff^2)
/// raises an incompleteness error.
SpectrumSlice product_slice(const SurfaceSpectrum& surf, double m, const LambdaPolicy& policy = LambdaPolicy::Full());
JointSpectrum product_joint_spectrum(const SurfaceSpectrum& surf, int n, const std::vector<double>& masses,
                                     const LambdaPolicy& policy = LambdaPolicy::Full());

/// lambda = beta.k +- N sqrt(h^{-1}(k, k) + m^2) for every lattice covector with
/// |k|_{h^{-1}} <= cutoff.
SpectrumSlice constant_shift_torus_spectrum(double lapse, const Vec& beta, const std::vector<double>& lengths,
                                            double m, double cutoff, const std::optional<Mat>& h = std::nullopt,
                                            const LambdaPolicy& policy = LambdaPolicy::Full(),
                                            std::size_t budget = kDefaultLatticeBudget);

struct PencilOptions {
    double basis_cutoff = 6.0; // Fourier modes with |k| <= basis_cutoff
    double real_tol = 1e-8;
    double cluster_tol = 1e-7;
    int sample_resolution = 0;  // 0 selects an automatic grid for the coefficient transforms
};

/// Pencil matrices lambda^2 A2 + lambda A1 + A0 on the Fourier basis.
struct PencilMatrices {
    std::vector<Vec> modes; // physical covectors k
    Eigen::MatrixXcd a2, a1, a0;
};

PencilMatrices assemble_pencil(const StandardStationaryMetric& metric, double m, const PencilOptions& options);

/// Fourier-Galerkin quadratic pencil for u = e^{i lambda t} phi(x) on a torus.
SpectrumSlice pencil_joint_spectrum(const StandardStationaryMetric& metric, double m,
                                    const PencilOptions& options = {});

/// Q(u, u) = lambda^2 ||u||^2 in the product case.
double energy_form_product(double lambda, double l2_norm_sq);

/// Merges values closer than `tol` (relative to max(1, |value|)) into multiplicities.
std::vector<Eigenvalue> merge_eigenvalues(std::vector<std::pair<double, std::int64_t>> values, double tol);

} // namespace ladderlab
