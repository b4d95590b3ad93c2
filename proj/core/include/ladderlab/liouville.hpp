#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ladderlab/geometry.hpp"

namespace ladderlab {

/// Area of the unit sphere in R^k (k >= 1): 2 pi^{k/2} / Gamma(k/2).
double unit_sphere_area(int k);

enum class VolumeMethod { ClosedForm, Quadrature, MonteCarlo };
std::string_view to_string(VolumeMethod m);

struct VolumeResult {
    double value = 0.0;
    VolumeMethod method = VolumeMethod::ClosedForm;
    double error = 0.0;     // total error estimate
    double std_error = 0.0; // Monte Carlo statistical part
    std::int64_t nodes = 0;
    std::int64_t samples = 0;
    std::string convention;
    std::vector<std::string> warnings;
};

/// Record of the sphere-constant convention used by every volume routine.
std::string sphere_constant_convention(int n);

/// alpha_{n-1} (nu^2 - 1)^{(n-2)/2} nu / sqrt(nu^2 - 1) Vol(Sigma), for
/// N = 1 and beta = 0. Empty-ladder error when nu <= 1.
double volume_closed_form_product(double vol_sigma, double nu, int n);

/// Integrand density alpha nu N / B^{n/2} (nu^2 - B)_+^{(n-3)/2} at x (per dVol_h).
double liouville_density(const StandardStationaryMetric& metric, const Vec& x, double nu);

struct QuadratureOptions {
    int outer = 0;          // nodes per transverse torus axis (0: surface resolution)
    int line_samples = 256; // root-bracketing samples along each line
    int gl_nodes = 48;    // Gauss-Legendre nodes per allowed subinterval
};

/// Horizon-adapted quadrature of the density over Sigma; the error estimate
/// compares against a run with every node count doubled.
VolumeResult volume_quadrature(const StandardStationaryMetric& metric, double nu,
                               const QuadratureOptions& options = {});

struct MonteCarloOptions {
    std::int64_t samples = 1'000'000;
    std::uint64_t seed = 12345;
    double dq = 0.0; // 0 selects 1e-4 * nu
};

/// Stratified Monte Carlo estimate of d/dq of the sublevel phase-space volume
/// {tau <= nu + q} on the unit mass shell, by central differences.
VolumeResult volume_montecarlo(const StandardStationaryMetric& metric, double nu,
                               const MonteCarloOptions& options = {});

struct Ellipsoid {
    Vec center;             // coordinate covector
    std::vector<double> semi_axes;
    double volume = 0.0;
    bool empty = true;
};

/// {xi : beta.xi + N sqrt(|xi|^2_{h^{-1}} + m^2) <= E} at x, in an orthonormal
/// frame of h^{-1} (so the volume is per dVol_h).
Ellipsoid sublevel_ellipsoid(const StandardStationaryMetric& metric, const Vec& x, double E, double m);

/// mu(N_m(nu)) = d/dE at E = nu m of int_Sigma vol(sublevel_ellipsoid) dVol_h,
/// by Richardson-extrapolated central differences with step dq * m.
double liouville_volume_at_mass(const StandardStationaryMetric& metric, double nu, double m, double dq = 1e-3);

enum class WeylMode { Sharp, Smoothed };

/// Sharp: 2 C (2 pi)^{-n+1} mu m^{n-2}. Smoothed: (2 pi)^{-n+1} psi_hat(0) mu m^{n-2}.
double weyl_prediction(double mu, double c_or_hat0, double m, int n, WeylMode mode);

} // namespace ladderlab
