#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ladderlab/geometry.hpp"

namespace ladderlab {

enum class Sheet { Future, Past };

/// A covector (tau, xi) over the spacetime point (t, x), unit mass.
struct PhaseState {
    Vec x;
    double t = 0.0;
    Vec xi;
    double tau = 0.0;
    Sheet sheet = Sheet::Future;
};

/// tau = (beta, xi) +- N sqrt(h^{-1}(xi, xi) + 1); future sheet takes +.
double mass_shell_tau(const StandardStationaryMetric& metric, const Vec& x, const Vec& xi,
                      Sheet sheet = Sheet::Future);

/// g^{-1}(zeta, zeta) + 1, zero on the unit mass shell.
double shell_value(const StandardStationaryMetric& metric, const PhaseState& state);

/// Future-sheet state at x with tau = nu and xi along the covector `direction`
/// (normalized in h^{-1}). Domain error when the ray does not meet the level.
PhaseState state_on_level(const StandardStationaryMetric& metric, const Vec& x, const Vec& direction, double nu);

enum class Integrator {
    ImplicitMidpoint, // second order, symplectic, symmetric
    Composition4,     // triple-jump composition of the midpoint rule
    Composition6,
    DormandPrince,    // adaptive embedded 5(4), for stiffness diagnosis
};
std::string_view to_string(Integrator integrator);

struct FlowOptions {
    double step = 0.01;
    Integrator integrator = Integrator::Composition4;
    int record_every = 1;    // keep every k-th step (the final state is always kept)
    double rtol = 1e-12;     // adaptive mode only
    double atol = 1e-12;
    int max_rejections = 64; // consecutive rejected steps before a stiffness error
    double shell_cap = 1e-6; // hard cap on shell drift
};

struct TrajectorySample {
    double s = 0.0; // affine parameter
    PhaseState state;
    double shell_residual = 0.0;
};

struct Trajectory {
    std::vector<TrajectorySample> samples;
    double shell_drift = 0.0; // max |shell(s) - shell(0)|
    double tau_drift = 0.0;   // max |tau(s) - tau(0)|
    std::int64_t steps = 0;
    std::int64_t rejected = 0;
};

/// Hamiltonian flow of 1/2 g^{-1}(zeta, zeta) on a torus in the affine
/// parameter s; `duration` may be negative. Along the future sheet
/// dt/ds = -(tau - beta.xi)/N^2 < 0.
Trajectory flow(const StandardStationaryMetric& metric, const PhaseState& state, double duration,
                const FlowOptions& options = {});

/// Final state only, no recording.
PhaseState flow_to(const StandardStationaryMetric& metric, const PhaseState& state, double duration,
                   const FlowOptions& options = {});

struct LorentzDiagnostics {
    double nu = 0.0;        // tau
    double v = 0.0;         // sqrt(1 - (N^2 - |beta|^2)/nu^2)
    double roundtrip = 0.0; // sqrt(N^2 - |beta|^2) / sqrt(1 - v^2)
    double observer_speed = 0.0; // |dx/dt + beta|_h / N, equal to v when beta = 0
};

/// Domain error when nu^2 <= N^2 - |beta|^2 at the point.
LorentzDiagnostics lorentz_diagnostics(const StandardStationaryMetric& metric, const PhaseState& state);

// ---------------------------------------------------------------------------
// Periods of the Killing flow on N_1(nu)

enum class PeriodMethod { ClosedForm, Numeric };
std::string_view to_string(PeriodMethod method);

struct PeriodEntry {
    double period = 0.0;  // coordinate-time period s' (signed; the set holds both signs)
    double affine = 0.0;  // affine length of the closed orbit, same sign as period
    double action = 0.0;  // closed integral of xi dx = nu s' - affine
    std::vector<int> winding;
    std::string descriptor;
    double residual = 0.0;
};

struct PeriodSet {
    std::vector<PeriodEntry> entries; // sorted by period
    PeriodMethod method = PeriodMethod::ClosedForm;
    bool periodic_flow = false; // every orbit closes (round spheres)
    std::vector<double> periods() const;
    /// (s', affine) pairs for singular_support_predict_lifted.
    std::vector<std::pair<double, double>> lifted() const;
};

/// Product metrics (N = 1, beta = 0): torus windings |w_i| <= bound with
/// s' = |sum (w_i L_i)^2|^{1/2} nu / sqrt(nu^2 - 1); spheres: one base period
/// 2 pi r nu / sqrt(nu^2 - 1) and its multiples up to `bound`.
/// Empty-ladder error when nu <= 1.
PeriodSet period_set_closed_form(const Surface& surface, double nu, int bound);

/// Constant-coefficient torus with shift: each winding direction solves the
/// scalar level equation for the coordinate speed.
PeriodSet period_set_closed_form(const StandardStationaryMetric& metric, double nu, int bound);

struct NumericPeriodOptions {
    int max_winding = 2;      // rational seed directions (p, q, ...) with |.| <= max_winding
    double max_time = 40.0;   // coordinate-time horizon per seed
    double step = 0.01;
    double orbit_tol = 1e-8;
    double candidate_tol = 5e-2;
    int candidates_per_seed = 3;
    std::uint64_t seed = 12345;
};

/// Seeds states on {tau = nu}, integrates, and refines near-returns by
/// Levenberg-Marquardt shooting over (direction, return time). `budget`
/// bounds the number of seeds; an empty set is a valid outcome.
PeriodSet period_set_numeric(const StandardStationaryMetric& metric, double nu, int budget,
                             const NumericPeriodOptions& options = {});

/// Smallest return distance |x(s) - x0 mod lattice| + |xi(s) - xi0| for
/// coordinate times in [min_time, max_time], without refinement.
double min_return_distance(const StandardStationaryMetric& metric, const PhaseState& state, double min_time,
                           double max_time, const FlowOptions& options = {});

} // namespace ladderlab
