#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

namespace ladderlab {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// ---------------------------------------------------------------------------
// Cauchy surfaces
// ---------------------------------------------------------------------------

/// Flat torus R^d / (L_1 Z x ... x L_d Z). `resolution` is the sample grid
/// used for grid-based operations (allowed region, admissibility, quadrature).
struct FlatTorus {
    std::vector<double> lengths;
    std::vector<int> resolution;
};

/// Round sphere S^d of radius r in hyperspherical coordinates
/// (theta_1..theta_{d-1} in (0, pi), phi in [0, 2 pi)).
struct RoundSphere {
    int dimension = 2;
    double radius = 1.0;
    int resolution = 32;
};

/// Torus whose coefficient fields are stored as samples on a uniform grid.
struct GriddedTorus {
    std::vector<double> lengths;
    std::vector<int> resolution;
};

using Surface = std::variant<FlatTorus, RoundSphere, GriddedTorus>;

int surface_dimension(const Surface& surface);
bool is_torus(const Surface& surface);
/// Side lengths of a torus surface; empty for spheres.
std::vector<double> torus_lengths(const Surface& surface);
std::vector<int> sample_resolution(const Surface& surface);

// ---------------------------------------------------------------------------
// Coefficient fields
// ---------------------------------------------------------------------------

struct ConstantField {
    double value = 0.0;
};

/// base + amplitude * cos(wavenumber * x[axis])
struct CosineField {
    double base = 1.0;
    double amplitude = 0.0;
    int axis = 0;
    double wavenumber = 1.0;
};

/// Row-major samples on the GriddedTorus grid (axis 0 slowest). Off-grid
/// values use trigonometric interpolation.
struct GridField {
    std::vector<double> values;
};

using FieldSpec = std::variant<ConstantField, CosineField, GridField>;

/// A scalar field on a torus or sphere, evaluable with its gradient at any
/// surface point.
class ScalarField {
public:
    ScalarField() : ScalarField(ConstantField{0.0}) {}
    ScalarField(FieldSpec spec);

    /// Binds grid samples to the torus geometry; required before evaluation
    /// of GridField specs.
    void bind_grid(const std::vector<double>& lengths, const std::vector<int>& resolution);

    double value(const Vec& x) const;
    Vec gradient(const Vec& x) const;

    bool is_constant() const;
    const FieldSpec& spec() const { return spec_; }

private:
    struct Mode {
        std::vector<double> wavevector;
        double re = 0.0;
        double im = 0.0;
    };

    FieldSpec spec_;
    std::vector<Mode> modes_;
    std::size_t dim_ = 0;
};

// ---------------------------------------------------------------------------
// Spatial metric
// ---------------------------------------------------------------------------

struct IdentityMetric {};
struct ConstantMetric {
    Mat matrix;
};
using SpatialMetricSpec = std::variant<IdentityMetric, ConstantMetric>;

// ---------------------------------------------------------------------------
// Standard stationary metric g = -N^2 dt^2 + h_ij (dx^i + beta^i dt)(dx^j + beta^j dt)
// ---------------------------------------------------------------------------

struct SurfaceNode {
    Vec x;
    double weight = 0.0; // dVol_h weight
    std::vector<int> index;
};

class StandardStationaryMetric {
public:
    /// Validates every invariant at every sample node; throws Error(Invariant)
    /// or Error(Precondition) on failure.
    StandardStationaryMetric(int n, Surface surface, FieldSpec lapse,
                             std::vector<FieldSpec> shift = {},
                             SpatialMetricSpec h = IdentityMetric{});

    int n() const { return n_; }
    int surface_dim() const { return n_ - 1; }
    const Surface& surface() const { return surface_; }

    double lapse(const Vec& x) const;
    Vec lapse_gradient(const Vec& x) const;
    /// Contravariant shift beta^i.
    Vec shift(const Vec& x) const;
    /// J(i, j) = d beta^i / dx^j
    Mat shift_jacobian(const Vec& x) const;
    Mat h(const Vec& x) const;
    Mat h_inv(const Vec& x) const;
    double sqrt_det_h(const Vec& x) const;

    /// N^2 - |beta|_h^2, the squared bottom height of the unit mass shell.
    double bottom_sq(const Vec& x) const;
    Vec bottom_sq_gradient(const Vec& x) const;

    bool has_constant_coefficients() const;
    bool has_zero_shift() const;
    bool is_product() const; // N == 1, beta == 0

    /// Sample nodes with dVol_h weights (uniform grid on tori, Gauss-Legendre
    /// x uniform-longitude product nodes on spheres).
    const std::vector<SurfaceNode>& nodes() const { return nodes_; }
    double surface_volume() const;

    const FieldSpec& lapse_spec() const { return lapse_.spec(); }
    std::vector<FieldSpec> shift_spec() const;
    const SpatialMetricSpec& h_spec() const { return h_spec_; }

    void check_point(const Vec& x) const;

private:
    int n_;
    Surface surface_;
    ScalarField lapse_;
    std::vector<ScalarField> shift_;
    SpatialMetricSpec h_spec_;
    Mat h_const_;
    Mat h_inv_const_;
    std::vector<SurfaceNode> nodes_;

    void build_nodes();
    void validate() const;
};

/// Dual co-metric of g + d theta^2 in coordinates (t, x_1..x_{n-1}, theta).
Mat co_metric_at(const StandardStationaryMetric& metric, const Vec& x);
/// Forward metric g + d theta^2 in the same coordinates.
Mat forward_metric_at(const StandardStationaryMetric& metric, const Vec& x);

/// g(Z, Z) = -(N^2 - |beta|_h^2)
double killing_norm(const StandardStationaryMetric& metric, const Vec& x);

inline constexpr double kHorizonRelTol = 1e-9;

struct AllowedRegion {
    double nu = 0.0;
    std::vector<std::uint8_t> allowed; // per node: N^2 - |beta|^2 < nu^2
    std::vector<std::uint8_t> horizon; // per node: |nu^2 - (N^2 - |beta|^2)| < tol * nu^2
    double fraction = 0.0;             // dVol_h measure fraction of allowed nodes
};

AllowedRegion allowed_region(const StandardStationaryMetric& metric, double nu);

enum class Admissibility { Admissible, CriticalLevel, EmptyLadder };
std::string_view to_string(Admissibility a);

struct AdmissibilityReport {
    double nu = 0.0;
    Admissibility verdict = Admissibility::Admissible;
    double bottom_min = 0.0; // min sqrt(N^2 - |beta|^2)
    double bottom_max = 0.0;
    std::vector<double> critical_values;
    double grad_tol = 0.0;
};

/// grad_tol <= 0 selects the default 1e-6 * max(N^2 - |beta|^2).
AdmissibilityReport classify_admissibility(const StandardStationaryMetric& metric, double nu,
                                           double grad_tol = 0.0);

// JSON metric specification (schema in docs/metric_schema.md).
StandardStationaryMetric metric_from_json(const nlohmann::json& j);
nlohmann::json metric_to_json(const StandardStationaryMetric& metric);

} // namespace ladderlab
