#include "ladderlab/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <numeric>
#include <sstream>

#include "ladderlab/error.hpp"
#include "quadrature.hpp"

namespace ladderlab {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

std::size_t grid_size(const std::vector<int>& resolution)
{
    std::size_t total = 1;
    for (int r : resolution) total *= static_cast<std::size_t>(r);
    return total;
}

// Unravels a row-major flat index (axis 0 slowest).
std::vector<int> unravel(std::size_t flat, const std::vector<int>& resolution)
{
    std::vector<int> index(resolution.size());
    for (std::size_t a = resolution.size(); a-- > 0;) {
        index[a] = static_cast<int>(flat % static_cast<std::size_t>(resolution[a]));
        flat /= static_cast<std::size_t>(resolution[a]);
    }
    return index;
}

} // namespace

// ---------------------------------------------------------------------------

int surface_dimension(const Surface& surface)
{
    return std::visit(overloaded{
                          [](const FlatTorus& t) { return static_cast<int>(t.lengths.size()); },
                          [](const GriddedTorus& t) { return static_cast<int>(t.lengths.size()); },
                          [](const RoundSphere& s) { return s.dimension; },
                      },
                      surface);
}

bool is_torus(const Surface& surface)
{
    return !std::holds_alternative<RoundSphere>(surface);
}

std::vector<double> torus_lengths(const Surface& surface)
{
    if (const auto* t = std::get_if<FlatTorus>(&surface)) return t->lengths;
    if (const auto* t = std::get_if<GriddedTorus>(&surface)) return t->lengths;
    return {};
}

std::vector<int> sample_resolution(const Surface& surface)
{
    return std::visit(overloaded{
                          [](const FlatTorus& t) { return t.resolution; },
                          [](const GriddedTorus& t) { return t.resolution; },
                          [](const RoundSphere& s) {
                              std::vector<int> r(static_cast<std::size_t>(s.dimension), s.resolution);
                              if (!r.empty()) r.back() = 2 * s.resolution;
                              return r;
                          },
                      },
                      surface);
}

// ---------------------------------------------------------------------------
// ScalarField

ScalarField::ScalarField(FieldSpec spec) : spec_(std::move(spec)) {}

void ScalarField::bind_grid(const std::vector<double>& lengths, const std::vector<int>& resolution)
{
    const auto* grid = std::get_if<GridField>(&spec_);
    if (!grid) return;
    const std::size_t total = grid_size(resolution);
    require(grid->values.size() == total, ErrorKind::Precondition,
            "grid field has " + std::to_string(grid->values.size()) + " samples, expected " +
                std::to_string(total));
    dim_ = resolution.size();
    modes_.clear();

    // Plain DFT; grids here are small enough that O(P^2) is fine.
    std::vector<std::vector<double>> coords(total);
    for (std::size_t p = 0; p < total; ++p) {
        auto idx = unravel(p, resolution);
        coords[p].resize(dim_);
        for (std::size_t a = 0; a < dim_; ++a)
            coords[p][a] = lengths[a] * idx[a] / resolution[a];
    }
    double max_abs = 0.0;
    std::vector<Mode> raw;
    raw.reserve(total);
    for (std::size_t q = 0; q < total; ++q) {
        auto kidx = unravel(q, resolution);
        std::vector<double> k(dim_);
        for (std::size_t a = 0; a < dim_; ++a) {
            int j = kidx[a];
            if (2 * j > resolution[a]) j -= resolution[a];
            k[a] = kTwoPi * j / lengths[a];
        }
        std::complex<double> c = 0.0;
        for (std::size_t p = 0; p < total; ++p) {
            double phase = 0.0;
            for (std::size_t a = 0; a < dim_; ++a) phase += k[a] * coords[p][a];
            c += grid->values[p] * std::polar(1.0, -phase);
        }
        c /= static_cast<double>(total);
        max_abs = std::max(max_abs, std::abs(c));
        raw.push_back({k, c.real(), c.imag()});
    }
    // Nyquist modes are split symmetrically so the interpolant stays real.
    for (std::size_t q = 0; q < total; ++q) {
        const Mode& m = raw[q];
        if (std::hypot(m.re, m.im) <= 1e-15 * max_abs) continue;
        auto kidx = unravel(q, resolution);
        std::vector<std::vector<double>> variants{m.wavevector};
        for (std::size_t a = 0; a < dim_; ++a) {
            if (resolution[a] % 2 == 0 && 2 * kidx[a] == resolution[a]) {
                const std::size_t count = variants.size();
                for (std::size_t v = 0; v < count; ++v) {
                    auto flipped = variants[v];
                    flipped[a] = -flipped[a];
                    variants.push_back(flipped);
                }
            }
        }
        const double share = 1.0 / static_cast<double>(variants.size());
        for (auto& k : variants) modes_.push_back({k, m.re * share, m.im * share});
    }
}

double ScalarField::value(const Vec& x) const
{
    return std::visit(overloaded{
                          [](const ConstantField& f) { return f.value; },
                          [&](const CosineField& f) {
                              return f.base + f.amplitude * std::cos(f.wavenumber * x[f.axis]);
                          },
                          [&](const GridField&) {
                              require(dim_ != 0, ErrorKind::Precondition, "grid field not bound to a grid");
                              double sum = 0.0;
                              for (const Mode& m : modes_) {
                                  double phase = 0.0;
                                  for (std::size_t a = 0; a < dim_; ++a) phase += m.wavevector[a] * x[a];
                                  sum += m.re * std::cos(phase) - m.im * std::sin(phase);
                              }
                              return sum;
                          },
                      },
                      spec_);
}

Vec ScalarField::gradient(const Vec& x) const
{
    Vec g = Vec::Zero(x.size());
    std::visit(overloaded{
                   [](const ConstantField&) {},
                   [&](const CosineField& f) {
                       g[f.axis] = -f.amplitude * f.wavenumber * std::sin(f.wavenumber * x[f.axis]);
                   },
                   [&](const GridField&) {
                       require(dim_ != 0, ErrorKind::Precondition, "grid field not bound to a grid");
                       for (const Mode& m : modes_) {
                           double phase = 0.0;
                           for (std::size_t a = 0; a < dim_; ++a) phase += m.wavevector[a] * x[a];
                           // d/dx Re(c e^{i k x}) = Re(i k c e^{i k x})
                           const double d = -m.re * std::sin(phase) - m.im * std::cos(phase);
                           for (std::size_t a = 0; a < dim_; ++a) g[a] += m.wavevector[a] * d;
                       }
                   },
               },
               spec_);
    return g;
}

bool ScalarField::is_constant() const
{
    if (std::holds_alternative<ConstantField>(spec_)) return true;
    if (const auto* c = std::get_if<CosineField>(&spec_)) return c->amplitude == 0.0;
    return false;
}

// ---------------------------------------------------------------------------
// StandardStationaryMetric

StandardStationaryMetric::StandardStationaryMetric(int n, Surface surface, FieldSpec lapse,
                                                   std::vector<FieldSpec> shift, SpatialMetricSpec h)
    : n_(n), surface_(std::move(surface)), lapse_(std::move(lapse)), h_spec_(std::move(h))
{
    require(n_ >= 2, ErrorKind::Precondition, "spacetime dimension must be >= 2");
    const int d = surface_dimension(surface_);
    require(d == n_ - 1, ErrorKind::Precondition,
            "surface dimension " + std::to_string(d) + " does not match n - 1 = " + std::to_string(n_ - 1));

    std::visit(overloaded{
                   [&](FlatTorus& t) {
                       if (t.resolution.empty()) t.resolution.assign(t.lengths.size(), 64);
                   },
                   [&](GriddedTorus&) {},
                   [&](RoundSphere& s) {
                       require(s.radius > 0.0, ErrorKind::Precondition, "sphere radius must be > 0");
                       require(s.resolution >= 2, ErrorKind::Precondition, "sphere resolution must be >= 2");
                   },
               },
               surface_);

    const auto lengths = torus_lengths(surface_);
    const auto resolution = sample_resolution(surface_);
    if (is_torus(surface_)) {
        require(resolution.size() == lengths.size(), ErrorKind::Precondition,
                "torus resolution must have one entry per axis");
        for (double L : lengths) require(L > 0.0 && std::isfinite(L), ErrorKind::Precondition, "torus side lengths must be > 0");
        for (int r : resolution) require(r >= 1, ErrorKind::Precondition, "torus resolution must be >= 1");
    }

    auto check_field = [&](const ScalarField& f, const std::string& name) {
        const auto& spec = f.spec();
        if (std::holds_alternative<GridField>(spec))
            require(std::holds_alternative<GriddedTorus>(surface_), ErrorKind::Precondition,
                    name + ": grid samples require a gridded_torus surface");
        if (const auto* c = std::get_if<CosineField>(&spec)) {
            require(c->axis >= 0 && c->axis < d, ErrorKind::Precondition, name + ": cosine axis out of range");
            if (is_torus(surface_)) {
                const double turns = c->wavenumber * lengths[c->axis] / kTwoPi;
                require(std::abs(turns - std::round(turns)) < 1e-9, ErrorKind::Precondition,
                        name + ": cosine wavenumber is not periodic on the torus");
            }
        }
        if (!is_torus(surface_))
            require(f.is_constant(), ErrorKind::Precondition, name + ": only constant fields are supported on spheres");
    };

    lapse_.bind_grid(lengths, resolution);
    check_field(lapse_, "lapse");

    if (!shift.empty()) {
        require(static_cast<int>(shift.size()) == d, ErrorKind::Precondition,
                "shift must have one component per surface axis");
        for (auto& s : shift) {
            shift_.emplace_back(std::move(s));
            shift_.back().bind_grid(lengths, resolution);
            check_field(shift_.back(), "shift");
        }
        if (!is_torus(surface_)) {
            for (const auto& s : shift_)
                require(s.value(Vec::Zero(d)) == 0.0, ErrorKind::Precondition,
                        "shift must vanish on sphere surfaces");
        }
    }

    if (const auto* c = std::get_if<ConstantMetric>(&h_spec_)) {
        require(is_torus(surface_), ErrorKind::Precondition, "a constant spatial metric applies to tori only");
        require(c->matrix.rows() == d && c->matrix.cols() == d, ErrorKind::Precondition,
                "spatial metric must be (n-1)x(n-1)");
        require((c->matrix - c->matrix.transpose()).norm() <= 1e-12 * c->matrix.norm(), ErrorKind::Invariant,
                "spatial metric is not symmetric");
        Eigen::SelfAdjointEigenSolver<Mat> eig(c->matrix);
        require(eig.eigenvalues().minCoeff() > 1e-12 * eig.eigenvalues().cwiseAbs().maxCoeff(),
                ErrorKind::Invariant, "spatial metric is not positive definite");
        h_const_ = c->matrix;
    } else {
        h_const_ = Mat::Identity(d, d);
    }
    h_inv_const_ = h_const_.inverse();

    build_nodes();
    validate();
}

void StandardStationaryMetric::build_nodes()
{
    nodes_.clear();
    const int d = surface_dim();
    if (const auto* sphere = std::get_if<RoundSphere>(&surface_)) {
        const double r = sphere->radius;
        const int R = sphere->resolution;
        const int longitudes = 2 * R;
        const auto& rule = detail::gauss_legendre(R);
        std::vector<int> res(static_cast<std::size_t>(d), R);
        res.back() = longitudes;
        const std::size_t total = grid_size(res);
        nodes_.reserve(total);
        for (std::size_t p = 0; p < total; ++p) {
            auto idx = unravel(p, res);
            SurfaceNode node;
            node.x = Vec(d);
            node.index = idx;
            double w = std::pow(r, d) * (kTwoPi / longitudes);
            for (int a = 0; a + 1 < d; ++a) {
                const double theta = 0.5 * std::numbers::pi * (rule.nodes[idx[a]] + 1.0);
                node.x[a] = theta;
                w *= 0.5 * std::numbers::pi * rule.weights[idx[a]] * std::pow(std::sin(theta), d - 1 - a);
            }
            node.x[d - 1] = kTwoPi * idx[d - 1] / longitudes;
            node.weight = w;
            nodes_.push_back(std::move(node));
        }
        return;
    }
    const auto lengths = torus_lengths(surface_);
    const auto res = sample_resolution(surface_);
    const std::size_t total = grid_size(res);
    double cell = std::sqrt(h_const_.determinant());
    for (int a = 0; a < d; ++a) cell *= lengths[a] / res[a];
    nodes_.reserve(total);
    for (std::size_t p = 0; p < total; ++p) {
        SurfaceNode node;
        node.index = unravel(p, res);
        node.x = Vec(d);
        for (int a = 0; a < d; ++a) node.x[a] = lengths[a] * node.index[a] / res[a];
        node.weight = cell;
        nodes_.push_back(std::move(node));
    }
}

void StandardStationaryMetric::validate() const
{
    for (const auto& node : nodes_) {
        const double N = lapse(node.x);
        if (!(N > 0.0)) {
            std::ostringstream os;
            os << "lapse N = " << N << " is not positive at x = " << node.x.transpose();
            fail(ErrorKind::Invariant, os.str());
        }
        const double b = bottom_sq(node.x);
        if (!(b > 0.0)) {
            std::ostringstream os;
            os << "N^2 - |beta|_h^2 = " << b << " <= 0 at x = " << node.x.transpose()
               << " (Z is not timelike)";
            fail(ErrorKind::Invariant, os.str());
        }
    }
}

void StandardStationaryMetric::check_point(const Vec& x) const
{
    require(x.size() == surface_dim(), ErrorKind::Domain,
            "point has dimension " + std::to_string(x.size()) + ", surface has " + std::to_string(surface_dim()));
    require(x.allFinite(), ErrorKind::Domain, "point has non-finite coordinates");
    if (std::holds_alternative<RoundSphere>(surface_)) {
        for (int a = 0; a + 1 < surface_dim(); ++a)
            require(x[a] > 0.0 && x[a] < std::numbers::pi, ErrorKind::Domain,
                    "sphere polar angles must lie in (0, pi)");
    }
}

double StandardStationaryMetric::lapse(const Vec& x) const { return lapse_.value(x); }

Vec StandardStationaryMetric::lapse_gradient(const Vec& x) const { return lapse_.gradient(x); }

Vec StandardStationaryMetric::shift(const Vec& x) const
{
    Vec b = Vec::Zero(surface_dim());
    for (std::size_t i = 0; i < shift_.size(); ++i) b[static_cast<Eigen::Index>(i)] = shift_[i].value(x);
    return b;
}

Mat StandardStationaryMetric::shift_jacobian(const Vec& x) const
{
    Mat J = Mat::Zero(surface_dim(), surface_dim());
    for (std::size_t i = 0; i < shift_.size(); ++i) J.row(static_cast<Eigen::Index>(i)) = shift_[i].gradient(x).transpose();
    return J;
}

Mat StandardStationaryMetric::h(const Vec& x) const
{
    if (const auto* sphere = std::get_if<RoundSphere>(&surface_)) {
        const int d = surface_dim();
        Mat g = Mat::Zero(d, d);
        double s = sphere->radius * sphere->radius;
        for (int a = 0; a < d; ++a) {
            g(a, a) = s;
            if (a + 1 < d) s *= std::sin(x[a]) * std::sin(x[a]);
        }
        return g;
    }
    return h_const_;
}

Mat StandardStationaryMetric::h_inv(const Vec& x) const
{
    if (std::holds_alternative<RoundSphere>(surface_)) return h(x).diagonal().cwiseInverse().asDiagonal();
    return h_inv_const_;
}

double StandardStationaryMetric::sqrt_det_h(const Vec& x) const
{
    if (std::holds_alternative<RoundSphere>(surface_)) return std::sqrt(h(x).diagonal().prod());
    return std::sqrt(h_const_.determinant());
}

double StandardStationaryMetric::bottom_sq(const Vec& x) const
{
    const double N = lapse(x);
    if (shift_.empty()) return N * N;
    const Vec b = shift(x);
    return N * N - b.dot(h(x) * b);
}

Vec StandardStationaryMetric::bottom_sq_gradient(const Vec& x) const
{
    // tori only carry shifts, and h is constant there
    Vec g = 2.0 * lapse(x) * lapse_gradient(x);
    if (!shift_.empty()) {
        const Vec b = shift(x);
        const Mat J = shift_jacobian(x);
        g -= 2.0 * J.transpose() * (h_const_ * b);
    }
    return g;
}

bool StandardStationaryMetric::has_zero_shift() const
{
    for (const auto& s : shift_) {
        if (!s.is_constant()) return false;
        if (s.value(Vec::Zero(surface_dim())) != 0.0) return false;
    }
    return true;
}

bool StandardStationaryMetric::has_constant_coefficients() const
{
    if (!is_torus(surface_) || !lapse_.is_constant()) return false;
    return std::all_of(shift_.begin(), shift_.end(), [](const ScalarField& f) { return f.is_constant(); });
}

bool StandardStationaryMetric::is_product() const
{
    return lapse_.is_constant() && lapse_.value(Vec::Zero(surface_dim())) == 1.0 && has_zero_shift();
}

double StandardStationaryMetric::surface_volume() const
{
    double v = 0.0;
    for (const auto& node : nodes_) v += node.weight;
    return v;
}

std::vector<FieldSpec> StandardStationaryMetric::shift_spec() const
{
    std::vector<FieldSpec> out;
    for (const auto& s : shift_) out.push_back(s.spec());
    return out;
}

// ---------------------------------------------------------------------------

Mat co_metric_at(const StandardStationaryMetric& metric, const Vec& x)
{
    metric.check_point(x);
    const int d = metric.surface_dim();
    const double N = metric.lapse(x);
    const Vec b = metric.shift(x);
    const Mat hinv = metric.h_inv(x);
    Eigen::SelfAdjointEigenSolver<Mat> eig(metric.h(x));
    require(eig.eigenvalues().minCoeff() > 0.0, ErrorKind::Invariant, "spatial metric is not positive definite at x");

    const double inv_n2 = 1.0 / (N * N);
    Mat g = Mat::Zero(d + 2, d + 2);
    g(0, 0) = -inv_n2;
    g.block(0, 1, 1, d) = inv_n2 * b.transpose();
    g.block(1, 0, d, 1) = inv_n2 * b;
    g.block(1, 1, d, d) = hinv - inv_n2 * b * b.transpose();
    g(d + 1, d + 1) = 1.0;
    return g;
}

Mat forward_metric_at(const StandardStationaryMetric& metric, const Vec& x)
{
    metric.check_point(x);
    const int d = metric.surface_dim();
    const double N = metric.lapse(x);
    const Vec b = metric.shift(x);
    const Mat h = metric.h(x);
    const Vec hb = h * b;
    Mat g = Mat::Zero(d + 2, d + 2);
    g(0, 0) = -N * N + b.dot(hb);
    g.block(0, 1, 1, d) = hb.transpose();
    g.block(1, 0, d, 1) = hb;
    g.block(1, 1, d, d) = h;
    g(d + 1, d + 1) = 1.0;
    return g;
}

double killing_norm(const StandardStationaryMetric& metric, const Vec& x)
{
    metric.check_point(x);
    return -metric.bottom_sq(x);
}

AllowedRegion allowed_region(const StandardStationaryMetric& metric, double nu)
{
    require(nu > 0.0, ErrorKind::Precondition, "nu must be > 0");
    AllowedRegion region;
    region.nu = nu;
    const auto& nodes = metric.nodes();
    region.allowed.resize(nodes.size());
    region.horizon.resize(nodes.size());
    const double nu2 = nu * nu;
    double inside = 0.0, total = 0.0;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const double gap = nu2 - metric.bottom_sq(nodes[i].x);
        const bool horizon = std::abs(gap) < kHorizonRelTol * nu2;
        region.horizon[i] = horizon;
        region.allowed[i] = !horizon && gap > 0.0;
        total += nodes[i].weight;
        if (region.allowed[i]) inside += nodes[i].weight;
    }
    region.fraction = total > 0.0 ? inside / total : 0.0;
    return region;
}

std::string_view to_string(Admissibility a)
{
    switch (a) {
    case Admissibility::Admissible: return "Admissible";
    case Admissibility::CriticalLevel: return "CriticalLevel";
    case Admissibility::EmptyLadder: return "EmptyLadder";
    }
    return "?";
}

namespace {

// Centered differences of N^2 - |beta|^2 on the sample grid (periodic on tori).
Vec grid_gradient(const StandardStationaryMetric& metric, const std::vector<double>& values, std::size_t flat,
                  const std::vector<int>& resolution)
{
    const auto& nodes = metric.nodes();
    const int d = metric.surface_dim();
    const bool torus = is_torus(metric.surface());
    const auto& idx = nodes[flat].index;
    Vec g = Vec::Zero(d);
    for (int a = 0; a < d; ++a) {
        const int r = resolution[a];
        auto neighbour = [&](int delta) -> std::optional<std::size_t> {
            auto j = idx;
            j[a] += delta;
            if (torus) {
                j[a] = (j[a] % r + r) % r;
            } else if (a + 1 == d) {
                j[a] = (j[a] % r + r) % r; // longitude wraps
            } else if (j[a] < 0 || j[a] >= r) {
                return std::nullopt;
            }
            std::size_t f = 0;
            for (int b = 0; b < d; ++b) f = f * static_cast<std::size_t>(resolution[b]) + static_cast<std::size_t>(j[b]);
            return f;
        };
        const auto plus = neighbour(+1);
        const auto minus = neighbour(-1);
        const auto up = plus.value_or(flat);
        const auto down = minus.value_or(flat);
        const double dx = nodes[up].x[a] - nodes[down].x[a];
        double span = dx;
        if (torus || a + 1 == d) {
            const double period = torus ? torus_lengths(metric.surface())[a] : kTwoPi;
            span = (up == down) ? 0.0 : (plus && minus ? 2.0 * period / r : period / r);
        }
        if (span != 0.0) g[a] = (values[up] - values[down]) / span;
    }
    return g;
}

} // namespace

AdmissibilityReport classify_admissibility(const StandardStationaryMetric& metric, double nu, double grad_tol)
{
    require(nu > 0.0, ErrorKind::Precondition, "nu must be > 0");
    const auto resolution = sample_resolution(metric.surface());
    for (int r : resolution)
        require(r >= 3, ErrorKind::Resolution, "need at least 3 grid nodes per axis to estimate gradients");

    const auto& nodes = metric.nodes();
    std::vector<double> values(nodes.size());
    for (std::size_t i = 0; i < nodes.size(); ++i) values[i] = metric.bottom_sq(nodes[i].x);

    AdmissibilityReport report;
    report.nu = nu;
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    report.bottom_min = std::sqrt(*lo);
    report.bottom_max = std::sqrt(*hi);
    report.grad_tol = grad_tol > 0.0 ? grad_tol : 1e-6 * std::max(1.0, std::abs(*hi));

    std::vector<double> critical;
    const int d = metric.surface_dim();
    std::vector<double> grad_norm(nodes.size());
    for (std::size_t i = 0; i < nodes.size(); ++i)
        grad_norm[i] = grid_gradient(metric, values, i, resolution).norm();

    for (std::size_t i = 0; i < nodes.size(); ++i) {
        if (grad_norm[i] < report.grad_tol) {
            critical.push_back(values[i]);
            continue;
        }
        // Critical points between nodes on tori: refine local minima of the
        // discrete gradient with Newton on the closed-form gradient.
        if (!is_torus(metric.surface())) continue;
        bool local_min = true;
        for (int a = 0; a < d && local_min; ++a) {
            for (int delta : {-1, 1}) {
                auto j = nodes[i].index;
                j[a] = ((j[a] + delta) % resolution[a] + resolution[a]) % resolution[a];
                std::size_t f = 0;
                for (int b = 0; b < d; ++b) f = f * static_cast<std::size_t>(resolution[b]) + static_cast<std::size_t>(j[b]);
                if (grad_norm[f] < grad_norm[i]) local_min = false;
            }
        }
        if (!local_min) continue;
        Vec x = nodes[i].x;
        const auto lengths = torus_lengths(metric.surface());
        double cell = 0.0;
        for (int a = 0; a < d; ++a) cell = std::max(cell, lengths[a] / resolution[a]);
        for (int iter = 0; iter < 30; ++iter) {
            const Vec g = metric.bottom_sq_gradient(x);
            if (g.norm() < report.grad_tol) break;
            Mat H(d, d);
            const double step = 1e-5 * cell;
            for (int a = 0; a < d; ++a) {
                Vec xp = x, xm = x;
                xp[a] += step;
                xm[a] -= step;
                H.col(a) = (metric.bottom_sq_gradient(xp) - metric.bottom_sq_gradient(xm)) / (2.0 * step);
            }
            const Vec dx = H.completeOrthogonalDecomposition().solve(g);
            x -= dx;
            if ((x - nodes[i].x).norm() > 2.0 * cell) break;
        }
        if (metric.bottom_sq_gradient(x).norm() < report.grad_tol && (x - nodes[i].x).norm() <= 2.0 * cell)
            critical.push_back(metric.bottom_sq(x));
    }

    std::sort(critical.begin(), critical.end());
    for (double c : critical) {
        const double v = std::sqrt(c);
        if (report.critical_values.empty() || std::abs(report.critical_values.back() - v) > 1e-9 * std::max(1.0, v))
            report.critical_values.push_back(v);
    }

    const double nu2 = nu * nu;
    const bool at_critical = std::any_of(report.critical_values.begin(), report.critical_values.end(),
                                         [&](double v) { return std::abs(nu2 - v * v) < kHorizonRelTol * nu2; });
    if (at_critical)
        report.verdict = Admissibility::CriticalLevel;
    else if (nu < report.bottom_min)
        report.verdict = Admissibility::EmptyLadder;
    else
        report.verdict = Admissibility::Admissible;
    return report;
}

} // namespace ladderlab
