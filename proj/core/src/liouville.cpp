#include "ladderlab/liouville.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

#include <boost/math/tools/roots.hpp>

#include "ladderlab/error.hpp"
#include "quadrature.hpp"

namespace ladderlab {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kEps = std::numeric_limits<double>::epsilon();

double unit_ball_volume(int d)
{
    return std::pow(kPi, 0.5 * d) / std::tgamma(0.5 * d + 1.0);
}

// Uniform double in [0, 1) from the top 53 bits.
double uniform01(std::mt19937_64& rng)
{
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

void warn_near_critical(const StandardStationaryMetric& metric, double nu, double width,
                        std::vector<std::string>& warnings)
{
    const auto resolution = sample_resolution(metric.surface());
    if (std::any_of(resolution.begin(), resolution.end(), [](int r) { return r < 3; })) return;
    const AdmissibilityReport report = classify_admissibility(metric, nu);
    for (double c : report.critical_values) {
        if (std::abs(nu - c) <= width) {
            std::ostringstream os;
            os.precision(17);
            os << "nu = " << nu << " lies within " << width << " of the critical level " << c
               << "; the volume derivative is ill-conditioned";
            warnings.push_back(os.str());
            return;
        }
    }
}

} // namespace

double unit_sphere_area(int k)
{
    require(k >= 1, ErrorKind::Precondition, "sphere ambient dimension must be >= 1");
    return 2.0 * std::pow(kPi, 0.5 * k) / std::tgamma(0.5 * k);
}

std::string_view to_string(VolumeMethod m)
{
    switch (m) {
    case VolumeMethod::ClosedForm: return "closed-form";
    case VolumeMethod::Quadrature: return "quadrature";
    case VolumeMethod::MonteCarlo: return "monte-carlo";
    }
    return "?";
}

std::string sphere_constant_convention(int n)
{
    std::ostringstream os;
    os.precision(17);
    os << "alpha = area of the unit sphere in R^" << (n - 1) << " = " << unit_sphere_area(n - 1);
    return os.str();
}

double volume_closed_form_product(double vol_sigma, double nu, int n)
{
    require(n >= 2, ErrorKind::Precondition, "n must be >= 2");
    require(vol_sigma >= 0.0, ErrorKind::Precondition, "surface volume must be >= 0");
    if (!(nu > 1.0)) {
        std::ostringstream os;
        os.precision(17);
        os << "nu = " << nu << " <= 1: the product ladder is empty";
        fail(ErrorKind::EmptyLadder, os.str());
    }
    const double r = std::sqrt(nu * nu - 1.0);
    return unit_sphere_area(n - 1) * std::pow(r, n - 2) * (nu / r) * vol_sigma;
}

double liouville_density(const StandardStationaryMetric& metric, const Vec& x, double nu)
{
    const int n = metric.n();
    const double B = metric.bottom_sq(x);
    const double gap = nu * nu - B;
    if (!(gap > 0.0)) return 0.0;
    const double N = metric.lapse(x);
    return unit_sphere_area(n - 1) * nu * N / std::pow(B, 0.5 * n) * std::pow(gap, 0.5 * (n - 3));
}

// ---------------------------------------------------------------------------
// Quadrature

namespace {

struct LineResult {
    double value = 0.0;
    std::int64_t evaluations = 0;
    bool horizon = false;
};

// Integral of the density along `axis` at transverse coordinates `x` (x[axis] ignored).
LineResult integrate_line(const StandardStationaryMetric& metric, double nu, Vec x, int axis, double length,
                          int samples, int gl_nodes)
{
    LineResult out;
    const double nu2 = nu * nu;
    auto F = [&](double t) {
        x[axis] = t;
        return nu2 - metric.bottom_sq(x);
    };
    auto rho = [&](double t) {
        x[axis] = t;
        ++out.evaluations;
        return liouville_density(metric, x, nu);
    };

    std::vector<double> f(static_cast<std::size_t>(samples));
    for (int i = 0; i < samples; ++i) f[static_cast<std::size_t>(i)] = F(length * i / samples);

    std::vector<double> roots;
    for (int i = 0; i < samples; ++i) {
        const double a = length * i / samples, b = length * (i + 1) / samples;
        const double fa = f[static_cast<std::size_t>(i)];
        const double fb = i + 1 < samples ? f[static_cast<std::size_t>(i + 1)] : f[0];
        if (fa == 0.0) {
            roots.push_back(a);
            continue;
        }
        if ((fa > 0.0) == (fb > 0.0) || fb == 0.0) continue;
        boost::uintmax_t iters = 200;
        auto tol = [](double l, double r) { return std::abs(r - l) <= 4.0 * kEps * std::max(1.0, std::abs(l)); };
        const auto bracket = boost::math::tools::toms748_solve(F, a, b, fa, fb, tol, iters);
        roots.push_back(0.5 * (bracket.first + bracket.second));
    }

    if (roots.empty()) {
        if (f[0] <= 0.0) return out;
        // periodic trapezoid: spectrally accurate for the smooth periodic density
        double sum = 0.0;
        for (int i = 0; i < samples; ++i) sum += rho(length * i / samples);
        out.value = sum * length / samples;
        return out;
    }

    out.horizon = true;
    std::sort(roots.begin(), roots.end());
    const auto& rule = detail::gauss_legendre(gl_nodes);
    for (std::size_t k = 0; k < roots.size(); ++k) {
        const double r0 = roots[k];
        const double r1 = k + 1 < roots.size() ? roots[k + 1] : roots[0] + length;
        if (r1 - r0 <= 0.0) continue;
        const double mid = 0.5 * (r0 + r1);
        if (F(std::fmod(mid, length)) <= 0.0) continue;
        // x = r0 + (r1 - r0)(1 - cos theta)/2 absorbs the square-root endpoint behaviour
        double sum = 0.0;
        for (std::size_t j = 0; j < rule.nodes.size(); ++j) {
            const double theta = 0.5 * kPi * (rule.nodes[j] + 1.0);
            const double t = r0 + 0.5 * (r1 - r0) * (1.0 - std::cos(theta));
            const double jac = 0.5 * (r1 - r0) * std::sin(theta);
            sum += rule.weights[j] * rho(std::fmod(t, length)) * jac;
        }
        out.value += 0.5 * kPi * sum;
    }
    return out;
}

struct QuadratureRun {
    double value = 0.0;
    std::int64_t evaluations = 0;
    bool horizon = false;
};

QuadratureRun torus_quadrature(const StandardStationaryMetric& metric, double nu, const std::vector<int>& outer,
                               int samples, int gl_nodes)
{
    const int d = metric.surface_dim();
    const auto lengths = torus_lengths(metric.surface());
    const double sdet = metric.sqrt_det_h(Vec::Zero(d));
    // lines run along the axis where the bottom height varies most, so the
    // horizon is resolved inside the lines rather than by the outer rule
    int axis = 0;
    {
        Vec mean = Vec::Zero(d);
        for (const auto& node : metric.nodes()) mean += metric.bottom_sq_gradient(node.x).cwiseAbs();
        mean.maxCoeff(&axis);
    }
    double weight = sdet;
    std::size_t lines = 1;
    for (int a = 0; a < d; ++a) {
        if (a == axis) continue;
        weight *= lengths[a] / outer[a];
        lines *= static_cast<std::size_t>(outer[a]);
    }
    QuadratureRun run;
    detail::CompensatedSum sum;
    Vec x = Vec::Zero(d);
    for (std::size_t p = 0; p < lines; ++p) {
        std::size_t rem = p;
        for (int a = d - 1; a >= 0; --a) {
            if (a == axis) continue;
            const int idx = static_cast<int>(rem % static_cast<std::size_t>(outer[a]));
            rem /= static_cast<std::size_t>(outer[a]);
            x[a] = lengths[a] * idx / outer[a];
        }
        const LineResult line = integrate_line(metric, nu, x, axis, lengths[axis], samples, gl_nodes);
        sum.add(weight * line.value);
        run.evaluations += line.evaluations;
        run.horizon = run.horizon || line.horizon;
    }
    run.value = sum.value();
    return run;
}

QuadratureRun sphere_quadrature(const StandardStationaryMetric& metric, double nu, int resolution)
{
    const auto& sphere = std::get<RoundSphere>(metric.surface());
    const StandardStationaryMetric refined(metric.n(), RoundSphere{sphere.dimension, sphere.radius, resolution},
                                           metric.lapse_spec(), metric.shift_spec(), metric.h_spec());
    QuadratureRun run;
    detail::CompensatedSum sum;
    for (const auto& node : refined.nodes()) {
        sum.add(node.weight * liouville_density(refined, node.x, nu));
        ++run.evaluations;
    }
    run.value = sum.value();
    return run;
}

} // namespace

VolumeResult volume_quadrature(const StandardStationaryMetric& metric, double nu, const QuadratureOptions& options)
{
    require(nu > 0.0, ErrorKind::Precondition, "nu must be > 0");
    require(options.line_samples >= 8 && options.gl_nodes >= 4, ErrorKind::Precondition,
            "quadrature needs line_samples >= 8 and gl_nodes >= 4");
    VolumeResult out;
    out.method = VolumeMethod::Quadrature;
    out.convention = sphere_constant_convention(metric.n());

    QuadratureRun coarse, fine;
    if (is_torus(metric.surface())) {
        auto outer = sample_resolution(metric.surface());
        if (options.outer > 0) std::fill(outer.begin(), outer.end(), options.outer);
        std::vector<int> outer2 = outer;
        for (int& o : outer2) o *= 2;
        coarse = torus_quadrature(metric, nu, outer, options.line_samples, options.gl_nodes);
        fine = torus_quadrature(metric, nu, outer2, 2 * options.line_samples, 2 * options.gl_nodes);
    } else {
        const int r = std::get<RoundSphere>(metric.surface()).resolution;
        coarse = sphere_quadrature(metric, nu, r);
        fine = sphere_quadrature(metric, nu, 2 * r);
    }
    out.value = fine.value;
    out.error = std::abs(fine.value - coarse.value) + 16.0 * kEps * std::abs(fine.value);
    out.nodes = coarse.evaluations + fine.evaluations;
    if (metric.n() == 2 && fine.horizon)
        out.warnings.push_back("n = 2: density has an inverse square-root singularity at the horizon; "
                               "endpoint substitution applied");
    warn_near_critical(metric, nu, 1e-6 * nu, out.warnings);
    return out;
}

// ---------------------------------------------------------------------------
// Ellipsoid construction

Ellipsoid sublevel_ellipsoid(const StandardStationaryMetric& metric, const Vec& x, double E, double m)
{
    require(m > 0.0, ErrorKind::Precondition, "mass must be > 0");
    const int d = metric.surface_dim();
    const double N = metric.lapse(x);
    const Vec beta = metric.shift(x);
    const Mat h = metric.h(x);
    const double B = metric.bottom_sq(x);
    const double e = E / m;

    Ellipsoid out;
    out.center = -E * (h * beta) / B;
    if (!(e > 0.0) || !(e * e > B)) return out;
    // semi-axes: N m sqrt(e^2 - B) / B along beta, m sqrt(e^2 - B) / sqrt(B) across
    const double root = std::sqrt(e * e - B);
    const double along = N * m * root / B;
    const double across = m * root / std::sqrt(B);
    out.semi_axes.push_back(along);
    for (int a = 1; a < d; ++a) out.semi_axes.push_back(across);
    out.volume = unit_ball_volume(d);
    for (double s : out.semi_axes) out.volume *= s;
    out.empty = false;
    return out;
}

double liouville_volume_at_mass(const StandardStationaryMetric& metric, double nu, double m, double dq)
{
    require(nu > 0.0 && m > 0.0 && dq > 0.0, ErrorKind::Precondition, "need nu, m, dq > 0");
    auto volume = [&](double E) {
        detail::CompensatedSum sum;
        for (const auto& node : metric.nodes()) sum.add(node.weight * sublevel_ellipsoid(metric, node.x, E, m).volume);
        return sum.value();
    };
    const double center = nu * m;
    auto central = [&](double h) { return (volume(center + h) - volume(center - h)) / (2.0 * h); };
    const double h = dq * m;
    const double d1 = central(h), d2 = central(0.5 * h), d3 = central(0.25 * h);
    const double r1 = (4.0 * d2 - d1) / 3.0, r2 = (4.0 * d3 - d2) / 3.0;
    return (16.0 * r2 - r1) / 15.0;
}

// ---------------------------------------------------------------------------
// Monte Carlo

VolumeResult volume_montecarlo(const StandardStationaryMetric& metric, double nu, const MonteCarloOptions& options)
{
    require(nu > 0.0, ErrorKind::Precondition, "nu must be > 0");
    require(options.samples >= 10'000, ErrorKind::Precondition, "Monte Carlo needs at least 1e4 samples");
    const double dq = options.dq > 0.0 ? options.dq : 1e-4 * nu;
    require(dq < nu, ErrorKind::Precondition, "dq must be smaller than nu");

    VolumeResult out;
    out.method = VolumeMethod::MonteCarlo;
    out.convention = sphere_constant_convention(metric.n());
    out.samples = options.samples;
    const int d = metric.surface_dim();

    struct Stratum {
        Vec lo;
        Vec width;
        double weight = 0.0;
    };
    std::vector<Stratum> strata;
    const bool torus = is_torus(metric.surface());
    if (torus) {
        const auto lengths = torus_lengths(metric.surface());
        const auto res = sample_resolution(metric.surface());
        const double sdet = metric.sqrt_det_h(Vec::Zero(d));
        for (const auto& node : metric.nodes()) {
            Stratum s;
            s.lo = node.x;
            s.width = Vec(d);
            double w = sdet;
            for (int a = 0; a < d; ++a) {
                s.width[a] = lengths[a] / res[a];
                w *= s.width[a];
            }
            s.weight = w;
            strata.push_back(std::move(s));
        }
    } else {
        const auto& sphere = std::get<RoundSphere>(metric.surface());
        Stratum s;
        s.weight = std::pow(sphere.radius, d) * unit_sphere_area(d + 1);
        strata.push_back(std::move(s));
    }

    const auto cells = static_cast<std::int64_t>(strata.size());
    require(options.samples >= cells, ErrorKind::Precondition, "need at least one sample per stratum");
    double estimate = 0.0, variance = 0.0, coarse = 0.0, magnitude = 0.0;
    Vec x(d);
    for (std::int64_t c = 0; c < cells; ++c) {
        const Stratum& s = strata[static_cast<std::size_t>(c)];
        const std::int64_t count = options.samples / cells + (c < options.samples % cells ? 1 : 0);
        std::mt19937_64 rng(detail::splitmix64(options.seed + static_cast<std::uint64_t>(c)));
        std::normal_distribution<double> gauss;
        double mean = 0.0, m2 = 0.0, mean2 = 0.0, mag = 0.0;
        for (std::int64_t i = 0; i < count; ++i) {
            if (torus) {
                for (int a = 0; a < d; ++a) x[a] = s.lo[a] + s.width[a] * uniform01(rng);
            } else {
                // uniform direction on S^d mapped to hyperspherical angles
                Eigen::VectorXd g(d + 1);
                for (int a = 0; a <= d; ++a) g[a] = gauss(rng);
                g.normalize();
                double rem = 1.0;
                for (int a = 0; a + 1 < d; ++a) {
                    x[a] = std::acos(std::clamp(g[a] / std::max(rem, 1e-300), -1.0, 1.0));
                    rem *= std::sin(x[a]);
                }
                x[d - 1] = std::atan2(g[d], g[d - 1]);
                if (x[d - 1] < 0.0) x[d - 1] += 2.0 * kPi;
                for (int a = 0; a + 1 < d; ++a) x[a] = std::clamp(x[a], 1e-12, kPi - 1e-12);
            }
            const double vp = sublevel_ellipsoid(metric, x, nu + dq, 1.0).volume;
            const double vm = sublevel_ellipsoid(metric, x, nu - dq, 1.0).volume;
            const double vp2 = sublevel_ellipsoid(metric, x, nu + 2.0 * dq, 1.0).volume;
            const double vm2 = sublevel_ellipsoid(metric, x, nu - 2.0 * dq, 1.0).volume;
            const double D = (vp - vm) / (2.0 * dq);
            const double D2 = (vp2 - vm2) / (4.0 * dq);
            // Welford update
            const double delta = D - mean;
            mean += delta / static_cast<double>(i + 1);
            m2 += delta * (D - mean);
            mean2 += (D2 - mean2) / static_cast<double>(i + 1);
            mag += (std::abs(vp) + std::abs(vm) - mag) / static_cast<double>(i + 1);
        }
        estimate += s.weight * mean;
        coarse += s.weight * mean2;
        magnitude += s.weight * mag;
        if (count > 1) variance += s.weight * s.weight * (m2 / static_cast<double>(count - 1)) / static_cast<double>(count);
    }

    out.value = std::max(0.0, estimate);
    out.std_error = std::sqrt(variance);
    // central differences err as dq^2, so D(dq) - D(2dq) ~ 3 * bias
    const double bias = std::abs(coarse - estimate) / 3.0;
    const double roundoff = 4.0 * kEps * magnitude / (2.0 * dq);
    out.error = std::sqrt(out.std_error * out.std_error + bias * bias + roundoff * roundoff);
    out.nodes = cells;
    warn_near_critical(metric, nu, 2.0 * dq, out.warnings);
    return out;
}

double weyl_prediction(double mu, double c_or_hat0, double m, int n, WeylMode mode)
{
    require(mu >= 0.0, ErrorKind::Precondition, "mu must be >= 0");
    require(m >= 1.0, ErrorKind::Precondition, "m must be >= 1");
    require(n >= 2, ErrorKind::Precondition, "n must be >= 2");
    const double base = std::pow(2.0 * kPi, -(n - 1)) * mu * std::pow(m, n - 2);
    return mode == WeylMode::Sharp ? 2.0 * c_or_hat0 * base : c_or_hat0 * base;
}

} // namespace ladderlab
