#include "ladderlab/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>

#include <boost/math/tools/roots.hpp>
#include <boost/numeric/odeint.hpp>

#include "ladderlab/error.hpp"
#include "quadrature.hpp"

namespace ladderlab {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kEps = std::numeric_limits<double>::epsilon();

using State = std::vector<double>;

// y = [x (d), t, xi (d), tau]
class FlowSystem {
public:
    explicit FlowSystem(const StandardStationaryMetric& metric)
        : metric_(metric), d_(metric.surface_dim()), zero_shift_(metric.has_zero_shift()),
          hinv_(metric.h_inv(Vec::Zero(metric.surface_dim()))), x_(d_), xi_(d_)
    {
        require(is_torus(metric.surface()), ErrorKind::Precondition, "the flow is implemented on tori only");
    }

    int dim() const { return d_; }
    std::size_t size() const { return static_cast<std::size_t>(2 * d_ + 2); }

    void operator()(const State& y, State& dy, double /*s*/) const { rhs(y.data(), dy.data()); }

    void rhs(const double* y, double* dy) const
    {
        for (int i = 0; i < d_; ++i) {
            x_[i] = y[i];
            xi_[i] = y[d_ + 1 + i];
        }
        const double tau = y[2 * d_ + 1];
        const double N = metric_.lapse(x_);
        const double N2 = N * N;
        const Vec gradN = metric_.lapse_gradient(x_);
        const Vec hxi = hinv_ * xi_;
        if (zero_shift_) {
            const double w = tau;
            for (int i = 0; i < d_; ++i) {
                dy[i] = hxi[i];
                dy[d_ + 1 + i] = -w * w * gradN[i] / (N2 * N);
            }
            dy[d_] = -w / N2;
        } else {
            const Vec beta = metric_.shift(x_);
            const Mat J = metric_.shift_jacobian(x_);
            const double w = tau - beta.dot(xi_);
            const Vec jx = J.transpose() * xi_;
            for (int i = 0; i < d_; ++i) {
                dy[i] = hxi[i] + (w / N2) * beta[i];
                dy[d_ + 1 + i] = -((w / N2) * jx[i] + w * w * gradN[i] / (N2 * N));
            }
            dy[d_] = -w / N2;
        }
        dy[2 * d_ + 1] = 0.0;
    }

private:
    const StandardStationaryMetric& metric_;
    int d_;
    bool zero_shift_;
    Mat hinv_;
    mutable Vec x_;
    mutable Vec xi_;
};

State pack(const PhaseState& s)
{
    const auto d = static_cast<std::size_t>(s.x.size());
    State y(2 * d + 2);
    for (std::size_t i = 0; i < d; ++i) {
        y[i] = s.x[static_cast<Eigen::Index>(i)];
        y[d + 1 + i] = s.xi[static_cast<Eigen::Index>(i)];
    }
    y[d] = s.t;
    y[2 * d + 1] = s.tau;
    return y;
}

PhaseState unpack(const State& y, int d)
{
    PhaseState s;
    s.x.resize(d);
    s.xi.resize(d);
    for (int i = 0; i < d; ++i) {
        s.x[i] = y[static_cast<std::size_t>(i)];
        s.xi[i] = y[static_cast<std::size_t>(d + 1 + i)];
    }
    s.t = y[static_cast<std::size_t>(d)];
    s.tau = y[static_cast<std::size_t>(2 * d + 1)];
    return s;
}

class MidpointStepper {
public:
    explicit MidpointStepper(const FlowSystem& system)
        : system_(system), mid_(system.size()), f_(system.size()), z_(system.size()) {}

    // y <- y + h f((y + y')/2), solved by fixed-point iteration to roundoff
    void step(State& y, double h)
    {
        const std::size_t n = y.size();
        system_.rhs(y.data(), f_.data());
        for (std::size_t i = 0; i < n; ++i) z_[i] = y[i] + h * f_[i];
        double previous = std::numeric_limits<double>::infinity();
        for (int it = 0; it < 100; ++it) {
            for (std::size_t i = 0; i < n; ++i) mid_[i] = 0.5 * (y[i] + z_[i]);
            system_.rhs(mid_.data(), f_.data());
            double change = 0.0, scale = 1.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double next = y[i] + h * f_[i];
                change = std::max(change, std::abs(next - z_[i]));
                scale = std::max(scale, std::abs(next));
                z_[i] = next;
            }
            if (change <= 4.0 * kEps * scale) {
                y = z_;
                return;
            }
            // stalled at roundoff level
            if (change >= previous && change <= 1e3 * kEps * scale) {
                y = z_;
                return;
            }
            previous = change;
        }
        fail(ErrorKind::Integration, "implicit midpoint iteration did not converge; reduce the step");
    }

private:
    const FlowSystem& system_;
    State mid_, f_, z_;
};

const std::vector<double>& composition_weights(Integrator integrator)
{
    static const std::vector<double> midpoint{1.0};
    static const std::vector<double> four = [] {
        const double g = 1.0 / (2.0 - std::cbrt(2.0));
        return std::vector<double>{g, 1.0 - 2.0 * g, g};
    }();
    static const std::vector<double> six = [] {
        const double g = 1.0 / (2.0 - std::pow(2.0, 0.2));
        std::vector<double> out;
        for (double outer : {g, 1.0 - 2.0 * g, g})
            for (double inner : four) out.push_back(outer * inner);
        return out;
    }();
    switch (integrator) {
    case Integrator::Composition4: return four;
    case Integrator::Composition6: return six;
    default: return midpoint;
    }
}

double shell_of(const StandardStationaryMetric& metric, const State& y, int d)
{
    return shell_value(metric, unpack(y, d));
}

// Drives the chosen integrator over `duration`, calling `observe(s, y)` after
// every accepted step (and once at s = 0). Returns (steps, rejected).
template <class Observer>
std::pair<std::int64_t, std::int64_t> integrate(const FlowSystem& system, State& y, double duration,
                                                const FlowOptions& options, Observer&& observe)
{
    require(options.step > 0.0, ErrorKind::Precondition, "flow step must be > 0");
    observe(0.0, y);
    if (duration == 0.0) return {0, 0};

    if (options.integrator == Integrator::DormandPrince) {
        namespace odeint = boost::numeric::odeint;
        auto stepper = odeint::make_controlled(options.atol, options.rtol, odeint::runge_kutta_dopri5<State>());
        const double sign = duration > 0.0 ? 1.0 : -1.0;
        double s = 0.0, h = sign * options.step;
        std::int64_t steps = 0, rejected = 0;
        int consecutive = 0;
        while (sign * (duration - s) > 0.0) {
            if (sign * (s + h - duration) > 0.0) h = duration - s;
            const auto result = stepper.try_step(system, y, s, h);
            if (result == odeint::success) {
                ++steps;
                consecutive = 0;
                observe(s, y);
            } else {
                ++rejected;
                if (++consecutive > options.max_rejections || std::abs(h) < 1e-14 * std::abs(duration)) {
                    std::ostringstream os;
                    os.precision(17);
                    os << "adaptive step rejected " << consecutive << " times in a row at s = " << s
                       << " (h = " << h << "); the flow is stiff at this resolution";
                    fail(ErrorKind::Stiffness, os.str());
                }
            }
        }
        return {steps, rejected};
    }

    const auto n = static_cast<std::int64_t>(std::ceil(std::abs(duration) / options.step - 1e-12));
    const double h = duration / static_cast<double>(std::max<std::int64_t>(n, 1));
    const auto& weights = composition_weights(options.integrator);
    MidpointStepper stepper(system);
    for (std::int64_t k = 1; k <= std::max<std::int64_t>(n, 1); ++k) {
        for (double g : weights) stepper.step(y, g * h);
        observe(k == n ? duration : h * static_cast<double>(k), y);
    }
    return {std::max<std::int64_t>(n, 1), 0};
}

} // namespace

// ---------------------------------------------------------------------------

double mass_shell_tau(const StandardStationaryMetric& metric, const Vec& x, const Vec& xi, Sheet sheet)
{
    const double N = metric.lapse(x);
    const double root = N * std::sqrt(xi.dot(metric.h_inv(x) * xi) + 1.0);
    return metric.shift(x).dot(xi) + (sheet == Sheet::Future ? root : -root);
}

double shell_value(const StandardStationaryMetric& metric, const PhaseState& state)
{
    const double N = metric.lapse(state.x);
    const double w = state.tau - metric.shift(state.x).dot(state.xi);
    return -w * w / (N * N) + state.xi.dot(metric.h_inv(state.x) * state.xi) + 1.0;
}

PhaseState state_on_level(const StandardStationaryMetric& metric, const Vec& x, const Vec& direction, double nu)
{
    const Mat hinv = metric.h_inv(x);
    const double norm = std::sqrt(direction.dot(hinv * direction));
    require(norm > 0.0, ErrorKind::Precondition, "direction must be nonzero");
    const Vec u = direction / norm;
    const double N = metric.lapse(x);
    const double b = metric.shift(x).dot(u);
    // (nu - b r)^2 = N^2 (r^2 + 1) with nu - b r > 0
    const double a = N * N - b * b;
    const double disc = N * N * (nu * nu + b * b - N * N);
    double r = disc >= 0.0 ? (std::sqrt(disc) - nu * b) / a : -1.0;
    if (r < 0.0 && r > -1e-12) r = 0.0;
    if (!(r >= 0.0) || !(nu - b * r > 0.0)) {
        std::ostringstream os;
        os.precision(17);
        os << "no future-sheet state with tau = " << nu << " along this direction at x = " << x.transpose();
        fail(ErrorKind::Domain, os.str());
    }
    PhaseState s;
    s.x = x;
    s.xi = r * u;
    s.tau = nu;
    return s;
}

std::string_view to_string(Integrator integrator)
{
    switch (integrator) {
    case Integrator::ImplicitMidpoint: return "implicit-midpoint";
    case Integrator::Composition4: return "composition4";
    case Integrator::Composition6: return "composition6";
    case Integrator::DormandPrince: return "dormand-prince";
    }
    return "?";
}

Trajectory flow(const StandardStationaryMetric& metric, const PhaseState& state, double duration,
                const FlowOptions& options)
{
    require(state.sheet == Sheet::Future, ErrorKind::Precondition, "past-sheet states are not integrated");
    require(options.record_every >= 1, ErrorKind::Precondition, "record_every must be >= 1");
    const FlowSystem system(metric);
    const int d = system.dim();
    require(state.x.size() == d && state.xi.size() == d, ErrorKind::Precondition, "state dimension mismatch");

    Trajectory out;
    const double shell0 = shell_value(metric, state);
    std::int64_t count = 0;
    State y = pack(state);
    auto observe = [&](double s, const State& current) {
        const double shell = shell_of(metric, current, d);
        out.shell_drift = std::max(out.shell_drift, std::abs(shell - shell0));
        out.tau_drift = std::max(out.tau_drift, std::abs(current.back() - state.tau));
        if (out.shell_drift > options.shell_cap) {
            std::ostringstream os;
            os.precision(17);
            os << "shell drift " << out.shell_drift << " exceeds the cap " << options.shell_cap << " at s = " << s;
            fail(ErrorKind::Integration, os.str());
        }
        const bool last = s == duration;
        if (count++ % options.record_every == 0 || last) {
            TrajectorySample sample;
            sample.s = s;
            sample.state = unpack(current, d);
            sample.shell_residual = shell;
            if (out.samples.empty() || out.samples.back().s != s) out.samples.push_back(std::move(sample));
        }
    };
    std::tie(out.steps, out.rejected) = integrate(system, y, duration, options, observe);
    return out;
}

PhaseState flow_to(const StandardStationaryMetric& metric, const PhaseState& state, double duration,
                   const FlowOptions& options)
{
    const FlowSystem system(metric);
    State y = pack(state);
    integrate(system, y, duration, options, [](double, const State&) {});
    return unpack(y, system.dim());
}

LorentzDiagnostics lorentz_diagnostics(const StandardStationaryMetric& metric, const PhaseState& state)
{
    const double B = metric.bottom_sq(state.x);
    const double nu = state.tau;
    if (!(nu > 0.0) || !(nu * nu > B)) {
        std::ostringstream os;
        os.precision(17);
        os << "nu^2 = " << nu * nu << " <= N^2 - |beta|^2 = " << B << ": the point is in the forbidden region";
        fail(ErrorKind::Domain, os.str());
    }
    LorentzDiagnostics out;
    out.nu = nu;
    out.v = std::sqrt(1.0 - B / (nu * nu));
    out.roundtrip = std::sqrt(B) / std::sqrt(1.0 - out.v * out.v);
    const double N = metric.lapse(state.x);
    const double w = nu - metric.shift(state.x).dot(state.xi);
    out.observer_speed = N * std::sqrt(state.xi.dot(metric.h_inv(state.x) * state.xi)) / w;
    return out;
}

// ---------------------------------------------------------------------------
// Period sets

std::string_view to_string(PeriodMethod method)
{
    return method == PeriodMethod::ClosedForm ? "closed-form" : "numeric";
}

std::vector<double> PeriodSet::periods() const
{
    std::vector<double> out;
    for (const auto& e : entries) out.push_back(e.period);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end(),
                          [](double a, double b) { return std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(a)); }),
              out.end());
    return out;
}

std::vector<std::pair<double, double>> PeriodSet::lifted() const
{
    std::vector<std::pair<double, double>> out;
    for (const auto& e : entries) out.emplace_back(e.period, e.affine);
    return out;
}

namespace {

std::string winding_label(const std::vector<int>& w)
{
    std::ostringstream os;
    os << "w=(";
    for (std::size_t i = 0; i < w.size(); ++i) os << (i ? "," : "") << w[i];
    os << ")";
    return os.str();
}

void add_with_negation(PeriodSet& set, double nu, double period, double affine, std::vector<int> winding,
                       std::string descriptor, double residual = 0.0)
{
    PeriodEntry e;
    e.period = period;
    e.affine = affine;
    e.action = nu * period - affine;
    e.winding = winding;
    e.descriptor = descriptor;
    e.residual = residual;
    set.entries.push_back(e);
    if (period != 0.0) {
        e.period = -period;
        e.affine = -affine;
        e.action = -e.action;
        for (int& k : e.winding) k = -k;
        e.descriptor = descriptor + " reversed";
        set.entries.push_back(std::move(e));
    }
}

void finish(PeriodSet& set)
{
    std::stable_sort(set.entries.begin(), set.entries.end(),
                     [](const PeriodEntry& a, const PeriodEntry& b) { return a.period < b.period; });
}

// Windings in [-bound, bound]^d with positive first nonzero component.
std::vector<std::vector<int>> half_windings(int d, int bound)
{
    std::vector<std::vector<int>> out;
    std::vector<int> w(static_cast<std::size_t>(d), -bound);
    while (true) {
        const auto first = std::find_if(w.begin(), w.end(), [](int k) { return k != 0; });
        if (first != w.end() && *first > 0) out.push_back(w);
        std::size_t i = 0;
        for (; i < w.size(); ++i) {
            if (++w[i] <= bound) break;
            w[i] = -bound;
        }
        if (i == w.size()) break;
    }
    return out;
}

void require_above_one(double nu)
{
    if (!(nu > 1.0)) {
        std::ostringstream os;
        os.precision(17);
        os << "nu = " << nu << " <= 1: the product ladder is empty";
        fail(ErrorKind::EmptyLadder, os.str());
    }
}

} // namespace

PeriodSet period_set_closed_form(const Surface& surface, double nu, int bound)
{
    require(bound >= 0, ErrorKind::Precondition, "bound must be >= 0");
    require_above_one(nu);
    const double root = std::sqrt(nu * nu - 1.0);
    PeriodSet set;
    set.method = PeriodMethod::ClosedForm;
    const int d = surface_dimension(surface);
    add_with_negation(set, nu, 0.0, 0.0, std::vector<int>(static_cast<std::size_t>(is_torus(surface) ? d : 1), 0),
                      "trivial");
    if (is_torus(surface)) {
        const auto lengths = torus_lengths(surface);
        for (const auto& w : half_windings(d, bound)) {
            double l2 = 0.0;
            for (int i = 0; i < d; ++i) l2 += std::pow(w[static_cast<std::size_t>(i)] * lengths[static_cast<std::size_t>(i)], 2);
            const double ell = std::sqrt(l2);
            add_with_negation(set, nu, ell * nu / root, ell / root, w, winding_label(w));
        }
    } else {
        const auto& sphere = std::get<RoundSphere>(surface);
        set.periodic_flow = true;
        const double ell = 2.0 * kPi * sphere.radius;
        for (int k = 1; k <= std::max(bound, 1); ++k)
            add_with_negation(set, nu, k * ell * nu / root, k * ell / root, {k},
                              "great circle x" + std::to_string(k) + " (all orbits periodic)");
    }
    finish(set);
    return set;
}

PeriodSet period_set_closed_form(const StandardStationaryMetric& metric, double nu, int bound)
{
    if (metric.is_product() && (!is_torus(metric.surface()) || std::holds_alternative<IdentityMetric>(metric.h_spec())))
        return period_set_closed_form(metric.surface(), nu, bound);
    require(metric.has_constant_coefficients(), ErrorKind::Precondition,
            "closed-form periods need a product metric or a constant-coefficient torus");
    require(bound >= 0, ErrorKind::Precondition, "bound must be >= 0");
    const int d = metric.surface_dim();
    const Vec origin = Vec::Zero(d);
    const double N = metric.lapse(origin);
    const double N2 = N * N;
    const Vec beta = metric.shift(origin);
    const Mat h = metric.h(origin);
    const double B = metric.bottom_sq(origin);
    if (!(nu * nu > B)) {
        std::ostringstream os;
        os.precision(17);
        os << "nu = " << nu << " <= sqrt(N^2 - |beta|^2) = " << std::sqrt(B) << ": the ladder is empty";
        fail(ErrorKind::EmptyLadder, os.str());
    }
    const auto lengths = torus_lengths(metric.surface());

    PeriodSet set;
    set.method = PeriodMethod::ClosedForm;
    add_with_negation(set, nu, 0.0, 0.0, std::vector<int>(static_cast<std::size_t>(d), 0), "trivial");
    std::vector<std::vector<int>> windings = half_windings(d, bound);
    const std::size_t half = windings.size();
    for (std::size_t i = 0; i < half; ++i) {
        auto w = windings[i];
        for (int& k : w) k = -k;
        windings.push_back(w);
    }
    for (const auto& w : windings) {
        Vec D(d);
        for (int i = 0; i < d; ++i) D[i] = w[static_cast<std::size_t>(i)] * lengths[static_cast<std::size_t>(i)];
        const double dn = std::sqrt(D.dot(h * D));
        const Vec e = D / dn;
        const double eb = e.dot(h * beta);
        const double bb = beta.dot(h * beta);
        // coordinate speed c along e with |c e + beta|_h < N
        const double c_max = -eb + std::sqrt(eb * eb + N2 - bb);
        auto level = [&](double c) {
            const Vec u = c * e + beta;
            const double W = N / std::sqrt(1.0 - u.dot(h * u) / N2);
            return W * (1.0 - beta.dot(h * u) / N2) - nu;
        };
        const int samples = 4096;
        double prev_c = 0.0, prev_f = level(0.0);
        for (int k = 1; k < samples; ++k) {
            const double c = c_max * k / samples;
            const double f = level(c);
            if ((prev_f < 0.0) != (f < 0.0)) {
                boost::uintmax_t iters = 200;
                auto tol = [](double a, double b) { return std::abs(b - a) <= 4.0 * kEps * std::max(1.0, std::abs(a)); };
                const auto br = boost::math::tools::toms748_solve(level, prev_c, c, prev_f, f, tol, iters);
                const double root = 0.5 * (br.first + br.second);
                const Vec u = root * e + beta;
                const double W = N / std::sqrt(1.0 - u.dot(h * u) / N2);
                const double T = dn / root;
                PeriodEntry entry;
                entry.period = T;
                entry.affine = T * N2 / W;
                entry.action = nu * T - entry.affine;
                entry.winding = w;
                entry.descriptor = winding_label(w);
                set.entries.push_back(entry);
                // time reversal of the same orbit
                entry.period = -T;
                entry.affine = -entry.affine;
                entry.action = -entry.action;
                entry.descriptor += " reversed";
                set.entries.push_back(std::move(entry));
            }
            prev_c = c;
            prev_f = f;
        }
    }
    finish(set);
    return set;
}

// ---------------------------------------------------------------------------
// Numeric search

namespace {

struct ReturnCandidate {
    double s = 0.0;
    double distance = 0.0;
};

double wrapped_distance(const PhaseState& a, const PhaseState& b, const std::vector<double>& lengths,
                        std::vector<int>* winding = nullptr)
{
    double dist2 = 0.0;
    if (winding) winding->assign(lengths.size(), 0);
    for (std::size_t i = 0; i < lengths.size(); ++i) {
        const auto k = static_cast<Eigen::Index>(i);
        const double delta = a.x[k] - b.x[k];
        const double turns = std::round(delta / lengths[i]);
        if (winding) (*winding)[i] = static_cast<int>(turns);
        dist2 += std::pow(delta - turns * lengths[i], 2) + std::pow(a.xi[k] - b.xi[k], 2);
    }
    return std::sqrt(dist2);
}

// Unit h^{-1} covector from hyperspherical angles, via h = L L^T.
Vec direction_from_angles(const Mat& chol, const Vec& angles, double sign)
{
    const auto d = chol.rows();
    Vec n(d);
    if (d == 1) {
        n[0] = sign;
    } else {
        double prod = 1.0;
        for (Eigen::Index i = 0; i + 1 < d; ++i) {
            n[i] = prod * std::cos(angles[i]);
            prod *= std::sin(angles[i]);
        }
        n[d - 1] = prod;
    }
    return chol * n;
}

Vec angles_from_direction(const Mat& chol, const Vec& u)
{
    const auto d = chol.rows();
    Vec n = chol.triangularView<Eigen::Lower>().solve(u);
    n.normalize();
    Vec angles = Vec::Zero(std::max<Eigen::Index>(d - 1, 0));
    for (Eigen::Index i = 0; i + 1 < d; ++i) {
        const double tail = n.tail(d - i).norm();
        if (i + 2 == d)
            angles[i] = std::atan2(n[d - 1], n[d - 2]);
        else
            angles[i] = std::acos(std::clamp(n[i] / std::max(tail, 1e-300), -1.0, 1.0));
    }
    return angles;
}

} // namespace

double min_return_distance(const StandardStationaryMetric& metric, const PhaseState& state, double min_time,
                           double max_time, const FlowOptions& options)
{
    require(max_time > min_time && min_time >= 0.0, ErrorKind::Precondition, "need 0 <= min_time < max_time");
    const FlowSystem system(metric);
    const int d = system.dim();
    const auto lengths = torus_lengths(metric.surface());
    // dt/ds is bounded below by min N^2 / w over the orbit; cover max_time generously
    double best = std::numeric_limits<double>::infinity();
    State y = pack(state);
    const auto& weights = composition_weights(options.integrator);
    MidpointStepper stepper(system);
    const double h = options.step;
    for (std::int64_t k = 0; k < 100'000'000; ++k) {
        for (double g : weights) stepper.step(y, g * h);
        const PhaseState current = unpack(y, d);
        const double elapsed = std::abs(current.t - state.t);
        if (elapsed >= min_time) best = std::min(best, wrapped_distance(current, state, lengths));
        if (elapsed >= max_time) break;
    }
    return best;
}

PeriodSet period_set_numeric(const StandardStationaryMetric& metric, double nu, int budget,
                             const NumericPeriodOptions& options)
{
    require(budget >= 0, ErrorKind::Precondition, "search budget must be >= 0");
    require(options.orbit_tol > 0.0 && options.step > 0.0 && options.max_time > 0.0, ErrorKind::Precondition,
            "orbit_tol, step and max_time must be > 0");
    require(is_torus(metric.surface()), ErrorKind::Precondition, "numeric period search needs a torus");
    PeriodSet set;
    set.method = PeriodMethod::Numeric;
    const int d = metric.surface_dim();
    add_with_negation(set, nu, 0.0, 0.0, std::vector<int>(static_cast<std::size_t>(d), 0), "trivial");
    if (budget == 0) return set;

    const FlowSystem system(metric);
    const auto lengths = torus_lengths(metric.surface());
    const Mat h = metric.h(Vec::Zero(d));
    const Mat chol = h.llt().matrixL();
    FlowOptions flow_options;
    flow_options.step = options.step;
    flow_options.integrator = Integrator::Composition4;
    const auto& weights = composition_weights(flow_options.integrator);

    // seeds: rational directions from the origin, then random positions and directions
    struct Seed {
        Vec x;
        Vec direction;
    };
    std::vector<Seed> seeds;
    {
        auto rational = half_windings(d, options.max_winding);
        const std::size_t half = rational.size();
        for (std::size_t i = 0; i < half; ++i) {
            auto w = rational[i];
            for (int& k : w) k = -k;
            rational.push_back(w);
        }
        std::stable_sort(rational.begin(), rational.end(), [](const std::vector<int>& a, const std::vector<int>& b) {
            auto l1 = [](const std::vector<int>& w) {
                int s = 0;
                for (int k : w) s += std::abs(k);
                return s;
            };
            return l1(a) < l1(b);
        });
        std::mt19937_64 rng(detail::splitmix64(options.seed));
        auto uniform = [&] { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
        for (const auto& w : rational) {
            int g = 0;
            for (int k : w) g = std::gcd(g, std::abs(k));
            if (g != 1) continue;
            Vec D(d);
            for (int i = 0; i < d; ++i) D[i] = w[static_cast<std::size_t>(i)] * lengths[static_cast<std::size_t>(i)];
            seeds.push_back({Vec::Zero(d), h * D});
        }
        const std::size_t fixed = seeds.size();
        for (std::size_t i = 0; i < fixed; ++i) {
            Vec x(d);
            for (int a = 0; a < d; ++a) x[a] = lengths[static_cast<std::size_t>(a)] * uniform();
            seeds.push_back({x, seeds[i].direction});
        }
        while (static_cast<int>(seeds.size()) < budget) {
            Vec x(d), n(d);
            std::normal_distribution<double> gauss;
            for (int a = 0; a < d; ++a) {
                x[a] = lengths[static_cast<std::size_t>(a)] * uniform();
                n[a] = gauss(rng);
            }
            seeds.push_back({x, chol * n});
        }
        if (static_cast<int>(seeds.size()) > budget) seeds.resize(static_cast<std::size_t>(budget));
    }

    auto residual = [&](const Vec& x0, const Vec& angles, double sign, double s, const std::vector<int>& winding,
                        PhaseState* end_state, PhaseState* start_state) -> Eigen::VectorXd {
        const PhaseState start = state_on_level(metric, x0, direction_from_angles(chol, angles, sign), nu);
        State y = pack(start);
        const auto steps = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(std::abs(s) / options.step)));
        const double hstep = s / static_cast<double>(steps);
        MidpointStepper stepper(system);
        for (std::int64_t k = 0; k < steps; ++k)
            for (double g : weights) stepper.step(y, g * hstep);
        const PhaseState end = unpack(y, d);
        Eigen::VectorXd r(2 * d);
        for (int i = 0; i < d; ++i) {
            r[i] = end.x[i] - start.x[i] - winding[static_cast<std::size_t>(i)] * lengths[static_cast<std::size_t>(i)];
            r[d + i] = end.xi[i] - start.xi[i];
        }
        if (end_state) *end_state = end;
        if (start_state) *start_state = start;
        return r;
    };

    for (std::size_t seed_index = 0; seed_index < seeds.size(); ++seed_index) {
        const Seed& seed = seeds[seed_index];
        PhaseState start;
        try {
            start = state_on_level(metric, seed.x, seed.direction, nu);
        } catch (const Error&) {
            continue; // seed in the forbidden region
        }

        // coarse scan for near returns
        std::vector<ReturnCandidate> candidates;
        {
            State y = pack(start);
            MidpointStepper stepper(system);
            bool left = false;
            double prev2 = 0.0, prev1 = 0.0, s = 0.0;
            for (std::int64_t k = 0;; ++k) {
                for (double g : weights) stepper.step(y, g * options.step);
                s += options.step;
                const PhaseState current = unpack(y, d);
                const double dist = wrapped_distance(current, start, lengths);
                if (dist > 2.0 * options.candidate_tol) left = true;
                if (left && k >= 2 && prev1 < options.candidate_tol && prev1 <= prev2 && prev1 <= dist)
                    candidates.push_back({s - options.step, prev1});
                prev2 = prev1;
                prev1 = dist;
                if (static_cast<int>(candidates.size()) >= options.candidates_per_seed) break;
                if (std::abs(current.t - start.t) >= options.max_time) break;
            }
        }

        const double sign = d == 1 ? (start.xi[0] >= 0.0 ? 1.0 : -1.0) : 1.0;
        Vec angles0 = angles_from_direction(chol, start.xi.norm() > 0.0 ? Vec(start.xi) : seed.direction);
        for (const auto& cand : candidates) {
            std::vector<int> winding;
            wrapped_distance(flow_to(metric, start, cand.s, flow_options), start, lengths, &winding);
            // Levenberg-Marquardt over (angles, s)
            const auto na = angles0.size();
            Eigen::VectorXd p(na + 1);
            p.head(na) = angles0;
            p[na] = cand.s;
            Eigen::VectorXd r;
            try {
                r = residual(seed.x, p.head(na), sign, p[na], winding, nullptr, nullptr);
            } catch (const Error&) {
                continue;
            }
            double mu = 1e-3;
            for (int it = 0; it < 40 && r.norm() >= 0.1 * options.orbit_tol; ++it) {
                Eigen::MatrixXd J(r.size(), na + 1);
                bool ok = true;
                for (Eigen::Index j = 0; j <= na && ok; ++j) {
                    const double delta = 1e-6 * std::max(1.0, std::abs(p[j]));
                    Eigen::VectorXd pp = p, pm = p;
                    pp[j] += delta;
                    pm[j] -= delta;
                    try {
                        J.col(j) = (residual(seed.x, pp.head(na), sign, pp[na], winding, nullptr, nullptr) -
                                    residual(seed.x, pm.head(na), sign, pm[na], winding, nullptr, nullptr)) /
                                   (2.0 * delta);
                    } catch (const Error&) {
                        ok = false;
                    }
                }
                if (!ok) break;
                const Eigen::MatrixXd JtJ = J.transpose() * J;
                const Eigen::VectorXd g = J.transpose() * r;
                bool improved = false;
                for (int tries = 0; tries < 12 && !improved; ++tries) {
                    Eigen::MatrixXd A = JtJ;
                    A.diagonal() += mu * JtJ.diagonal().cwiseMax(1e-12);
                    const Eigen::VectorXd step = A.ldlt().solve(-g);
                    const Eigen::VectorXd trial = p + step;
                    Eigen::VectorXd rt;
                    try {
                        rt = residual(seed.x, trial.head(na), sign, trial[na], winding, nullptr, nullptr);
                    } catch (const Error&) {
                        mu *= 10.0;
                        continue;
                    }
                    if (rt.norm() < r.norm()) {
                        p = trial;
                        r = rt;
                        mu = std::max(mu / 10.0, 1e-12);
                        improved = true;
                    } else {
                        mu *= 10.0;
                    }
                }
                if (!improved) break;
            }
            if (!(r.norm() < options.orbit_tol)) continue;
            PhaseState s0, s1;
            residual(seed.x, p.head(na), sign, p[na], winding, &s1, &s0);
            // report the displacement per positive coordinate time, as in the closed form
            for (int& k : winding) k = -k;
            const double period = std::abs(s1.t - s0.t);
            const double affine = std::abs(p[na]);
            const bool duplicate = std::any_of(set.entries.begin(), set.entries.end(), [&](const PeriodEntry& e) {
                return e.winding == winding && std::abs(e.period - period) < 1e-7 * std::max(1.0, period);
            });
            if (duplicate) continue;
            std::ostringstream os;
            os << winding_label(winding) << " seed " << seed_index;
            add_with_negation(set, nu, period, affine, winding, os.str(), r.norm());
        }
    }
    finish(set);
    return set;
}

} // namespace ladderlab
