#include "ladderlab/counting.hpp"

#include <algorithm>
#include <functional>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

#include <Eigen/Dense>

#include "ladderlab/error.hpp"
#include "quadrature.hpp"

namespace ladderlab {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

bool counted(double lambda, bool positive_only, bool zero_modes)
{
    if (lambda == 0.0) return zero_modes;
    return !positive_only || lambda > 0.0;
}

std::string describe_window(double m, double lo, double hi, const SpectrumSlice& slice)
{
    std::ostringstream os;
    os.precision(17);
    os << "window [" << lo << ", " << hi << "] at m = " << m << " is outside the completeness guarantee |lambda| in ["
       << slice.complete_abs_lo << ", " << slice.complete_abs_hi << "]";
    return os.str();
}

// Bound on sum over unstored eigenvalues of g(|lambda - center|), where g is
// nonincreasing. Shells of |lambda| beyond the stored range are bounded by the
// slice's counting bound.
template <class G>
double unstored_tail(const SpectrumSlice& slice, double center, G&& g)
{
    require(static_cast<bool>(slice.count_upper), ErrorKind::Precondition, "slice has no counting bound");
    double total = 0.0;
    const double hi = slice.complete_abs_hi;
    if (std::isfinite(hi)) {
        double r0 = 0.0, r1 = 1.0;
        for (int j = 0; j < 400; ++j) {
            const double term = g(std::max(0.0, hi + r0 - center)) * slice.count_upper(hi + r1);
            total += term;
            if (term <= 1e-30 || (j > 8 && term <= 1e-16 * total)) break;
            r0 = r1;
            r1 *= 2.0;
        }
    }
    const double lo = slice.complete_abs_lo;
    if (lo > 0.0) total += g(std::max(0.0, center - lo)) * slice.count_upper(lo);
    return total;
}

} // namespace

std::int64_t count_sharp(const SpectrumSlice& slice, double nu, double C, const CountOptions& options)
{
    require(C >= 0.0 && std::isfinite(C), ErrorKind::Precondition, "window C must be >= 0");
    require(nu > 0.0, ErrorKind::Precondition, "nu must be > 0");
    require(slice.m >= 1.0, ErrorKind::Precondition, "sharp counting needs m >= 1");
    const double lo = nu * slice.m - C, hi = nu * slice.m + C;
    if (!slice.covers(lo, hi)) fail(ErrorKind::Incompleteness, describe_window(slice.m, lo, hi, slice));
    if (options.include_negative_branch && !slice.covers(-hi, -lo))
        fail(ErrorKind::Incompleteness, describe_window(slice.m, -hi, -lo, slice));

    auto count_in = [&](double a, double b) {
        std::int64_t total = 0;
        auto it = std::lower_bound(slice.eigenvalues.begin(), slice.eigenvalues.end(), a,
                                   [](const Eigenvalue& e, double v) { return e.lambda < v; });
        for (; it != slice.eigenvalues.end() && it->lambda <= b; ++it)
            if (counted(it->lambda, false, options.include_zero_modes)) total += it->multiplicity;
        return total;
    };
    // positive branch: lambda > 0 inside [lo, hi]
    std::int64_t total = count_in(std::max(lo, std::nextafter(0.0, 1.0)), hi);
    if (options.include_zero_modes && lo <= 0.0 && hi >= 0.0) total += count_in(0.0, 0.0);
    if (options.include_negative_branch) total += count_in(-hi, std::min(-lo, -std::nextafter(0.0, 1.0)));
    return total;
}

std::int64_t count_sharp(const JointSpectrum& spectrum, double nu, double C, double m, const CountOptions& options)
{
    return count_sharp(spectrum.at(m), nu, C, options);
}

namespace {

SmoothedCount smoothed_impl(const SpectrumSlice& slice, double nu, const TestFunction& psi,
                            const SmoothedOptions& options)
{
    const double center = nu * slice.m;
    // the stored range must reach the center so that unstored eigenvalues lie in the tail
    if (!slice.covers(center, center)) fail(ErrorKind::Incompleteness, describe_window(slice.m, center, center, slice));

    detail::CompensatedSum sum;
    double beyond = 0.0; // stored eigenvalues past the sample table enter the bound instead
    const double range = psi.table_range();
    for (const auto& e : slice.eigenvalues) {
        if (!counted(e.lambda, options.positive_branch_only, options.include_zero_modes)) continue;
        const double x = e.lambda - center;
        if (std::abs(x) >= range)
            beyond += static_cast<double>(e.multiplicity) * psi.envelope(x);
        else
            sum.add(static_cast<double>(e.multiplicity) * psi(x));
    }
    SmoothedCount out;
    out.value = sum.value();
    out.tail_bound = beyond + unstored_tail(slice, center, [&](double r) { return psi.envelope(r); });
    if (!(out.tail_bound <= options.accuracy)) {
        std::ostringstream os;
        os << "tail bound " << out.tail_bound << " at m = " << slice.m << " exceeds the requested accuracy "
           << options.accuracy << "; widen the stored window";
        fail(ErrorKind::Accuracy, os.str());
    }
    return out;
}

} // namespace

SmoothedCount count_smoothed(const SpectrumSlice& slice, double nu, const TestFunction& psi,
                             const SmoothedOptions& options)
{
    require(nu > 0.0, ErrorKind::Precondition, "nu must be > 0");
    require(slice.m >= 1.0, ErrorKind::Precondition, "smoothed counting needs m >= 1");
    return smoothed_impl(slice, nu, psi, options);
}

SmoothedCount count_smoothed(const JointSpectrum& spectrum, double nu, const TestFunction& psi, double m,
                             const SmoothedOptions& options)
{
    return count_smoothed(spectrum.at(m), nu, psi, options);
}

double smoothed_half_width(const std::function<double(double)>& count_upper, double center, const TestFunction& psi,
                           double accuracy)
{
    require(static_cast<bool>(count_upper), ErrorKind::Precondition, "missing counting bound");
    require(accuracy > 0.0, ErrorKind::Precondition, "accuracy must be > 0");
    auto tail = [&](double w) {
        SpectrumSlice probe;
        probe.complete_abs_lo = std::max(0.0, center - w);
        probe.complete_abs_hi = center + w;
        probe.count_upper = count_upper;
        return unstored_tail(probe, center, [&](double r) { return psi.envelope(r); });
    };
    const double target = 0.5 * accuracy;
    double lo = 0.0, hi = 1.0;
    while (tail(hi) > target) {
        lo = hi;
        hi *= 2.0;
        if (hi > 1e7) fail(ErrorKind::Accuracy, "no finite window reaches the requested accuracy");
    }
    for (int i = 0; i < 40 && hi - lo > 1e-3 * hi; ++i) {
        const double mid = 0.5 * (lo + hi);
        (tail(mid) > target ? lo : hi) = mid;
    }
    return hi;
}

// ---------------------------------------------------------------------------

UpsilonSeries upsilon1_from_counts(const std::vector<double>& coefficients, const std::vector<double>& s_grid,
                                   double eps)
{
    require(eps > 0.0, ErrorKind::Precondition, "eps must be > 0");
    UpsilonSeries out;
    out.eps = eps;
    out.s = s_grid;
    out.coefficients = coefficients;
    out.m0_contribution = coefficients.empty() ? 0.0 : coefficients.front();
    out.values.resize(s_grid.size());
    for (std::size_t i = 0; i < s_grid.size(); ++i) {
        const std::complex<double> z = std::exp(std::complex<double>(-eps, s_grid[i]));
        std::complex<double> acc = 0.0;
        // Horner in descending m keeps the accumulation order fixed
        for (auto it = coefficients.rbegin(); it != coefficients.rend(); ++it) acc = acc * z + *it;
        out.values[i] = acc;
    }
    return out;
}

UpsilonSeries upsilon1(const JointSpectrum& spectrum, double nu, const TestFunction& psi,
                       const std::vector<double>& s_grid, int m_max, double eps, const SmoothedOptions& options)
{
    require(m_max >= 0, ErrorKind::Precondition, "m_max must be >= 0");
    require(nu > 0.0, ErrorKind::Precondition, "nu must be > 0");
    std::vector<double> c(static_cast<std::size_t>(m_max) + 1, 0.0);
    double tail = 0.0;
    for (int m = 0; m <= m_max; ++m) {
        const SmoothedCount sc = smoothed_impl(spectrum.at(m), nu, psi, options);
        c[static_cast<std::size_t>(m)] = sc.value;
        tail += sc.tail_bound;
    }
    UpsilonSeries out = upsilon1_from_counts(c, s_grid, eps);
    out.tail_bound = tail;
    return out;
}

UpsilonSeries upsilon2(const JointSpectrum& spectrum, double nu, const TestFunction& psi,
                       const std::vector<double>& s_grid, int m_max, double eps, const SmoothedOptions& options)
{
    require(m_max >= 0, ErrorKind::Precondition, "m_max must be >= 0");
    require(eps > 0.0, ErrorKind::Precondition, "eps must be > 0");
    UpsilonSeries out;
    out.eps = eps;
    out.s = s_grid;
    out.values.assign(s_grid.size(), 0.0);
    for (int m = 0; m <= m_max; ++m) {
        const SpectrumSlice& slice = spectrum.at(m);
        const double center = nu * m;
        if (!slice.covers(center, center)) fail(ErrorKind::Incompleteness, describe_window(m, center, center, slice));
        const double damping = std::exp(-eps * m);
        for (const auto& e : slice.eigenvalues) {
            if (!counted(e.lambda, options.positive_branch_only, options.include_zero_modes)) continue;
            const double w = damping * static_cast<double>(e.multiplicity) * psi(e.lambda - center);
            if (w == 0.0) continue;
            if (m == 0) out.m0_contribution += static_cast<double>(e.multiplicity) * psi(e.lambda - center);
            for (std::size_t i = 0; i < s_grid.size(); ++i) out.values[i] += w * std::polar(1.0, e.lambda * s_grid[i]);
        }
        out.tail_bound += unstored_tail(slice, center, [&](double r) { return psi.envelope(r); });
    }
    return out;
}

std::vector<double> periodic_grid(int count)
{
    require(count > 0, ErrorKind::Precondition, "grid size must be > 0");
    std::vector<double> s(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) s[static_cast<std::size_t>(i)] = kTwoPi * i / count;
    return s;
}

std::vector<std::size_t> detect_peaks(const std::vector<double>& modulus, double factor)
{
    const std::size_t n = modulus.size();
    if (n < 3) return {};
    std::vector<double> sorted = modulus;
    std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(n / 2), sorted.end());
    const double median = sorted[n / 2];
    std::vector<std::size_t> peaks;
    for (std::size_t i = 0; i < n; ++i) {
        const double left = modulus[(i + n - 1) % n], right = modulus[(i + 1) % n];
        if (modulus[i] > left && modulus[i] >= right && modulus[i] > factor * median) peaks.push_back(i);
    }
    return peaks;
}

std::vector<std::size_t> persistent_peaks(const std::vector<std::vector<double>>& moduli, double factor, int window)
{
    if (moduli.empty()) return {};
    const std::size_t n = moduli.back().size();
    std::vector<std::vector<std::size_t>> peaks;
    for (const auto& m : moduli) {
        require(m.size() == n, ErrorKind::Precondition, "all moduli must share the s-grid");
        peaks.push_back(detect_peaks(m, factor));
    }
    auto near = [&](std::size_t a, std::size_t b) {
        const std::size_t d = a > b ? a - b : b - a;
        return std::min(d, n - d) <= static_cast<std::size_t>(window);
    };
    std::vector<std::size_t> out;
    for (std::size_t p : peaks.back()) {
        bool keep = true;
        std::size_t current = p;
        // walk back toward larger eps; heights must not grow with eps
        for (std::size_t level = moduli.size() - 1; level-- > 0 && keep;) {
            std::optional<std::size_t> match;
            for (std::size_t q : peaks[level])
                if (near(q, current) && (!match || moduli[level][q] > moduli[level][*match])) match = q;
            if (!match || moduli[level][*match] > moduli[level + 1][current]) keep = false;
            else current = *match;
        }
        if (keep) out.push_back(p);
    }
    return out;
}

double circular_distance(double a, double b)
{
    double d = std::fmod(std::abs(a - b), kTwoPi);
    return std::min(d, kTwoPi - d);
}

namespace {

std::vector<double> dedupe_circle(std::vector<double> values, double tol)
{
    for (double& v : values) {
        v = std::fmod(v, kTwoPi);
        if (v < 0.0) v += kTwoPi;
        if (v >= kTwoPi - tol) v = 0.0;
    }
    std::sort(values.begin(), values.end());
    std::vector<double> out;
    for (double v : values)
        if (out.empty() || v - out.back() > tol) out.push_back(v);
    if (out.size() > 1 && circular_distance(out.front(), out.back()) <= tol) out.pop_back();
    return out;
}

} // namespace

std::vector<double> singular_support_predict(const std::vector<double>& periods, double nu,
                                             double hat_support_radius, double tol)
{
    std::vector<double> raw;
    for (double p : periods)
        if (std::abs(p) <= hat_support_radius) raw.push_back(nu * p);
    return dedupe_circle(std::move(raw), tol);
}

std::vector<double> singular_support_predict_lifted(const std::vector<std::pair<double, double>>& periods,
                                                    double nu, double hat_support_radius, double tol)
{
    std::vector<double> raw;
    for (const auto& [p, affine] : periods)
        if (std::abs(p) <= hat_support_radius) raw.push_back(nu * p - affine);
    return dedupe_circle(std::move(raw), tol);
}

// ---------------------------------------------------------------------------

WeylFit fit_weyl(const std::vector<double>& masses, const std::vector<double>& counts, int n,
                 const WeylFitOptions& options)
{
    require(masses.size() == counts.size(), ErrorKind::Precondition, "masses and counts differ in length");
    require(n >= 2, ErrorKind::Precondition, "n must be >= 2");
    std::vector<double> distinct = masses;
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    if (distinct.size() < 5) fail(ErrorKind::Fit, "need at least 5 distinct m values, got " + std::to_string(distinct.size()));
    for (double m : masses) require(m > 0.0, ErrorKind::Precondition, "fit masses must be > 0");

    const int cols = options.two_term ? 2 : 1;
    const auto rows = static_cast<Eigen::Index>(masses.size());
    Eigen::MatrixXd X(rows, cols);
    Eigen::VectorXd y(rows);
    for (Eigen::Index i = 0; i < rows; ++i) {
        const double m = masses[static_cast<std::size_t>(i)];
        const double w = options.weighted ? std::pow(m, -(n - 2)) : 1.0;
        X(i, 0) = w * std::pow(m, n - 2);
        if (cols == 2) X(i, 1) = w * std::pow(m, n - 3);
        y[i] = w * counts[static_cast<std::size_t>(i)];
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
    qr.setThreshold(1e-12);
    if (qr.rank() < cols) fail(ErrorKind::Fit, "degenerate design matrix");
    const Eigen::VectorXd beta = qr.solve(y);
    const Eigen::VectorXd r = y - X * beta;

    WeylFit fit;
    fit.points = static_cast<int>(rows);
    fit.a0 = beta[0];
    fit.a1 = cols == 2 ? beta[1] : 0.0;
    fit.residual_norm = r.norm();
    const double dof = static_cast<double>(rows - cols);
    const double sigma2 = dof > 0 ? r.squaredNorm() / dof : 0.0;
    const Eigen::MatrixXd cov = sigma2 * (X.transpose() * X).inverse();
    fit.a0_stderr = std::sqrt(std::max(0.0, cov(0, 0)));
    for (Eigen::Index i = 0; i < rows; ++i) {
        const double m = masses[static_cast<std::size_t>(i)];
        const double model = fit.a0 * std::pow(m, n - 2) + fit.a1 * std::pow(m, n - 3);
        const double raw = counts[static_cast<std::size_t>(i)] - model;
        fit.residuals.push_back(raw);
        fit.relative_residuals.push_back(model != 0.0 ? raw / model : raw);
    }
    return fit;
}

SandwichResult tauberian_sandwich(const SpectrumSlice& slice, double nu, double C, double gamma, double delta,
                                  const TestFunction& psi)
{
    require(psi.nonneg(), ErrorKind::Precondition,
            "the sandwich needs psi >= 0 with psi_hat >= 0 (use the autocorrelation profile)");
    require(std::abs(psi.hat0() - 1.0) <= 1e-12, ErrorKind::Precondition, "the sandwich needs psi_hat(0) = 1");
    require(gamma > 0.0 && gamma < C, ErrorKind::Precondition, "need 0 < gamma < C");
    require(delta > 0.0, ErrorKind::Precondition, "delta must be > 0");
    require(slice.m >= 1.0, ErrorKind::Precondition, "sandwich needs m >= 1");

    const TestFunction pd = psi.scaled(delta);
    const double center = nu * slice.m;
    SandwichResult out;
    out.count_inner = count_sharp(slice, nu, C - gamma);
    out.count_outer = count_sharp(slice, nu, C + gamma);

    // one-sided mass of psi_delta beyond r: int_r^inf psi_delta
    auto half_tail = [&](double r) { return r <= 0.0 ? 1.0 : 1.0 - pd.cumulative(r); };

    detail::CompensatedSum smoothed, outer;
    for (const auto& e : slice.eigenvalues) {
        if (!(e.lambda > 0.0)) continue;
        const double x = e.lambda - center;
        const double mult = static_cast<double>(e.multiplicity);
        smoothed.add(mult * (pd.cumulative(x + C) - pd.cumulative(x - C)));
        if (std::abs(x) > C + gamma) outer.add(mult * half_tail(std::abs(x) - C));
    }
    out.smoothed = smoothed.value();
    out.tail_bound = unstored_tail(slice, center, [&](double r) { return half_tail(r - C); });
    out.lower = static_cast<double>(out.count_inner) * (1.0 - pd.tail_mass(gamma));
    out.upper = static_cast<double>(out.count_outer) + outer.value() + out.tail_bound;
    return out;
}

ClusteringDiagnostic detect_arithmetic_clustering(const SpectrumSlice& slice, double nu, int sample,
                                                  double cv_threshold)
{
    require(sample >= 3, ErrorKind::Precondition, "need at least 3 eigenvalues to measure gaps");
    ClusteringDiagnostic out;
    out.m = slice.m;
    const double center = nu * slice.m;
    std::vector<double> positive;
    for (const auto& e : slice.eigenvalues)
        if (e.lambda > 0.0) positive.push_back(e.lambda);
    if (static_cast<int>(positive.size()) < sample) return out;
    std::sort(positive.begin(), positive.end(),
              [&](double a, double b) { return std::abs(a - center) < std::abs(b - center); });
    positive.resize(static_cast<std::size_t>(sample));
    std::sort(positive.begin(), positive.end());
    out.eigenvalues = positive;
    std::vector<double> gaps;
    for (std::size_t i = 1; i < positive.size(); ++i) gaps.push_back(positive[i] - positive[i - 1]);
    const double mean = std::accumulate(gaps.begin(), gaps.end(), 0.0) / static_cast<double>(gaps.size());
    double var = 0.0;
    for (double g : gaps) var += (g - mean) * (g - mean);
    var /= static_cast<double>(gaps.size());
    out.mean_gap = mean;
    out.gap_cv = mean > 0.0 ? std::sqrt(var) / mean : 0.0;
    out.arithmetic = out.gap_cv < cv_threshold;
    return out;
}

} // namespace ladderlab
