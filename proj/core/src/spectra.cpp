#include "ladderlab/spectra.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <memory>
#include <numbers>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "ladderlab/error.hpp"

namespace ladderlab {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double unit_ball_volume(int d)
{
    return std::pow(std::numbers::pi, 0.5 * d) / std::tgamma(0.5 * d + 1.0);
}

Mat identity_or(const std::optional<Mat>& m, int d)
{
    return m ? *m : Mat::Identity(d, d);
}

bool is_diagonal(const Mat& m)
{
    return (m - Mat(m.diagonal().asDiagonal())).cwiseAbs().maxCoeff() == 0.0;
}

// Upper bound on #{k in lattice : |k|_H <= X}: every cell k + [0, 2 pi / L)
// lies inside the ball of radius X + diam.
struct LatticeBound {
    double cell_volume = 1.0;
    double inv_sqrt_det = 1.0;
    double diameter = 0.0;
    int d = 1;

    LatticeBound(const std::vector<double>& lengths, const Mat& H) : d(static_cast<int>(lengths.size()))
    {
        for (int a = 0; a < d; ++a) {
            cell_volume *= kTwoPi / lengths[a];
            diameter += kTwoPi / lengths[a] * std::sqrt(H(a, a));
        }
        inv_sqrt_det = 1.0 / std::sqrt(H.determinant());
    }

    double operator()(double X) const
    {
        if (X < 0.0) return 0.0;
        return unit_ball_volume(d) * std::pow(X + diameter, d) * inv_sqrt_det / cell_volume;
    }
};

// Visits lattice covectors k = 2 pi n / L with |k|_H <= radius. When H is
// diagonal only n >= 0 is visited and the visitor receives the sign-orbit size.
template <class Visit>
void enumerate_lattice(const std::vector<double>& lengths, const Mat& H, double radius, bool reduce, Visit&& visit)
{
    const int d = static_cast<int>(lengths.size());
    const Mat h = H.inverse();
    std::vector<std::int64_t> bound(d);
    for (int a = 0; a < d; ++a)
        bound[a] = static_cast<std::int64_t>(std::floor(radius * std::sqrt(h(a, a)) * lengths[a] / kTwoPi + 1e-9));
    std::vector<std::int64_t> n(d, 0);
    Vec k = Vec::Zero(d);
    const double r2 = radius * radius * (1.0 + 1e-14);

    if (reduce) {
        // diagonal H: prune with the remaining radius
        std::function<void(int, double, std::int64_t)> rec = [&](int a, double used, std::int64_t orbit) {
            if (a == d) {
                visit(k, used, orbit);
                return;
            }
            const double step = kTwoPi / lengths[a];
            for (std::int64_t j = 0;; ++j) {
                const double ka = step * static_cast<double>(j);
                const double q = used + H(a, a) * ka * ka;
                if (q > r2) break;
                k[a] = ka;
                rec(a + 1, q, j == 0 ? orbit : 2 * orbit);
            }
            k[a] = 0.0;
        };
        rec(0, 0.0, 1);
        return;
    }
    std::function<void(int)> rec = [&](int a) {
        if (a == d) {
            const double q = k.dot(H * k);
            if (q <= r2) visit(k, q, std::int64_t{1});
            return;
        }
        for (std::int64_t j = -bound[a]; j <= bound[a]; ++j) {
            k[a] = kTwoPi * static_cast<double>(j) / lengths[a];
            rec(a + 1);
        }
    };
    rec(0);
}

double estimate_lattice_count(const std::vector<double>& lengths, const Mat& H, double radius)
{
    return LatticeBound(lengths, H)(radius);
}

void check_budget(double estimate, std::size_t budget, const std::string& what)
{
    if (estimate > static_cast<double>(budget)) {
        std::ostringstream os;
        os << what << " needs about " << estimate << " entries, over the budget of " << budget
           << "; lower the cutoff or raise the budget";
        fail(ErrorKind::Capacity, os.str());
    }
}

// Prefix multiplicities of a sorted level list, shared by count_upper closures.
std::function<double(double)> make_count_upper(const std::vector<SurfaceLevel>& levels, double cutoff,
                                               std::function<double(double)> beyond)
{
    auto omegas = std::make_shared<std::vector<double>>();
    auto prefix = std::make_shared<std::vector<double>>();
    omegas->reserve(levels.size());
    prefix->reserve(levels.size());
    double total = 0.0;
    for (const auto& l : levels) {
        total += static_cast<double>(l.multiplicity);
        omegas->push_back(l.omega);
        prefix->push_back(total);
    }
    return [omegas, prefix, cutoff, beyond = std::move(beyond)](double X) {
        if (X < 0.0) return 0.0;
        if (X <= cutoff) {
            const auto it = std::upper_bound(omegas->begin(), omegas->end(), X);
            const auto idx = static_cast<std::size_t>(it - omegas->begin());
            return idx == 0 ? 0.0 : (*prefix)[idx - 1];
        }
        return beyond(X);
    };
}

struct Window {
    double lo = 0.0;
    double hi = 0.0;
};

Window resolve_window(const LambdaPolicy& policy, double m, double guarantee)
{
    if (policy.full) return {0.0, guarantee};
    require(policy.half_width >= 0.0, ErrorKind::Precondition, "window half-width must be >= 0");
    const double center = policy.nu * m;
    Window w{std::max(0.0, center - policy.half_width), center + policy.half_width};
    if (w.hi > guarantee * (1.0 + 1e-14)) {
        std::ostringstream os;
        os.precision(17);
        os << "window |lambda| <= " << w.hi << " at m = " << m << " exceeds the completeness guarantee "
           << guarantee << "; raise the surface cutoff";
        fail(ErrorKind::Incompleteness, os.str());
    }
    return w;
}

} // namespace

// ---------------------------------------------------------------------------

SurfaceSpectrum torus_laplace_spectrum(const std::vector<double>& lengths, double cutoff, std::size_t budget,
                                       const std::optional<Mat>& h_inv)
{
    const int d = static_cast<int>(lengths.size());
    require(d >= 1, ErrorKind::Precondition, "torus needs at least one side length");
    for (double L : lengths) require(L > 0.0 && std::isfinite(L), ErrorKind::Precondition, "side lengths must be > 0");
    require(cutoff > 0.0 && std::isfinite(cutoff), ErrorKind::Precondition, "cutoff must be > 0");
    const Mat H = identity_or(h_inv, d);
    require(H.rows() == d && H.cols() == d, ErrorKind::Precondition, "h_inv must be d x d");

    const bool reduce = is_diagonal(H);
    double estimate = estimate_lattice_count(lengths, H, cutoff);
    if (reduce) estimate /= std::pow(2.0, d);
    check_budget(estimate, budget, "torus spectrum");

    std::vector<std::pair<double, std::int64_t>> raw;
    raw.reserve(static_cast<std::size_t>(estimate) + 16);
    enumerate_lattice(lengths, H, cutoff, reduce, [&](const Vec&, double q, std::int64_t orbit) {
        raw.emplace_back(q, orbit);
    });
    std::sort(raw.begin(), raw.end(), [](const auto& a, const auto& b) { return a.first < b.first; });

    SurfaceSpectrum s;
    s.cutoff = cutoff;
    for (const auto& [q, mult] : raw) {
        if (!s.levels.empty()) {
            const double prev = s.levels.back().omega * s.levels.back().omega;
            if (std::abs(q - prev) <= 1e-12 * std::max(q, 1e-300)) {
                s.levels.back().multiplicity += mult;
                continue;
            }
        }
        s.levels.push_back({std::sqrt(q), mult});
    }
    std::ostringstream os;
    os.precision(17);
    os << "flat torus L=(";
    for (int a = 0; a < d; ++a) os << (a ? "," : "") << lengths[a];
    os << ")";
    s.descriptor = os.str();
    s.count_upper = make_count_upper(s.levels, cutoff, LatticeBound(lengths, H));
    return s;
}

std::int64_t spherical_harmonic_dimension(int d, std::int64_t l)
{
    auto binom = [](std::int64_t n, std::int64_t k) -> std::int64_t {
        if (n < 0 || k < 0 || k > n) return 0;
        std::int64_t r = 1;
        for (std::int64_t i = 1; i <= k; ++i) r = r * (n - k + i) / i;
        return r;
    };
    if (l < 0) return 0;
    return binom(l + d, d) - binom(l + d - 2, d);
}

SurfaceSpectrum sphere_laplace_spectrum(int d, double radius, double cutoff, std::size_t budget)
{
    require(d >= 1, ErrorKind::Precondition, "sphere dimension must be >= 1");
    require(radius > 0.0, ErrorKind::Precondition, "sphere radius must be > 0");
    require(cutoff >= 0.0 && std::isfinite(cutoff), ErrorKind::Precondition, "cutoff must be >= 0");
    check_budget(cutoff * radius + 1.0, budget, "sphere spectrum");

    SurfaceSpectrum s;
    s.cutoff = cutoff;
    for (std::int64_t l = 0;; ++l) {
        const double omega = std::sqrt(static_cast<double>(l) * static_cast<double>(l + d - 1)) / radius;
        if (omega > cutoff) break;
        s.levels.push_back({omega, spherical_harmonic_dimension(d, l)});
    }
    std::ostringstream os;
    os.precision(17);
    os << "round sphere S^" << d << " r=" << radius;
    s.descriptor = os.str();
    // exact cumulative count: sum_{l <= L} dim H_l = C(L+d, d) + C(L+d-1, d)
    s.count_upper = [d, radius](double X) {
        if (X < 0.0) return 0.0;
        const double t = X * radius;
        // largest l with l (l + d - 1) <= t^2
        double L = std::floor(0.5 * (-(d - 1) + std::sqrt((d - 1.0) * (d - 1.0) + 4.0 * t * t)));
        while (L >= 0 && L * (L + d - 1) > t * t) L -= 1.0;
        while ((L + 1) * (L + d) <= t * t) L += 1.0;
        auto binom = [](double n, int k) {
            if (n < k) return 0.0;
            double r = 1.0;
            for (int i = 1; i <= k; ++i) r *= (n - k + i) / i;
            return r;
        };
        return binom(L + d, d) + binom(L + d - 1, d);
    };
    return s;
}

// ---------------------------------------------------------------------------

bool SpectrumSlice::covers(double lo, double hi) const
{
    if (lo > hi) return true;
    const double slack = 1e-12 * std::max({1.0, std::abs(lo), std::abs(hi)});
    const double max_abs = std::max(std::abs(lo), std::abs(hi));
    const double min_abs = (lo <= 0.0 && hi >= 0.0) ? 0.0 : std::min(std::abs(lo), std::abs(hi));
    return max_abs <= complete_abs_hi + slack && min_abs >= complete_abs_lo - slack;
}

std::string_view to_string(Backend b)
{
    switch (b) {
    case Backend::Product: return "product";
    case Backend::ConstantShift: return "constant-shift";
    case Backend::Pencil: return "pencil";
    case Backend::Synthetic: return "synthetic";
    }
    return "?";
}

const SpectrumSlice* JointSpectrum::find(double m) const
{
    auto it = std::lower_bound(slices.begin(), slices.end(), m - 1e-12,
                               [](const SpectrumSlice& s, double v) { return s.m < v; });
    if (it != slices.end() && std::abs(it->m - m) <= 1e-12 * std::max(1.0, std::abs(m))) return &*it;
    return nullptr;
}

const SpectrumSlice& JointSpectrum::at(double m) const
{
    const SpectrumSlice* s = find(m);
    if (!s) {
        std::ostringstream os;
        os.precision(17);
        os << "no spectrum slice stored for m = " << m;
        fail(ErrorKind::Incompleteness, os.str());
    }
    return *s;
}

std::vector<Eigenvalue> merge_eigenvalues(std::vector<std::pair<double, std::int64_t>> values, double tol)
{
    std::sort(values.begin(), values.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<Eigenvalue> out;
    double anchor = 0.0;
    for (const auto& [v, mult] : values) {
        if (!out.empty() && std::abs(v - anchor) <= tol * std::max(1.0, std::abs(anchor))) {
            // keep the multiplicity-weighted mean as the representative
            auto& e = out.back();
            e.lambda = (e.lambda * static_cast<double>(e.multiplicity) + v * static_cast<double>(mult)) /
                       static_cast<double>(e.multiplicity + mult);
            e.multiplicity += mult;
            continue;
        }
        out.push_back({v, mult});
        anchor = v;
    }
    return out;
}

SpectrumSlice product_slice(const SurfaceSpectrum& surf, double m, const LambdaPolicy& policy)
{
    require(m >= 0.0 && std::isfinite(m), ErrorKind::Precondition, "mass must be >= 0");
    const double guarantee = std::hypot(m, surf.cutoff);
    const Window w = resolve_window(policy, m, guarantee);

    SpectrumSlice slice;
    slice.m = m;
    slice.complete_abs_lo = w.lo;
    slice.complete_abs_hi = w.hi;

    const double wlo = std::sqrt(std::max(0.0, w.lo * w.lo - m * m));
    const double whi = std::sqrt(std::max(0.0, w.hi * w.hi - m * m));
    auto first = std::lower_bound(surf.levels.begin(), surf.levels.end(), wlo * (1.0 - 1e-15),
                                  [](const SurfaceLevel& l, double v) { return l.omega < v; });
    std::vector<Eigenvalue> positive;
    std::int64_t zero_mult = 0;
    for (auto it = first; it != surf.levels.end() && it->omega <= whi * (1.0 + 1e-15); ++it) {
        const double lambda = std::hypot(m, it->omega);
        if (lambda < w.lo || lambda > w.hi) continue;
        if (lambda == 0.0) {
            zero_mult += 2 * it->multiplicity;
            continue;
        }
        positive.push_back({lambda, it->multiplicity});
    }
    slice.eigenvalues.reserve(2 * positive.size() + 1);
    for (auto it = positive.rbegin(); it != positive.rend(); ++it) slice.eigenvalues.push_back({-it->lambda, it->multiplicity});
    if (zero_mult > 0) {
        slice.has_zero_mode = true;
        slice.eigenvalues.push_back({0.0, zero_mult});
    }
    slice.eigenvalues.insert(slice.eigenvalues.end(), positive.begin(), positive.end());
    slice.count_upper = [count = surf.count_upper, m](double L) {
        if (L < m) return 0.0;
        return 2.0 * count(std::sqrt(std::max(0.0, L * L - m * m)));
    };
    return slice;
}

JointSpectrum product_joint_spectrum(const SurfaceSpectrum& surf, int n, const std::vector<double>& masses,
                                     const LambdaPolicy& policy)
{
    JointSpectrum js;
    js.n = n;
    js.backend = Backend::Product;
    std::vector<double> ms = masses;
    std::sort(ms.begin(), ms.end());
    ms.erase(std::unique(ms.begin(), ms.end()), ms.end());
    for (double m : ms) js.slices.push_back(product_slice(surf, m, policy));
    return js;
}

SpectrumSlice constant_shift_torus_spectrum(double lapse, const Vec& beta, const std::vector<double>& lengths,
                                            double m, double cutoff, const std::optional<Mat>& h,
                                            const LambdaPolicy& policy, std::size_t budget)
{
    const int d = static_cast<int>(lengths.size());
    require(d >= 1 && beta.size() == d, ErrorKind::Precondition, "shift must have one component per torus axis");
    require(cutoff > 0.0, ErrorKind::Precondition, "cutoff must be > 0");
    require(m >= 0.0, ErrorKind::Precondition, "mass must be >= 0");
    const Mat hm = identity_or(h, d);
    const Mat H = hm.inverse();
    const double beta_norm = std::sqrt(beta.dot(hm * beta));
    if (!(lapse > beta_norm)) {
        std::ostringstream os;
        os << "N = " << lapse << " <= |beta|_h = " << beta_norm << " (Z is not timelike)";
        fail(ErrorKind::Invariant, os.str());
    }

    auto f = [&](double r) { return lapse * std::hypot(r, m) - beta_norm * r; };
    const double r_star = beta_norm * m / std::sqrt(lapse * lapse - beta_norm * beta_norm);
    const double guarantee = f(std::max(cutoff, r_star));
    const Window w = resolve_window(policy, m, guarantee);

    check_budget(estimate_lattice_count(lengths, H, cutoff), budget, "constant-shift spectrum");
    std::vector<std::pair<double, std::int64_t>> values;
    enumerate_lattice(lengths, H, cutoff, false, [&](const Vec& k, double q, std::int64_t) {
        const double drift = beta.dot(k);
        const double root = lapse * std::sqrt(q + m * m);
        for (double lambda : {drift + root, drift - root}) {
            const double a = std::abs(lambda);
            if (a >= w.lo && a <= w.hi) values.emplace_back(lambda, 1);
        }
    });

    SpectrumSlice slice;
    slice.m = m;
    slice.complete_abs_lo = w.lo;
    slice.complete_abs_hi = w.hi;
    slice.eigenvalues = merge_eigenvalues(std::move(values), 1e-12);
    for (const auto& e : slice.eigenvalues)
        if (e.lambda == 0.0) slice.has_zero_mode = true;
    const LatticeBound bound(lengths, H);
    const double gap = lapse - beta_norm;
    slice.count_upper = [bound, gap](double L) { return 2.0 * bound(L / gap); };
    return slice;
}

// ---------------------------------------------------------------------------
// Fourier-Galerkin pencil

namespace {

// Separable DFT of a real field sampled on an M_1 x ... x M_d grid, keeping
// frequencies -F_a..F_a on each axis. Output is row-major over (2F_a + 1).
std::vector<std::complex<double>> partial_dft(const std::vector<double>& samples, const std::vector<int>& M,
                                              const std::vector<int>& F)
{
    const int d = static_cast<int>(M.size());
    std::vector<int> shape = M;
    std::vector<std::complex<double>> data(samples.begin(), samples.end());
    for (int a = 0; a < d; ++a) {
        const int in_len = shape[a];
        const int out_len = 2 * F[a] + 1;
        std::size_t outer = 1, inner = 1;
        for (int b = 0; b < a; ++b) outer *= static_cast<std::size_t>(shape[b]);
        for (int b = a + 1; b < d; ++b) inner *= static_cast<std::size_t>(shape[b]);
        std::vector<std::complex<double>> table(static_cast<std::size_t>(out_len) * in_len);
        for (int q = 0; q < out_len; ++q)
            for (int p = 0; p < in_len; ++p)
                table[static_cast<std::size_t>(q) * in_len + p] =
                    std::polar(1.0 / in_len, -kTwoPi * static_cast<double>((q - F[a]) * static_cast<long>(p) % in_len) / in_len);
        std::vector<std::complex<double>> next(outer * out_len * inner);
        for (std::size_t o = 0; o < outer; ++o)
            for (int q = 0; q < out_len; ++q)
                for (std::size_t i = 0; i < inner; ++i) {
                    std::complex<double> sum = 0.0;
                    for (int p = 0; p < in_len; ++p)
                        sum += table[static_cast<std::size_t>(q) * in_len + p] * data[(o * in_len + p) * inner + i];
                    next[(o * out_len + q) * inner + i] = sum;
                }
        data.swap(next);
        shape[a] = out_len;
    }
    return data;
}

} // namespace

PencilMatrices assemble_pencil(const StandardStationaryMetric& metric, double m, const PencilOptions& options)
{
    require(is_torus(metric.surface()), ErrorKind::Precondition, "the pencil backend needs a torus surface");
    require(options.basis_cutoff > 0.0, ErrorKind::Precondition, "basis_cutoff must be > 0");
    require(m >= 0.0, ErrorKind::Precondition, "mass must be >= 0");
    const int d = metric.surface_dim();
    const auto lengths = torus_lengths(metric.surface());
    const Vec origin = Vec::Zero(d);
    const Mat H = metric.h_inv(origin);
    const double sdet = metric.sqrt_det_h(origin);

    PencilMatrices pm;
    std::vector<std::vector<int>> index;
    enumerate_lattice(lengths, H, options.basis_cutoff, false, [&](const Vec& k, double, std::int64_t) {
        pm.modes.push_back(k);
        std::vector<int> n(d);
        for (int a = 0; a < d; ++a) n[a] = static_cast<int>(std::lround(k[a] * lengths[a] / kTwoPi));
        index.push_back(n);
    });
    const int P = static_cast<int>(pm.modes.size());
    require(P > 0, ErrorKind::Precondition, "basis_cutoff admits no Fourier modes");

    std::vector<int> nmax(d, 0);
    for (const auto& n : index)
        for (int a = 0; a < d; ++a) nmax[a] = std::max(nmax[a], std::abs(n[a]));
    std::vector<int> F(d), M(d);
    for (int a = 0; a < d; ++a) {
        F[a] = 2 * nmax[a];
        M[a] = std::max({options.sample_resolution, 4 * nmax[a] + 8, 64});
    }

    // coefficient fields a, b^i, w, (w G)^{ij}
    const int nb = d, ng = d * (d + 1) / 2;
    const int nfields = 2 + nb + ng;
    std::size_t total = 1;
    for (int a = 0; a < d; ++a) total *= static_cast<std::size_t>(M[a]);
    std::vector<std::vector<double>> samples(nfields, std::vector<double>(total));
    std::vector<int> idx(d, 0);
    Vec x(d);
    for (std::size_t p = 0; p < total; ++p) {
        std::size_t rem = p;
        for (int a = d - 1; a >= 0; --a) {
            idx[a] = static_cast<int>(rem % static_cast<std::size_t>(M[a]));
            rem /= static_cast<std::size_t>(M[a]);
            x[a] = lengths[a] * idx[a] / M[a];
        }
        const double N = metric.lapse(x);
        const Vec beta = metric.shift(x);
        samples[0][p] = sdet / N;
        samples[1][p] = N * sdet;
        for (int i = 0; i < d; ++i) samples[2 + i][p] = sdet * beta[i] / N;
        int g = 0;
        for (int i = 0; i < d; ++i)
            for (int j = i; j < d; ++j, ++g)
                samples[2 + nb + g][p] = N * sdet * (H(i, j) - beta[i] * beta[j] / (N * N));
    }
    std::vector<std::vector<std::complex<double>>> coeff(nfields);
    for (int f = 0; f < nfields; ++f) coeff[f] = partial_dft(samples[f], M, F);

    auto lookup = [&](int f, const std::vector<int>& np, const std::vector<int>& nq) {
        std::size_t flat = 0;
        for (int a = 0; a < d; ++a) flat = flat * static_cast<std::size_t>(2 * F[a] + 1) + static_cast<std::size_t>(np[a] - nq[a] + F[a]);
        return coeff[f][flat];
    };
    auto gindex = [&](int i, int j) {
        if (i > j) std::swap(i, j);
        return i * d - i * (i - 1) / 2 + (j - i);
    };

    pm.a2.resize(P, P);
    pm.a1.resize(P, P);
    pm.a0.resize(P, P);
    for (int r = 0; r < P; ++r) {
        const Vec& kp = pm.modes[r];
        for (int c = 0; c < P; ++c) {
            const Vec& k = pm.modes[c];
            pm.a2(r, c) = lookup(0, index[r], index[c]);
            std::complex<double> a1 = 0.0, a0 = -m * m * lookup(1, index[r], index[c]);
            for (int i = 0; i < d; ++i) {
                a1 -= (k[i] + kp[i]) * lookup(2 + i, index[r], index[c]);
                for (int j = 0; j < d; ++j) a0 -= kp[i] * k[j] * lookup(2 + nb + gindex(i, j), index[r], index[c]);
            }
            pm.a1(r, c) = a1;
            pm.a0(r, c) = a0;
        }
    }
    // enforce exact Hermitian symmetry against DFT roundoff
    pm.a2 = 0.5 * (pm.a2 + pm.a2.adjoint()).eval();
    pm.a1 = 0.5 * (pm.a1 + pm.a1.adjoint()).eval();
    pm.a0 = 0.5 * (pm.a0 + pm.a0.adjoint()).eval();
    return pm;
}

SpectrumSlice pencil_joint_spectrum(const StandardStationaryMetric& metric, double m, const PencilOptions& options)
{
    require(options.real_tol > 0.0 && options.cluster_tol > 0.0, ErrorKind::Precondition, "tolerances must be > 0");
    const PencilMatrices pm = assemble_pencil(metric, m, options);
    const Eigen::Index P = pm.a2.rows();

    Eigen::LLT<Eigen::MatrixXcd> llt(pm.a2);
    if (llt.info() != Eigen::Success) fail(ErrorKind::Solver, "mass matrix of the pencil is not positive definite");
    const Eigen::MatrixXcd L = llt.matrixL();
    auto congruence = [&](const Eigen::MatrixXcd& A) {
        Eigen::MatrixXcd Y = L.triangularView<Eigen::Lower>().solve(A);
        return Eigen::MatrixXcd(L.triangularView<Eigen::Lower>().solve(Y.adjoint()).adjoint());
    };
    const Eigen::MatrixXcd M1 = congruence(pm.a1);
    const Eigen::MatrixXcd M0 = congruence(pm.a0);

    Eigen::MatrixXcd C = Eigen::MatrixXcd::Zero(2 * P, 2 * P);
    C.topRightCorner(P, P).setIdentity();
    C.bottomLeftCorner(P, P) = -M0;
    C.bottomRightCorner(P, P) = -M1;
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> solver(C, false);
    if (solver.info() != Eigen::Success) fail(ErrorKind::Solver, "companion eigensolver did not converge");

    SpectrumSlice slice;
    slice.m = m;
    std::vector<std::pair<double, std::int64_t>> values;
    values.reserve(static_cast<std::size_t>(2 * P));
    for (Eigen::Index i = 0; i < 2 * P; ++i) {
        const std::complex<double> z = solver.eigenvalues()[i];
        slice.max_imag = std::max(slice.max_imag, std::abs(z.imag()));
        values.emplace_back(z.real(), 1);
    }
    if (slice.max_imag >= options.real_tol) {
        std::ostringstream os;
        os << "pencil eigenvalue with |Im lambda| = " << slice.max_imag << " >= real_tol = " << options.real_tol
           << " at m = " << m << " (discretization failure or invalid metric)";
        fail(ErrorKind::NonrealSpectrum, os.str());
    }
    slice.eigenvalues = merge_eigenvalues(std::move(values), options.cluster_tol);
    for (const auto& e : slice.eigenvalues)
        if (std::abs(e.lambda) <= options.cluster_tol) slice.has_zero_mode = true;

    // Resolved range: eigenvalues generated by modes up to half the basis cutoff.
    const double r = 0.5 * options.basis_cutoff;
    double guarantee = std::numeric_limits<double>::infinity();
    for (const auto& node : metric.nodes()) {
        const double N = metric.lapse(node.x);
        const Vec b = metric.shift(node.x);
        const double bn = std::sqrt(b.dot(metric.h(node.x) * b));
        const double rs = bn * m / std::sqrt(N * N - bn * bn);
        const double rr = std::max(r, rs);
        guarantee = std::min(guarantee, N * std::hypot(rr, m) - bn * rr);
    }
    slice.complete_abs_lo = 0.0;
    slice.complete_abs_hi = guarantee;
    slice.count_upper = [total = 2.0 * static_cast<double>(P)](double) { return total; };
    return slice;
}

double energy_form_product(double lambda, double l2_norm_sq)
{
    require(l2_norm_sq >= 0.0, ErrorKind::Precondition, "squared norm must be >= 0");
    return lambda * lambda * l2_norm_sq;
}

} // namespace ladderlab
