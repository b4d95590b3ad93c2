// Acceptance checks. Usage: ladderlab_acceptance [criterion ...]; no
// arguments runs all of them. One PASS/FAIL line per criterion; the exit
// status is nonzero when any selected criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>

#include "commands.hpp"
#include "ladderlab/counting.hpp"
#include "ladderlab/dynamics.hpp"
#include "ladderlab/error.hpp"
#include "ladderlab/io.hpp"
#include "ladderlab/ladder.hpp"
#include "ladderlab/liouville.hpp"
#include "ladderlab/spectra.hpp"
#include "run_config.hpp"
#include "support/oracles.hpp"

using namespace ladderlab;
namespace fs = std::filesystem;

namespace {

const double L = 2.0 * oracle::pi;

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string num(double x, int digits = 6)
{
    std::ostringstream os;
    os.precision(digits);
    os << x;
    return os.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

StandardStationaryMetric product_t2(int res = 32)
{
    return StandardStationaryMetric(3, FlatTorus{{L, L}, {res, res}}, ConstantField{1.0});
}

StandardStationaryMetric cosine_t2(double a, int res = 64)
{
    return StandardStationaryMetric(3, FlatTorus{{L, L}, {res, res}}, CosineField{1.0, a, 0, 1.0});
}

Outcome sharp_weyl()
{
    const auto t0 = std::chrono::steady_clock::now();
    SliceBuilder builder(product_t2());
    VerifyOptions o;
    o.nu = std::sqrt(2.0);
    o.C = 0.5;
    for (int m = 50; m <= 200; m += 10) o.masses.push_back(m);
    const LadderReport r = verify_weyl(builder, o);
    const double expected = 4.0 * oracle::pi * o.C * o.nu;
    const double rel = std::abs(r.fit.a0 - expected) / expected;
    const double t = seconds_since(t0);
    return {rel < 0.05 && t < 30.0 && r.verdict == Verdict::Pass,
            "fitted slope " + num(r.fit.a0) + " vs " + num(expected) + ", relative error " + num(rel, 3) +
                ", verdict " + std::string(to_string(r.verdict)) + ", " + num(t, 3) + " s"};
}

Outcome smoothed_weyl()
{
    SliceBuilder builder(product_t2());
    VerifyOptions o;
    o.nu = std::sqrt(2.0);
    o.mode = WeylMode::Smoothed;
    o.psi = TestFunction::bump(0.5, 1.0);
    for (int m = 100; m <= 200; m += 10) o.masses.push_back(m);
    const LadderReport r = verify_weyl(builder, o);
    const double a0 = oracle::product_t2_volume(o.nu) / (4.0 * oracle::pi * oracle::pi);
    double deviation = 0.0;
    std::vector<double> logm, logr;
    for (std::size_t i = 0; i < r.masses.size(); ++i) {
        const double m = r.masses[i];
        deviation += std::abs(r.counts[i] / m - a0) / a0;
        logm.push_back(std::log(m));
        logr.push_back(std::log(std::abs(r.counts[i] - a0 * m)));
    }
    deviation /= double(r.masses.size());
    const double slope = oracle::slope(logm, logr);
    return {deviation < 0.02 && slope < 0.7,
            "mean relative deviation of N/m from " + num(a0) + ": " + num(deviation, 3) +
                ", log-residual slope " + num(slope, 3)};
}

Outcome volume_agreement()
{
    const auto t0 = std::chrono::steady_clock::now();
    const double nu = std::sqrt(2.0);
    const double exact = 8.0 * std::sqrt(2.0) * std::pow(oracle::pi, 3);
    const auto g = product_t2(64);
    const double closed = liouville_volume(g, nu).value;
    const VolumeResult q = volume_quadrature(g, nu);
    MonteCarloOptions mo;
    mo.samples = 1'000'000;
    mo.seed = 20240601;
    const VolumeResult mc = volume_montecarlo(g, nu, mo);

    const auto h = cosine_t2(0.2);
    const VolumeResult hq = volume_quadrature(h, nu);
    const VolumeResult hmc = volume_montecarlo(h, nu, mo);
    const double sigma = std::hypot(hq.error, hmc.error);
    const double t = seconds_since(t0);

    const bool ok = std::abs(closed - exact) <= 1e-12 * exact && std::abs(q.value - exact) <= 1e-8 * exact &&
                    std::abs(mc.value - exact) <= 3.0 * mc.error && std::abs(hq.value - hmc.value) <= 3.0 * sigma &&
                    t < 10.0;
    return {ok, "product: closed " + num(closed, 12) + ", quadrature " + num(q.value, 12) + ", Monte Carlo " +
                    num(mc.value, 12) + " +- " + num(mc.error, 2) + "; cosine lapse: quadrature " + num(hq.value, 10) +
                    ", Monte Carlo " + num(hmc.value, 10) + " +- " + num(hmc.error, 2) + "; " + num(t, 3) + " s"};
}

Outcome scaling_law()
{
    double worst = 0.0;
    for (const auto& g : {product_t2(32), cosine_t2(0.2, 32)}) {
        const double mu1 = liouville_volume_at_mass(g, std::sqrt(2.0), 1.0);
        for (double m : {2.0, 5.0, 10.0}) {
            const double rel = std::abs(liouville_volume_at_mass(g, std::sqrt(2.0), m) / m - mu1) / mu1;
            worst = std::max(worst, rel);
        }
    }
    return {worst < 1e-8, "largest relative deviation from m^{n-2} scaling " + num(worst, 3)};
}

Outcome pencil_closed_form()
{
    const StandardStationaryMetric g(3, FlatTorus{{L, L}, {16, 16}}, ConstantField{1.0},
                                     {ConstantField{0.3}, ConstantField{0.0}});
    PencilOptions o;
    const double K = o.basis_cutoff;
    double worst = 0.0, max_imag = 0.0;
    bool counts_match = true;
    for (int m = 1; m <= 10; ++m) {
        const SpectrumSlice slice = pencil_joint_spectrum(g, m, o);
        max_imag = std::max(max_imag, slice.max_imag);
        // closed-form values of the whole Galerkin basis, and of the modes |k| <= K / 2
        std::vector<double> basis, inner;
        for (int a = -int(K); a <= int(K); ++a)
            for (int b = -int(K); b <= int(K); ++b) {
                const double k2 = double(a * a + b * b);
                if (k2 > K * K) continue;
                for (double sign : {-1.0, 1.0}) {
                    const double v = 0.3 * a + sign * std::sqrt(k2 + double(m * m));
                    basis.push_back(v);
                    if (k2 <= K * K / 4.0) inner.push_back(v);
                }
            }
        std::int64_t stored = 0;
        for (const auto& e : slice.eigenvalues) stored += e.multiplicity;
        counts_match = counts_match && stored == static_cast<std::int64_t>(basis.size());
        for (double v : inner) {
            const Eigenvalue* best = nullptr;
            for (const auto& e : slice.eigenvalues)
                if (!best || std::abs(e.lambda - v) < std::abs(best->lambda - v)) best = &e;
            worst = std::max(worst, std::abs(best->lambda - v));
            const auto degeneracy =
                std::count_if(basis.begin(), basis.end(), [&](double u) { return std::abs(u - v) < 1e-7; });
            counts_match = counts_match && best->multiplicity == degeneracy;
        }
    }
    return {worst < 1e-8 && max_imag < 1e-10 && counts_match,
            "largest distance to beta.k +- sqrt(|k|^2 + m^2) over |k| <= " + num(K / 2.0) + ": " + num(worst, 3) +
                ", largest |Im| " + num(max_imag, 3) + ", multiplicities " + (counts_match ? "match" : "differ")};
}

Outcome sphere_clustering()
{
    const StandardStationaryMetric s3(4, RoundSphere{3, 1.0, 16}, ConstantField{1.0});
    SliceBuilder builder(s3);
    VerifyOptions o;
    o.nu = std::sqrt(2.0);
    o.C = 0.5;
    for (int m = 50; m <= 200; m += 10) o.masses.push_back(m);
    const LadderReport r = verify_weyl(builder, o);
    std::size_t flagged = 0;
    for (const auto& c : r.clustering) flagged += c.arithmetic;
    return {r.verdict == Verdict::InconclusiveClustering && !r.residual_decays && flagged > 0,
            "verdict " + std::string(to_string(r.verdict)) + ", arithmetic progressions at " +
                std::to_string(flagged) + "/" + std::to_string(r.clustering.size()) +
                " masses, pinned residual ratio " + num(r.residual_decay_ratio, 3)};
}

Outcome singular_support()
{
    const double nu = std::sqrt(3.0);
    const int m_max = 300, grid_size = 4096;
    // psi_hat must be O(1) at the shortest period 2 pi nu / sqrt(nu^2 - 1) ~ 7.70
    const TestFunction psi = TestFunction::bump(12.0);
    SliceBuilder builder(product_t2());
    JointSpectrum spectrum;
    spectrum.n = 3;
    spectrum.backend = builder.backend();
    for (int m = 0; m <= m_max; ++m) {
        const double w = smoothed_half_width(builder.count_upper(m), nu * m, psi, 1e-6);
        spectrum.slices.push_back(builder.build_window(m, nu, w));
    }
    const auto grid = periodic_grid(grid_size);
    const double cell = 2.0 * oracle::pi / grid_size;
    std::vector<std::vector<double>> moduli;
    for (double eps : {0.1, 0.05, 0.02}) {
        const UpsilonSeries u = upsilon1(spectrum, nu, psi, grid, m_max, eps);
        std::vector<double> mod;
        for (const auto& v : u.values) mod.push_back(std::abs(v));
        moduli.push_back(std::move(mod));
    }
    const auto peaks = persistent_peaks(moduli, 3.0, static_cast<int>(std::ceil(0.05 / cell)));

    // periods from the straight-line orbits of the flat torus, independent of the library
    std::vector<double> periods;
    for (int a = -3; a <= 3; ++a)
        for (int b = -3; b <= 3; ++b) periods.push_back(L * std::hypot(a, b) * nu / std::sqrt(nu * nu - 1.0));
    const auto predicted = singular_support_predict(periods, nu, psi.hat_support_radius());

    bool all_near = true, found_0762 = false;
    std::string where;
    for (std::size_t i : peaks) {
        double best = 1e300;
        for (double p : predicted) best = std::min(best, circular_distance(grid[i], p));
        all_near = all_near && best <= cell;
        found_0762 = found_0762 || circular_distance(grid[i], 0.7626) <= cell;
        where += (where.empty() ? "" : ", ") + num(grid[i], 5);
    }
    std::string expected;
    for (double p : predicted) expected += (expected.empty() ? "" : ", ") + num(p, 5);
    return {all_near && found_0762, "persistent peaks at {" + where + "}; nu s' mod 2 pi at {" + expected +
                                        "}; peak near 0.7626 " + (found_0762 ? "found" : "absent")};
}

Outcome conservation()
{
    const auto g = cosine_t2(0.1, 32);
    Vec x(2), dir(2);
    x << 0.3, 1.1;
    dir << 0.6, 0.8;
    const PhaseState s = state_on_level(g, x, dir, 1.5);
    FlowOptions o;
    const Trajectory traj = flow(g, s, 100.0, o);
    double lorentz = 0.0;
    for (const auto& sample : traj.samples) {
        const auto d = lorentz_diagnostics(g, sample.state);
        lorentz = std::max(lorentz, std::abs(d.roundtrip - d.nu));
    }
    const PhaseState back = flow_to(g, traj.samples.back().state, -100.0, o);
    const double reversal = (back.x - s.x).norm() + (back.xi - s.xi).norm() + std::abs(back.t - s.t);
    return {traj.shell_drift < 1e-9 && traj.tau_drift < 1e-9 && reversal < 1e-8 && lorentz < 1e-10,
            "shell drift " + num(traj.shell_drift, 3) + ", p_Z drift " + num(traj.tau_drift, 3) + ", reversal " +
                num(reversal, 3) + ", Lorentz round trip " + num(lorentz, 3)};
}

Outcome admissibility()
{
    const auto p = product_t2();
    bool ok = true;
    for (double nu : {0.3, 0.9, 0.999999, 1.0, 1.000001, 1.1, 2.0, 10.0}) {
        const auto v = classify_admissibility(p, nu).verdict;
        const auto want = nu > 1.0 ? Admissibility::Admissible
                                   : (nu == 1.0 ? Admissibility::CriticalLevel : Admissibility::EmptyLadder);
        ok = ok && v == want;
    }
    const auto c = cosine_t2(0.2);
    const bool crit = classify_admissibility(c, 0.8).verdict == Admissibility::CriticalLevel &&
                      classify_admissibility(c, 1.2).verdict == Admissibility::CriticalLevel &&
                      classify_admissibility(c, 1.0).verdict == Admissibility::Admissible;
    return {ok && crit, std::string("product levels ") + (ok ? "classified as expected" : "misclassified") +
                            "; cosine lapse critical at 0.8 and 1.2: " + (crit ? "yes" : "no")};
}

Outcome oracle_equivalence()
{
    std::mt19937_64 rng(31337);
    std::uniform_real_distribution<double> unu(1.001, 3.0), uc(0.01, 3.0);
    std::uniform_int_distribution<int> um(1, 80);
    SliceBuilder builder(product_t2());
    int mismatches = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const double nu = unu(rng), C = uc(rng), m = um(rng);
        const SpectrumSlice slice = builder.build_window(m, nu, C);
        if (count_sharp(slice, nu, C) != oracle::product_t2_sharp_count(nu, C, m)) ++mismatches;
    }
    return {mismatches == 0, std::to_string(mismatches) + " mismatches in 1000 random (nu, C, m)"};
}

std::map<std::string, std::string> snapshot(const fs::path& dir)
{
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(dir))
        if (e.is_regular_file()) out[fs::relative(e.path(), dir).string()] = read_file(e.path());
    return out;
}

Outcome determinism()
{
    const fs::path root = fs::temp_directory_path() / "ladderlab_acceptance_determinism";
    fs::remove_all(root);
    auto run = [&](const std::string& tag, const std::string& cache) {
        cli::RunConfig c = cli::default_config();
        c.out_dir = (root / tag).string();
        c.cache_dir = (root / cache).string();
        c.masses = {20, 30, 40, 50, 60};
        c.m_max = 60;
        c.s_grid = 512;
        c.psi.hat_radius = 2.0;
        c.volume.samples = 100000;
        c.flow.duration = 10.0;
        c.seed = 99;
        std::ostringstream out, log;
        cli::cmd_verify_weyl(c, out, log);
        cli::cmd_volume(c, out, log);
        cli::cmd_upsilon(c, out, log);
        cli::cmd_flow(c, out, log);
        cli::cmd_periods(c, out, log);
        c.mode = "smoothed";
        c.format = "json";
        cli::cmd_count(c, out, log);
        cli::cmd_spectrum(c, out, log);
        return snapshot(root / tag);
    };
    const auto a = run("first", "cache_a");
    const auto b = run("second", "cache_b"); // fresh cache
    const auto c = run("third", "cache_a");  // warm cache
    const auto cache_a = snapshot(root / "cache_a"), cache_b = snapshot(root / "cache_b");
    fs::remove_all(root);
    const bool same = a == b && a == c && cache_a == cache_b;
    return {same && !a.empty(), std::to_string(a.size()) + " output files, " + std::to_string(cache_a.size()) +
                                    " cache files; byte-identical across runs: " + (same ? "yes" : "no")};
}

} // namespace

int main(int argc, char** argv)
{
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"sharp Weyl law", sharp_weyl},
        {"smoothed Weyl law", smoothed_weyl},
        {"Liouville volume three-way agreement", volume_agreement},
        {"mass scaling of the Liouville volume", scaling_law},
        {"pencil vs closed form", pencil_closed_form},
        {"sphere clustering", sphere_clustering},
        {"singular support", singular_support},
        {"conservation and flow properties", conservation},
        {"admissibility", admissibility},
        {"oracle equivalence", oracle_equivalence},
        {"determinism", determinism},
    };
    std::vector<int> selected;
    for (int i = 1; i < argc; ++i) selected.push_back(std::atoi(argv[i]));
    if (selected.empty())
        for (int i = 1; i <= static_cast<int>(criteria.size()); ++i) selected.push_back(i);

    int failures = 0;
    for (int k : selected) {
        if (k < 1 || k > static_cast<int>(criteria.size())) {
            std::printf("criterion %d: unknown\n", k);
            ++failures;
            continue;
        }
        const auto& [name, check] = criteria[static_cast<std::size_t>(k - 1)];
        Outcome o;
        try {
            o = check();
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        std::printf("criterion %2d %-38s %s  %s\n", k, name.c_str(), o.pass ? "PASS" : "FAIL", o.detail.c_str());
        std::fflush(stdout);
        failures += o.pass ? 0 : 1;
    }
    return failures == 0 ? 0 : 1;
}
