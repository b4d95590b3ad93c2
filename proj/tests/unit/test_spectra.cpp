#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>

#include "ladderlab/error.hpp"
#include "ladderlab/spectra.hpp"
#include "support/oracles.hpp"

using namespace ladderlab;

namespace {

const double L = 2.0 * oracle::pi;

std::int64_t total_multiplicity(const SurfaceSpectrum& s, double upto)
{
    std::int64_t t = 0;
    for (const auto& lv : s.levels)
        if (lv.omega <= upto) t += lv.multiplicity;
    return t;
}

double nearest(const std::vector<double>& set, double x)
{
    double best = 1e300;
    for (double v : set) best = std::min(best, std::abs(v - x));
    return best;
}

} // namespace

TEST_SUITE("spectra")
{
    TEST_CASE("torus Laplace levels agree with direct lattice enumeration")
    {
        const auto s = torus_laplace_spectrum({L, L}, 30.0);
        std::map<std::int64_t, std::int64_t> brute; // |k|^2 -> multiplicity
        for (int a = -31; a <= 31; ++a)
            for (int b = -31; b <= 31; ++b)
                if (a * a + b * b <= 900) ++brute[a * a + b * b];
        REQUIRE(s.levels.size() == brute.size());
        std::size_t i = 0;
        for (const auto& [k2, mult] : brute) {
            CHECK(s.levels[i].omega == doctest::Approx(std::sqrt(double(k2))).epsilon(1e-14));
            CHECK(s.levels[i].multiplicity == mult);
            ++i;
        }
        CHECK(s.count_upper(30.0) >= double(total_multiplicity(s, 30.0)));
    }

    TEST_CASE("counting bound holds beyond the cutoff")
    {
        const auto small = torus_laplace_spectrum({L, 3.0}, 1.0);
        const auto big = torus_laplace_spectrum({L, 3.0}, 80.0);
        for (double X : {5.0, 20.0, 40.0, 80.0}) CHECK(small.count_upper(X) >= double(total_multiplicity(big, X)));
    }

    TEST_CASE("sphere harmonic dimensions")
    {
        for (std::int64_t l = 0; l < 12; ++l) {
            CHECK(spherical_harmonic_dimension(2, l) == 2 * l + 1);
            CHECK(spherical_harmonic_dimension(3, l) == (l + 1) * (l + 1));
        }
        const auto s = sphere_laplace_spectrum(3, 1.0, 10.0);
        for (const auto& lv : s.levels) {
            const double l = std::round(-1.0 + std::sqrt(1.0 + lv.omega * lv.omega));
            CHECK(lv.omega == doctest::Approx(std::sqrt(l * (l + 2.0))).epsilon(1e-14));
        }
    }

    TEST_CASE("product slice: lambda = +-sqrt(m^2 + omega^2) with windowed completeness")
    {
        const auto surf = torus_laplace_spectrum({L, L}, 40.0);
        const SpectrumSlice slice = product_slice(surf, 10.0, LambdaPolicy::Window(1.5, 2.0));
        CHECK(slice.covers(13.0, 17.0));
        CHECK(slice.covers(-17.0, -13.0));
        CHECK_FALSE(slice.covers(12.0, 17.0));
        std::int64_t in_window = 0;
        for (const auto& e : slice.eigenvalues)
            if (e.lambda >= 13.0 && e.lambda <= 17.0) in_window += e.multiplicity;
        CHECK(in_window == oracle::product_t2_sharp_count(1.5, 2.0, 10.0));
        CHECK_THROWS_AS(product_slice(surf, 10.0, LambdaPolicy::Window(4.0, 3.0)), Error);
    }

    TEST_CASE("constant-shift spectrum matches the closed form")
    {
        Vec beta(2);
        beta << 0.3, 0.0;
        const auto slice = constant_shift_torus_spectrum(1.0, beta, {L, L}, 3.0, 12.0);
        const auto ref = oracle::constant_shift_t2_eigenvalues(1.0, 0.3, 0.0, 3.0, 14);
        for (const auto& e : slice.eigenvalues)
            if (std::abs(e.lambda) <= slice.complete_abs_hi) CHECK(nearest(ref, e.lambda) < 1e-12);
    }

    TEST_CASE("pencil reproduces the constant-shift closed form")
    {
        const StandardStationaryMetric g(3, FlatTorus{{L, L}, {16, 16}}, ConstantField{1.0},
                                         {ConstantField{0.3}, ConstantField{0.0}});
        PencilOptions o;
        o.basis_cutoff = 6.0;
        const auto slice = pencil_joint_spectrum(g, 2.0, o);
        CHECK(slice.max_imag < 1e-10);
        const auto ref = oracle::constant_shift_t2_eigenvalues(1.0, 0.3, 0.0, 2.0, 6);
        for (const auto& e : slice.eigenvalues) CHECK(nearest(ref, e.lambda) < 1e-8);
    }

    TEST_CASE("pencil spectrum with lapse 1 + 0.1 cos x on a circle is symmetric under lambda -> -lambda")
    {
        const StandardStationaryMetric g(2, FlatTorus{{L}, {64}}, CosineField{1.0, 0.1, 0, 1.0});
        PencilOptions o;
        o.basis_cutoff = 24.0;
        const auto slice = pencil_joint_spectrum(g, 5.0, o);
        std::vector<double> values;
        for (const auto& e : slice.eigenvalues) values.push_back(e.lambda);
        for (const auto& e : slice.eigenvalues)
            if (std::abs(e.lambda) <= slice.complete_abs_hi) CHECK(nearest(values, -e.lambda) < 1e-8);
        CHECK(slice.max_imag < 1e-8);
    }

    TEST_CASE("energy form in the product case")
    {
        CHECK(energy_form_product(3.0, 2.0) == doctest::Approx(18.0));
        CHECK_THROWS_AS(energy_form_product(1.0, -1.0), Error);
    }

    TEST_CASE("merge collects near-equal values into multiplicities")
    {
        const auto merged = merge_eigenvalues({{1.0, 1}, {1.0 + 1e-12, 2}, {2.0, 1}}, 1e-9);
        REQUIRE(merged.size() == 2);
        CHECK(merged[0].multiplicity == 3);
    }
}
