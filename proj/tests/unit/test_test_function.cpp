#include <doctest.h>

#include <cmath>

#include "ladderlab/error.hpp"
#include "ladderlab/test_function.hpp"
#include "support/oracles.hpp"

using namespace ladderlab;

namespace {

double bump_hat(double s, double a)
{
    const double u = s / a;
    return std::abs(u) < 1.0 ? std::exp(1.0) * std::exp(-1.0 / (1.0 - u * u)) : 0.0;
}

// (1/pi) int_0^a psi_hat(s) cos(s x) ds by composite Simpson
double inverse_transform(double x, double a, int panels = 20000)
{
    const double h = a / panels;
    double sum = bump_hat(0.0, a) + bump_hat(a, a) * std::cos(a * x);
    for (int i = 1; i < panels; ++i) sum += (i % 2 ? 4.0 : 2.0) * bump_hat(i * h, a) * std::cos(i * h * x);
    return sum * h / 3.0 / oracle::pi;
}

} // namespace

TEST_SUITE("test_function")
{
    TEST_CASE("bump transform pair against direct Fourier inversion")
    {
        const auto psi = TestFunction::bump(0.5);
        CHECK(psi.hat0() == doctest::Approx(1.0).epsilon(1e-14));
        CHECK(psi.hat(0.3) == doctest::Approx(bump_hat(0.3, 0.5)).epsilon(1e-13));
        CHECK(psi.hat(0.5) == 0.0);
        CHECK(psi.hat(0.7) == 0.0);
        for (double x : {0.0, 0.4, 1.7, 5.0, 23.0, 80.0})
            CHECK(std::abs(psi(x) - inverse_transform(x, 0.5)) < 1e-10);
    }

    TEST_CASE("even, integrates to psi_hat(0), bounded by its envelope")
    {
        const auto psi = TestFunction::bump(2.0, 1.5);
        for (double x : {0.3, 2.0, 11.0}) CHECK(psi(x) == doctest::Approx(psi(-x)).epsilon(1e-14));
        CHECK(psi.cumulative(psi.table_range()) == doctest::Approx(1.5).epsilon(1e-6));
        CHECK(psi.cumulative(0.0) == doctest::Approx(0.75).epsilon(1e-9));
        for (double r : {1.0, 10.0, 50.0})
            for (double x = r; x < r + 5.0; x += 0.1) CHECK(std::abs(psi(x)) <= psi.envelope(r) * (1.0 + 1e-9));
        const double r6 = psi.effective_radius(1e-6);
        CHECK(psi.envelope(r6) <= 1e-6);
    }

    TEST_CASE("autocorrelation profile is non-negative on both sides")
    {
        const auto psi = TestFunction::bump_autocorrelation(1.0);
        CHECK(psi.nonneg());
        CHECK(psi.hat0() == doctest::Approx(1.0).epsilon(1e-12));
        for (double s = 0.0; s < 1.0; s += 0.05) CHECK(psi.hat(s) >= 0.0);
        for (double x = 0.0; x < 200.0; x += 0.37) CHECK(psi(x) >= -1e-12);
    }

    TEST_CASE("rescaling")
    {
        const auto psi = TestFunction::bump(1.0);
        const auto p2 = psi.scaled(0.25);
        CHECK(p2(1.0) == doctest::Approx(psi(4.0) / 0.25).epsilon(1e-12));
        CHECK(p2.hat_support_radius() == doctest::Approx(4.0));
    }

    TEST_CASE("mollified indicator approaches the indicator for small delta")
    {
        const auto psi = TestFunction::bump_autocorrelation(1.0);
        CHECK(mollified_indicator(psi, 1.0, 0.01, 0.0) == doctest::Approx(1.0).epsilon(1e-3));
        CHECK(mollified_indicator(psi, 1.0, 0.01, 3.0) == doctest::Approx(0.0).epsilon(1e-3));
        CHECK(mollified_indicator(psi, 1.0, 0.01, 1.0) == doctest::Approx(0.5).epsilon(1e-3));
    }

    TEST_CASE("invalid radius")
    {
        CHECK_THROWS_AS(TestFunction::bump(0.0), Error);
        CHECK_THROWS_AS(TestFunction::bump(-1.0), Error);
    }
}
