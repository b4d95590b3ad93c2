#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "ladderlab/dynamics.hpp"
#include "ladderlab/error.hpp"
#include "support/oracles.hpp"

using namespace ladderlab;

namespace {

const double L = 2.0 * oracle::pi;

StandardStationaryMetric t2(FieldSpec lapse, std::vector<FieldSpec> shift = {})
{
    return StandardStationaryMetric(3, FlatTorus{{L, L}, {32, 32}}, lapse, std::move(shift));
}

Vec vec2(double a, double b)
{
    Vec v(2);
    v << a, b;
    return v;
}

// coordinate-time period of the x_1-axis orbit for lapse N(x_1), zero shift:
// |dx/dt| = N sqrt(nu^2 - N^2) / nu
double axis_period(double nu, double a, int panels = 20000)
{
    auto f = [&](double x) {
        const double N = 1.0 + a * std::cos(x);
        return nu / (N * std::sqrt(nu * nu - N * N));
    };
    const double h = L / panels;
    double s = f(0.0) + f(L);
    for (int i = 1; i < panels; ++i) s += (i % 2 ? 4.0 : 2.0) * f(i * h);
    return s * h / 3.0;
}

bool contains_period(const PeriodSet& set, double p, double tol)
{
    return std::any_of(set.entries.begin(), set.entries.end(),
                       [&](const PeriodEntry& e) { return std::abs(e.period - p) < tol; });
}

} // namespace

TEST_SUITE("dynamics")
{
    TEST_CASE("state on a level lies on the mass shell")
    {
        const auto g = t2(CosineField{1.0, 0.1, 0, 1.0}, {ConstantField{0.2}, ConstantField{0.0}});
        const PhaseState s = state_on_level(g, vec2(0.3, 1.0), vec2(0.6, 0.8), 2.0);
        CHECK(s.tau == doctest::Approx(2.0));
        CHECK(std::abs(shell_value(g, s)) < 1e-13);
        CHECK(mass_shell_tau(g, s.x, s.xi) == doctest::Approx(2.0).epsilon(1e-14));
        CHECK_THROWS_AS(state_on_level(g, vec2(0.0, 0.0), vec2(1.0, 0.0), 0.5), Error);
    }

    TEST_CASE("straight orbits on the product torus close after the expected period")
    {
        const auto g = t2(ConstantField{1.0});
        const double nu = std::sqrt(3.0);
        const PhaseState s = state_on_level(g, vec2(0.0, 0.0), vec2(1.0, 0.0), nu);
        const double affine = L / std::sqrt(nu * nu - 1.0);
        const PhaseState e = flow_to(g, s, affine);
        CHECK(e.x(0) == doctest::Approx(L).epsilon(1e-10));
        CHECK(std::abs(e.x(1)) < 1e-12);
        // coordinate time runs backwards along the affine parameter on the future sheet
        CHECK(e.t == doctest::Approx(-L * nu / std::sqrt(nu * nu - 1.0)).epsilon(1e-10));
    }

    TEST_CASE("conservation on a cosine lapse")
    {
        const auto g = t2(CosineField{1.0, 0.1, 0, 1.0});
        const PhaseState s = state_on_level(g, vec2(0.3, 1.1), vec2(0.6, 0.8), 3.0);
        FlowOptions o;
        o.integrator = Integrator::Composition6;
        o.record_every = 50;
        const auto traj = flow(g, s, 100.0, o);
        CHECK(traj.shell_drift < 1e-9);
        CHECK(traj.tau_drift < 1e-12);
        const PhaseState back = flow_to(g, traj.samples.back().state, -100.0, o);
        CHECK((back.x - s.x).norm() + (back.xi - s.xi).norm() < 1e-8);
    }

    TEST_CASE("the shell cap stops an inaccurate integration")
    {
        const auto g = t2(CosineField{1.0, 0.1, 0, 1.0});
        const PhaseState s = state_on_level(g, vec2(0.3, 1.1), vec2(0.6, 0.8), 3.0);
        FlowOptions o;
        o.integrator = Integrator::ImplicitMidpoint;
        o.step = 0.2;
        o.shell_cap = 1e-10;
        CHECK_THROWS_AS(flow(g, s, 50.0, o), Error);
    }

    TEST_CASE("adaptive Dormand-Prince agrees with the composition method")
    {
        const auto g = t2(CosineField{1.0, 0.1, 0, 1.0});
        const PhaseState s = state_on_level(g, vec2(0.3, 1.1), vec2(0.6, 0.8), 1.5);
        FlowOptions a, b;
        b.integrator = Integrator::DormandPrince;
        const PhaseState ea = flow_to(g, s, 10.0, a), eb = flow_to(g, s, 10.0, b);
        CHECK((ea.x - eb.x).norm() < 1e-8);
        CHECK(ea.t == doctest::Approx(eb.t).epsilon(1e-9));
    }

    TEST_CASE("Lorentz factor identities")
    {
        const auto g = t2(CosineField{1.0, 0.1, 0, 1.0});
        const PhaseState s = state_on_level(g, vec2(0.3, 1.1), vec2(0.6, 0.8), 1.5);
        const auto traj = flow(g, s, 20.0);
        for (const auto& sample : traj.samples) {
            const auto d = lorentz_diagnostics(g, sample.state);
            const double N = g.lapse(sample.state.x);
            CHECK(d.v == doctest::Approx(std::sqrt(1.0 - N * N / 2.25)).epsilon(1e-12));
            CHECK(std::abs(d.roundtrip - d.nu) < 1e-10);
            CHECK(d.observer_speed == doctest::Approx(d.v).epsilon(1e-9));
        }
    }

    TEST_CASE("closed-form periods of the product torus")
    {
        const double nu = std::sqrt(3.0);
        const auto set = period_set_closed_form(FlatTorus{{L, L}, {8, 8}}, nu, 1);
        const double unit = L * nu / std::sqrt(nu * nu - 1.0);
        CHECK(contains_period(set, unit, 1e-12));
        CHECK(contains_period(set, -unit, 1e-12));
        CHECK(contains_period(set, std::sqrt(2.0) * unit, 1e-12));
        for (const auto& e : set.entries) {
            CHECK(e.affine == doctest::Approx(e.period / nu).epsilon(1e-14));
            CHECK(e.action == doctest::Approx(nu * e.period - e.affine).epsilon(1e-14));
        }
        CHECK_THROWS_AS(period_set_closed_form(FlatTorus{{L, L}, {8, 8}}, 0.9, 1), Error);
    }

    TEST_CASE("sphere periods")
    {
        const double nu = 2.0;
        const auto set = period_set_closed_form(RoundSphere{2, 1.5, 8}, nu, 3);
        CHECK(set.periodic_flow);
        CHECK(contains_period(set, 2.0 * oracle::pi * 1.5 * nu / std::sqrt(3.0), 1e-12));
    }

    TEST_CASE("constant shift: closed form against the one-dimensional orbit")
    {
        const auto g = t2(ConstantField{1.0}, {ConstantField{0.3}, ConstantField{0.0}});
        const double nu = 2.0, b = 0.3;
        const auto set = period_set_closed_form(g, nu, 3);
        // nu = b xi + sqrt(xi^2 + 1): (1 - b^2) xi^2 + 2 b nu xi + 1 - nu^2 = 0
        for (double sign : {-1.0, 1.0}) {
            const double A = 1.0 - b * b, B = 2.0 * b * nu, C = 1.0 - nu * nu;
            const double xi = (-B + sign * std::sqrt(B * B - 4.0 * A * C)) / (2.0 * A);
            const double w = nu - b * xi;
            const double speed = std::abs((xi + w * b) / w);
            CHECK(contains_period(set, L / speed, 1e-9));
        }
        const auto numeric = period_set_numeric(g, nu, 8);
        for (const auto& e : numeric.entries)
            if (e.period > 0.0) CHECK(contains_period(set, e.period, 1e-7));
    }

    TEST_CASE("numeric period of the axis orbit for a cosine lapse")
    {
        const auto g = t2(CosineField{1.0, 0.1, 0, 1.0});
        const auto set = period_set_numeric(g, 3.0, 6);
        CHECK(contains_period(set, axis_period(3.0, 0.1), 1e-7));
    }

    TEST_CASE("irrational directions do not return quickly")
    {
        const auto g = t2(ConstantField{1.0});
        const PhaseState s = state_on_level(g, vec2(0.0, 0.0), vec2(1.0, std::sqrt(2.0) - 1.0), 2.0);
        CHECK(min_return_distance(g, s, 1.0, 30.0) > 0.1);
    }
}
