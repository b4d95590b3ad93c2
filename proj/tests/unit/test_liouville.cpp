#include <doctest.h>

#include <cmath>

#include "ladderlab/error.hpp"
#include "ladderlab/ladder.hpp"
#include "ladderlab/liouville.hpp"
#include "support/oracles.hpp"

using namespace ladderlab;

namespace {

const double L = 2.0 * oracle::pi;

StandardStationaryMetric t2(FieldSpec lapse, std::vector<FieldSpec> shift = {}, int res = 64)
{
    return StandardStationaryMetric(3, FlatTorus{{L, L}, {res, res}}, lapse, std::move(shift));
}

} // namespace

TEST_SUITE("liouville")
{
    TEST_CASE("unit sphere areas")
    {
        CHECK(unit_sphere_area(1) == doctest::Approx(2.0));
        CHECK(unit_sphere_area(2) == doctest::Approx(2.0 * oracle::pi));
        CHECK(unit_sphere_area(3) == doctest::Approx(4.0 * oracle::pi));
        CHECK(unit_sphere_area(4) == doctest::Approx(2.0 * oracle::pi * oracle::pi));
    }

    TEST_CASE("product closed form")
    {
        CHECK(volume_closed_form_product(4.0 * oracle::pi * oracle::pi, std::sqrt(2.0), 3) ==
              doctest::Approx(oracle::product_t2_volume(std::sqrt(2.0))).epsilon(1e-14));
        CHECK_THROWS_AS(volume_closed_form_product(1.0, 0.9, 3), Error);
    }

    TEST_CASE("quadrature on the cosine lapse matches the exact integral")
    {
        const auto g = t2(CosineField{1.0, 0.2, 0, 1.0});
        const auto q = volume_quadrature(g, std::sqrt(2.0));
        CHECK(q.value == doctest::Approx(oracle::cosine_lapse_t2_volume(std::sqrt(2.0), 0.2)).epsilon(1e-10));
        CHECK(q.error < 1e-8 * q.value);
    }

    TEST_CASE("quadrature across a horizon")
    {
        const auto g = t2(CosineField{1.0, 0.5, 0, 1.0});
        const auto q = volume_quadrature(g, 1.2);
        CHECK(q.value == doctest::Approx(oracle::cosine_lapse_t2_volume_with_horizon(1.2, 0.5)).epsilon(1e-8));
    }

    TEST_CASE("lapse varying along the second axis")
    {
        const auto g = t2(CosineField{1.0, 0.2, 1, 1.0});
        const auto q = volume_quadrature(g, std::sqrt(2.0));
        CHECK(q.value == doctest::Approx(oracle::cosine_lapse_t2_volume(std::sqrt(2.0), 0.2)).epsilon(1e-10));
    }

    TEST_CASE("Monte Carlo agrees within three standard errors and is seeded")
    {
        const auto g = t2(CosineField{1.0, 0.5, 0, 1.0});
        MonteCarloOptions o;
        o.samples = 200000;
        const auto a = volume_montecarlo(g, 1.2, o);
        const auto b = volume_montecarlo(g, 1.2, o);
        CHECK(a.value == b.value);
        CHECK(std::abs(a.value - oracle::cosine_lapse_t2_volume_with_horizon(1.2, 0.5)) < 3.0 * a.error);
        o.seed = 99;
        CHECK(volume_montecarlo(g, 1.2, o).value != a.value);
    }

    TEST_CASE("n = 4 product torus and S^3")
    {
        const StandardStationaryMetric t3(4, FlatTorus{{L, L, L}, {8, 8, 8}}, ConstantField{1.0});
        const double nu = 1.5;
        // alpha_3 (nu^2 - 1) nu / sqrt(nu^2 - 1) Vol, alpha_3 = 4 pi
        const double expect = 4.0 * oracle::pi * std::sqrt(nu * nu - 1.0) * nu * std::pow(L, 3);
        CHECK(liouville_volume(t3, nu).value == doctest::Approx(expect).epsilon(1e-13));
        CHECK(volume_quadrature(t3, nu).value == doctest::Approx(expect).epsilon(1e-10));
        const StandardStationaryMetric s3(4, RoundSphere{3, 1.0, 16}, ConstantField{1.0});
        const double vs3 = 2.0 * oracle::pi * oracle::pi;
        CHECK(liouville_volume(s3, nu).value ==
              doctest::Approx(4.0 * oracle::pi * std::sqrt(nu * nu - 1.0) * nu * vs3).epsilon(1e-13));
        CHECK(volume_quadrature(s3, nu).value == doctest::Approx(liouville_volume(s3, nu).value).epsilon(1e-10));
    }

    TEST_CASE("sublevel ellipsoid of the product shell is a ball")
    {
        const auto g = t2(ConstantField{1.0});
        const Vec x = Vec::Zero(2);
        const auto e = sublevel_ellipsoid(g, x, 5.0, 3.0);
        REQUIRE_FALSE(e.empty);
        CHECK(e.semi_axes[0] == doctest::Approx(4.0));
        CHECK(e.semi_axes[1] == doctest::Approx(4.0));
        CHECK(e.volume == doctest::Approx(16.0 * oracle::pi));
        CHECK(sublevel_ellipsoid(g, x, 2.0, 3.0).empty);
    }

    TEST_CASE("shifted shell ellipsoid: every boundary point lies on the level")
    {
        const auto g = t2(ConstantField{1.0}, {ConstantField{0.4}, ConstantField{0.1}});
        const Vec x = Vec::Zero(2);
        const auto e = sublevel_ellipsoid(g, x, 6.0, 2.0);
        Vec along(2), across(2);
        along << 0.4, 0.1;
        along.normalize();
        across << -along(1), along(0);
        auto level = [](const Vec& xi) { return 0.4 * xi(0) + 0.1 * xi(1) + std::sqrt(xi.squaredNorm() + 4.0); };
        auto fits = [&](double a_along, double a_across) {
            return std::abs(level(e.center + a_along * along) - 6.0) < 1e-10 &&
                   std::abs(level(e.center - a_along * along) - 6.0) < 1e-10 &&
                   std::abs(level(e.center + a_across * across) - 6.0) < 1e-10;
        };
        CHECK((fits(e.semi_axes[0], e.semi_axes[1]) || fits(e.semi_axes[1], e.semi_axes[0])));
        // volume: pi a b with the closed-form semi-axes
        CHECK(e.volume == doctest::Approx(oracle::pi * e.semi_axes[0] * e.semi_axes[1]));
    }

    TEST_CASE("scaling in the mass")
    {
        const auto g = t2(CosineField{1.0, 0.2, 0, 1.0}, {}, 32);
        const double mu1 = liouville_volume_at_mass(g, std::sqrt(2.0), 1.0);
        for (double m : {2.0, 5.0, 10.0})
            CHECK(liouville_volume_at_mass(g, std::sqrt(2.0), m) / m == doctest::Approx(mu1).epsilon(1e-8));
    }

    TEST_CASE("Weyl prediction constants")
    {
        const double mu = oracle::product_t2_volume(std::sqrt(2.0));
        CHECK(weyl_prediction(mu, 0.5, 1.0, 3, WeylMode::Sharp) == doctest::Approx(2.0 * oracle::pi * std::sqrt(2.0)));
        CHECK(weyl_prediction(mu, 1.0, 10.0, 3, WeylMode::Smoothed) ==
              doctest::Approx(10.0 * mu / (4.0 * oracle::pi * oracle::pi)));
    }
}
