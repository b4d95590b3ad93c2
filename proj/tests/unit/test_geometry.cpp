#include <doctest.h>

#include <cmath>
#include <nlohmann/json.hpp>

#include "ladderlab/error.hpp"
#include "ladderlab/geometry.hpp"
#include "support/oracles.hpp"

using namespace ladderlab;

namespace {

StandardStationaryMetric torus2(FieldSpec lapse, std::vector<FieldSpec> shift = {}, int res = 64)
{
    const double L = 2.0 * oracle::pi;
    return StandardStationaryMetric(3, FlatTorus{{L, L}, {res, res}}, lapse, std::move(shift));
}

ErrorKind kind_of(auto&& f)
{
    try {
        f();
    } catch (const Error& e) {
        return e.kind();
    }
    FAIL("expected an error");
    return ErrorKind::Domain;
}

} // namespace

TEST_SUITE("geometry")
{
    TEST_CASE("lapse and shift evaluate from their specifications")
    {
        const auto g = torus2(CosineField{1.0, 0.2, 0, 1.0}, {ConstantField{0.3}, ConstantField{0.0}});
        Vec x(2);
        x << 0.7, 2.0;
        CHECK(g.lapse(x) == doctest::Approx(1.0 + 0.2 * std::cos(0.7)).epsilon(1e-15));
        CHECK(g.lapse_gradient(x)(0) == doctest::Approx(-0.2 * std::sin(0.7)).epsilon(1e-14));
        CHECK(g.bottom_sq(x) == doctest::Approx(std::pow(1.0 + 0.2 * std::cos(0.7), 2) - 0.09).epsilon(1e-14));
        CHECK(killing_norm(g, x) == doctest::Approx(-g.bottom_sq(x)));
        CHECK_FALSE(g.is_product());
        CHECK(torus2(ConstantField{1.0}).is_product());
    }

    TEST_CASE("a shift that makes Z spacelike is rejected")
    {
        CHECK(kind_of([] { torus2(ConstantField{1.0}, {ConstantField{1.0}, ConstantField{0.2}}); }) ==
              ErrorKind::Invariant);
        CHECK(kind_of([] { torus2(CosineField{0.5, 0.6, 0, 1.0}); }) == ErrorKind::Invariant);
    }

    TEST_CASE("co-metric is the inverse of g + dtheta^2 written out by hand")
    {
        const auto g = torus2(CosineField{1.0, 0.2, 1, 1.0}, {ConstantField{0.3}, ConstantField{-0.1}});
        Vec x(2);
        x << 1.3, 0.4;
        const double N = 1.0 + 0.2 * std::cos(0.4);
        const double b1 = 0.3, b2 = -0.1;
        Mat G = Mat::Zero(4, 4);
        G(0, 0) = -N * N + b1 * b1 + b2 * b2;
        G(0, 1) = G(1, 0) = b1;
        G(0, 2) = G(2, 0) = b2;
        G(1, 1) = G(2, 2) = 1.0;
        G(3, 3) = 1.0;
        CHECK((forward_metric_at(g, x) - G).norm() < 1e-14);
        CHECK((co_metric_at(g, x) * G - Mat::Identity(4, 4)).norm() < 1e-13);
        CHECK(co_metric_at(g, x)(3, 3) == doctest::Approx(1.0));
    }

    TEST_CASE("product metrics are admissible exactly above 1")
    {
        const auto g = torus2(ConstantField{1.0});
        CHECK(classify_admissibility(g, 0.5).verdict == Admissibility::EmptyLadder);
        CHECK(classify_admissibility(g, 0.999).verdict == Admissibility::EmptyLadder);
        CHECK(classify_admissibility(g, 1.0).verdict == Admissibility::CriticalLevel);
        CHECK(classify_admissibility(g, 1.001).verdict == Admissibility::Admissible);
        CHECK(classify_admissibility(g, 7.0).verdict == Admissibility::Admissible);
    }

    TEST_CASE("cosine lapse has critical values at its extrema")
    {
        const auto g = torus2(CosineField{1.0, 0.2, 0, 1.0});
        const auto r = classify_admissibility(g, 1.0);
        CHECK(r.verdict == Admissibility::Admissible);
        CHECK(r.bottom_min == doctest::Approx(0.8).epsilon(1e-12));
        CHECK(r.bottom_max == doctest::Approx(1.2).epsilon(1e-12));
        CHECK(classify_admissibility(g, 0.8).verdict == Admissibility::CriticalLevel);
        CHECK(classify_admissibility(g, 1.2).verdict == Admissibility::CriticalLevel);
        CHECK(classify_admissibility(g, 0.7).verdict == Admissibility::EmptyLadder);
        CHECK(classify_admissibility(g, 1.3).verdict == Admissibility::Admissible);
    }

    TEST_CASE("allowed region fraction matches the measure of cos x < (nu - 1)/a")
    {
        const auto g = torus2(CosineField{1.0, 0.5, 0, 1.0}, {}, 512);
        const auto region = allowed_region(g, 1.2);
        const double exact = 1.0 - std::acos(0.4) / oracle::pi;
        CHECK(region.fraction == doctest::Approx(exact).epsilon(5e-3));
    }

    TEST_CASE("metric JSON round trip")
    {
        const auto g = torus2(CosineField{1.0, 0.1, 1, 2.0}, {ConstantField{0.2}, ConstantField{0.0}});
        const auto j = metric_to_json(g);
        const auto h = metric_from_json(j);
        CHECK(metric_to_json(h) == j);
        CHECK(kind_of([] { metric_from_json(nlohmann::json{{"n", 3}}); }) == ErrorKind::Precondition);
    }

    TEST_CASE("round sphere surface volume")
    {
        const StandardStationaryMetric s(4, RoundSphere{3, 2.0, 24}, ConstantField{1.0});
        CHECK(s.surface_volume() == doctest::Approx(2.0 * oracle::pi * oracle::pi * 8.0).epsilon(1e-12));
    }
}
