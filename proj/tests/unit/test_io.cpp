#include <doctest.h>

#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "ladderlab/error.hpp"
#include "ladderlab/io.hpp"
#include "ladderlab/ladder.hpp"
#include "support/oracles.hpp"

using namespace ladderlab;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name)
{
    const fs::path p = fs::temp_directory_path() / ("ladderlab_test_" + name);
    fs::remove_all(p);
    return p;
}

} // namespace

TEST_SUITE("io")
{
    TEST_CASE("17 significant digits round trip")
    {
        for (double x : {0.1, 1.0 / 3.0, 1e-300, 6.02214076e23, -2.5}) {
            const std::string s = format_double(x);
            CHECK(std::stod(s) == x);
        }
        CHECK(format_double(0.1) == "0.10000000000000001");
        CHECK(format_double(0.0) == "0");
    }

    TEST_CASE("canonical JSON sorts keys and is indentation-independent")
    {
        const nlohmann::json a = nlohmann::json::parse(R"({"b": 1, "a": [0.5, {"z": true, "y": null}]})");
        const nlohmann::json b = nlohmann::json::parse(R"({"a":[0.5,{"y":null,"z":true}],"b":1})");
        CHECK(canonical_json(a) == canonical_json(b));
        CHECK(canonical_json(a) == R"({"a":[0.5,{"y":null,"z":true}],"b":1})");
        CHECK(nlohmann::json::parse(canonical_json(a, 2)) == a);
    }

    TEST_CASE("SHA-256 test vectors")
    {
        CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
        CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    }

    TEST_CASE("slice CSV round trip")
    {
        SpectrumSlice s;
        s.m = 3.0;
        s.eigenvalues = {{-4.123456789012345, 2}, {0.0, 1}, {3.1622776601683795, 4}};
        const auto back = slice_from_csv(slice_to_csv(s), 3.0);
        REQUIRE(back.size() == 3);
        for (std::size_t i = 0; i < 3; ++i) {
            CHECK(back[i].lambda == s.eigenvalues[i].lambda);
            CHECK(back[i].multiplicity == s.eigenvalues[i].multiplicity);
        }
        CHECK_THROWS_AS(slice_from_csv(slice_to_csv(s), 4.0), Error);
    }

    TEST_CASE("spectrum cache: hits on rerun, identical bytes, corruption detected")
    {
        const fs::path root = scratch("cache");
        const double L = 2.0 * oracle::pi;
        const StandardStationaryMetric g(3, FlatTorus{{L, L}, {16, 16}}, ConstantField{1.0});
        std::string first;
        {
            SliceBuilder b(g);
            auto cache = std::make_shared<SpectrumCache>(root, b.cache_key());
            b.attach_cache(cache);
            for (double m = 1; m <= 5; ++m) b.build_window(m, 1.5, 1.0);
            CHECK(cache->misses() == 5);
            CHECK(cache->hits() == 0);
            first = read_file(cache->directory() / "m_3.csv");
        }
        {
            SliceBuilder b(g);
            auto cache = std::make_shared<SpectrumCache>(root, b.cache_key());
            b.attach_cache(cache);
            for (double m = 1; m <= 5; ++m) CHECK(count_sharp(b.build_window(m, 1.5, 1.0), 1.5, 1.0) ==
                                                  oracle::product_t2_sharp_count(1.5, 1.0, m));
            CHECK(cache->hits() == 5);
            CHECK(cache->misses() == 0);
            CHECK(read_file(cache->directory() / "m_3.csv") == first);
            {
                std::ofstream out(cache->directory() / "m_3.csv", std::ios::app);
                out << "3,99,1\n";
            }
            try {
                b.build_window(3.0, 1.5, 1.0);
                FAIL("tampered cache file was accepted");
            } catch (const Error& e) {
                CHECK(e.kind() == ErrorKind::Cache);
                CHECK(std::string(e.what()).find("delete") != std::string::npos);
            }
        }
        fs::remove_all(root);
    }

    TEST_CASE("a wider request widens the cached slice")
    {
        const fs::path root = scratch("widen");
        const double L = 2.0 * oracle::pi;
        const StandardStationaryMetric g(3, FlatTorus{{L, L}, {16, 16}}, ConstantField{1.0});
        SliceBuilder b(g);
        auto cache = std::make_shared<SpectrumCache>(root, b.cache_key());
        b.attach_cache(cache);
        b.build_window(10.0, 1.5, 0.5);
        const auto wide = b.build_window(10.0, 1.5, 3.0);
        CHECK(wide.covers(12.0, 18.0));
        CHECK(b.build_window(10.0, 1.5, 0.5).covers(14.5, 15.5));
        CHECK(cache->hits() == 1);
        fs::remove_all(root);
    }

    TEST_CASE("cache directory from the environment")
    {
        CHECK(resolve_cache_dir("fallback") == fs::path(std::getenv("LADDERLAB_CACHE") ? std::getenv("LADDERLAB_CACHE")
                                                                                       : "fallback"));
    }

    TEST_CASE("exit codes")
    {
        CHECK(exit_code(ErrorKind::Precondition) == 2);
        CHECK(exit_code(ErrorKind::Invariant) == 2);
        CHECK(exit_code(ErrorKind::Cache) == 2);
        CHECK(exit_code(ErrorKind::Incompleteness) == 3);
        CHECK(exit_code(ErrorKind::Integration) == 4);
        CHECK(exit_code(ErrorKind::NonrealSpectrum) == 4);
    }
}
