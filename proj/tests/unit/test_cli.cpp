#include <doctest.h>

#include <filesystem>
#include <sstream>

#include "commands.hpp"
#include "ladderlab/error.hpp"
#include "ladderlab/io.hpp"
#include "run_config.hpp"

using namespace ladderlab;
using namespace ladderlab::cli;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

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

json base() { return {{"schema", kConfigSchema}}; }

} // namespace

TEST_SUITE("cli")
{
    TEST_CASE("mass range and list parsing")
    {
        CHECK(parse_mass_range("1:5:1") == std::vector<double>{1, 2, 3, 4, 5});
        CHECK(parse_mass_range("50:200:10").size() == 16);
        CHECK(parse_list("0.1,0.05,0.02") == std::vector<double>{0.1, 0.05, 0.02});
        CHECK(kind_of([] { parse_mass_range("5:1:1"); }) == ErrorKind::Precondition);
        CHECK(kind_of([] { parse_mass_range("1:5:0"); }) == ErrorKind::Precondition);
        CHECK(kind_of([] { parse_mass_range("1:5"); }) == ErrorKind::Precondition);
        CHECK(kind_of([] { parse_list("0.1,x"); }) == ErrorKind::Precondition);
    }

    TEST_CASE("config invariants")
    {
        CHECK_NOTHROW(config_from_json(base()));
        CHECK(kind_of([] { config_from_json({{"schema", "other/9"}}); }) == ErrorKind::Precondition);
        auto j = base();
        j["tolerances"] = {{"weyl", 0.0}};
        CHECK(kind_of([&] { config_from_json(j); }) == ErrorKind::Precondition);
        j = base();
        j["masses"] = {3, 2, 5};
        CHECK(kind_of([&] { config_from_json(j); }) == ErrorKind::Precondition);
        j = base();
        j["colour"] = "blue";
        CHECK(kind_of([&] { config_from_json(j); }) == ErrorKind::Precondition);
        j = base();
        j["format"] = "xml";
        CHECK(kind_of([&] { config_from_json(j); }) == ErrorKind::Precondition);
    }

    TEST_CASE("a spacelike Killing field fails validation before any computation")
    {
        auto j = base();
        j["metric"] = {{"n", 3},
                       {"surface", {{"kind", "flat_torus"}, {"lengths", {6.28, 6.28}}}},
                       {"lapse", {{"kind", "constant"}, {"value", 1.0}}},
                       {"shift", {{"kind", "constant"}, {"value", {1.2, 0.0}}}}};
        CHECK(kind_of([&] { config_from_json(j); }) == ErrorKind::Invariant);
    }

    TEST_CASE("canonical bytes do not depend on key order or spelling of equal numbers")
    {
        const auto a = config_from_json(json::parse(R"({"schema":"ladderlab.run/1","nu":[1.5],"window":0.5})"));
        const auto b = config_from_json(json::parse(R"({"window":5e-1,"nu":[1.50],"schema":"ladderlab.run/1"})"));
        CHECK(canonical_bytes(a) == canonical_bytes(b));
        CHECK(config_hash(a) == config_hash(b));
        const auto c = config_from_json(json::parse(R"({"schema":"ladderlab.run/1","nu":[1.6]})"));
        CHECK(config_hash(a) != config_hash(c));
        CHECK(canonical_bytes(config_from_json(to_json(a))) == canonical_bytes(a));
    }

    TEST_CASE("commands write the expected artifacts")
    {
        const fs::path dir = fs::temp_directory_path() / "ladderlab_test_cli";
        fs::remove_all(dir);
        RunConfig c = default_config();
        c.masses = {1, 2, 3, 4, 5};
        c.out_dir = (dir / "out").string();
        c.cache_dir = (dir / "cache").string();
        std::ostringstream out, log;
        CHECK(cmd_spectrum(c, out, log) == 0);
        std::size_t csv_files = 0;
        for (const auto& entry : fs::recursive_directory_iterator(dir / "cache"))
            if (entry.path().extension() == ".csv") ++csv_files;
        CHECK(csv_files == 5);
        CHECK(log.str().find("computed m = 5") != std::string::npos);
        std::ostringstream out2, log2;
        cmd_spectrum(c, out2, log2);
        CHECK(log2.str().find("cache hit m = 5") != std::string::npos);
        CHECK(log2.str().find("computed") == std::string::npos);
        CHECK(fs::exists(dir / "out" / "spectrum_summary.csv"));

        c.nu = {0.9, 1.0, 1.5};
        c.format = "json";
        cmd_admissible(c, out, log);
        const auto adm = json::parse(read_file(dir / "out" / "admissibility.json"));
        CHECK(adm[0]["verdict"] == "EmptyLadder");
        CHECK(adm[1]["verdict"] == "CriticalLevel");
        CHECK(adm[2]["verdict"] == "Admissible");

        c.nu = {0.9};
        CHECK(kind_of([&] { cmd_verify_weyl(c, out, log); }) == ErrorKind::EmptyLadder);
        fs::remove_all(dir);
    }
}
