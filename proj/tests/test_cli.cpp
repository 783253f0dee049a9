#include <filesystem>
#include <fstream>
#include <sstream>

#include "conormal/cli.hpp"
#include "conormal/errors.hpp"
#include "doctest.h"

using namespace conormal;
using namespace conormal::cli;

namespace {

std::string messageOf(const std::string& toml) {
    try {
        parseToml(toml);
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "";
}

Scenario fromToml(const std::string& toml) { return Scenario::fromJson(parseToml(toml)); }

const char* kCircle = R"(
name = "circle"
[manifold]
kind = "circle"
[perturbation]
kind = "fourier"
seed = 2
)";

}  // namespace

TEST_CASE("toml subset: values, tables and comments") {
    const auto j = parseToml(R"(
# comment
title = "a # not a comment"   # trailing comment
literal = 'C:\path'
count = 1_000
ratio = -2.5e-3
flag = true
list = [1, 2,
        3]
names = ["x", "y"]

[outer.inner]
value = 4
"quoted key" = 5
dotted.key = 6
)");
    CHECK(j["title"] == "a # not a comment");
    CHECK(j["literal"] == "C:\\path");
    CHECK(j["count"] == 1000);
    CHECK(j["ratio"].get<double>() == doctest::Approx(-2.5e-3));
    CHECK(j["flag"] == true);
    CHECK(j["list"] == nlohmann::json({1, 2, 3}));
    CHECK(j["names"][1] == "y");
    CHECK(j["outer"]["inner"]["value"] == 4);
    CHECK(j["outer"]["inner"]["quoted key"] == 5);
    CHECK(j["outer"]["inner"]["dotted"]["key"] == 6);
}

TEST_CASE("toml subset: errors carry line numbers") {
    CHECK(messageOf("a = 1\na = 2\n").find("line 2") != std::string::npos);
    CHECK(messageOf("a = 1\nb = \"open\n").find("line 2") != std::string::npos);
    CHECK(messageOf("[t\n").find("line 1") != std::string::npos);
    CHECK(messageOf("x = 1.2.3\n").find("line 1") != std::string::npos);
    CHECK_FALSE(messageOf("key\n").empty());
}

TEST_CASE("scenario defaults and overrides") {
    const auto s = fromToml(R"(
name = "demo"
seed = 5
route = "geometric"
[manifold]
kind = "torus"
R = 1.5
r = 0.5
[tolerances]
chord_residual = 1e-9
k0_clearance = 0.02
[solver]
grid_per_dim = 12
[output]
dir = "out"
svg = true
)");
    CHECK(s.name == "demo");
    CHECK(s.seed == 5);
    CHECK(s.route == "geometric");
    CHECK(s.manifold == "torus");
    CHECK(s.params.at("R") == 1.5);
    CHECK(s.tol.chordResidual == 1e-9);
    CHECK(s.tol.k0Clearance == 0.02);
    CHECK(s.tol.nullBand == 1e-7);
    CHECK(s.gridPerDim == 12);
    CHECK(s.outDir == "out");
    CHECK(s.svg);
    CHECK(s.perturbation.kind == "none");
    // Round trip through the canonical form.
    const auto back = Scenario::fromJson(s.toJson());
    CHECK(back.hash() == s.hash());
    CHECK(s.hash().size() == 16);
}

TEST_CASE("scenario errors") {
    CHECK_THROWS_AS(fromToml("[manifold]\nkind = \"klein\"\n"), ConfigError);
    CHECK_THROWS_AS(fromToml("colour = 1\n"), ConfigError);
    CHECK_THROWS_AS(fromToml("route = \"flow\"\n"), ConfigError);
    CHECK_THROWS_AS(fromToml("[tolerances]\nnull_band = -1\n"), ConfigError);
    CHECK_THROWS_AS(fromToml("[tolerances]\ntau0_margin = 1.5\n"), ConfigError);
    CHECK_THROWS_AS(fromToml("[tolerances]\nnull_bnad = 1e-7\n"), ConfigError);
    CHECK_THROWS_AS(fromToml("seed = \"one\"\n"), ConfigError);
    CHECK_THROWS_AS(Scenario::load("/nonexistent/scenario.toml"), ConfigError);
}

TEST_CASE("scenario hash changes with the content") {
    auto a = fromToml(kCircle);
    auto b = a;
    b.perturbation.seed = 3;
    CHECK(a.hash() != b.hash());
    CHECK(a.hash() == fromToml(kCircle).hash());
}

TEST_CASE("chords verb: deterministic output and degree law") {
    const auto s = fromToml(kCircle);
    const auto r1 = runChords(s), r2 = runChords(s);
    CHECK(r1.json.dump() == r2.json.dump());
    CHECK(r1.csv.at("chords.csv") == r2.csv.at("chords.csv"));
    CHECK(r1.json["degree_law_holds"] == true);
    CHECK(r1.json["all_nondegenerate"] == true);
    CHECK(r1.json["star"]["holds"] == false);
    CHECK(r1.exitCode == 0);
    CHECK(r1.csv.at("chords.csv").rfind("id,index,nullity,degree", 0) == 0);
}

TEST_CASE("morse verb matches the oracle") {
    const auto r = runMorse(fromToml(kCircle));
    CHECK(r.exitCode == 0);
    CHECK(r.json["oracle_match"] == true);
    CHECK(r.json["homology"] == nlohmann::json({{"1", 1}, {"2", 1}}));
}

TEST_CASE("validate: gates and exit codes") {
    SUBCASE("contact homology needs codimension 4") {
        const auto r = validate(fromToml("lch = true\nroute = \"algebra\"\n[manifold]\nkind = \"k1\"\nn = 5\nd = 2\n"));
        CHECK(r.exitCode == 2);
        CHECK(r.json["issues"][0].get<std::string>().find("d >= 4") != std::string::npos);
    }
    SUBCASE("morse route refused above dim(K x K) = 6 with an algebra suggestion") {
        const auto r = validate(fromToml("[manifold]\nkind = \"k0\"\nn = 9\nd = 4\n"));
        CHECK(r.exitCode == 2);
        CHECK(r.json["issues"][0].get<std::string>().find("algebra") != std::string::npos);
    }
    SUBCASE("degenerate chords ask for a re-seed") {
        const auto r = validate(fromToml("[manifold]\nkind = \"circle\"\n"));
        CHECK(r.exitCode == 2);
        CHECK(r.json["issues"].dump().find("re-seed") != std::string::npos);
    }
    SUBCASE("perturbed circle is valid") {
        const auto r = validate(fromToml(kCircle));
        CHECK(r.exitCode == 0);
        CHECK(r.json["valid"] == true);
    }
}

TEST_CASE("morse verb refuses large products and degenerate input") {
    CHECK_THROWS_AS(runMorse(fromToml("[manifold]\nkind = \"k0\"\nn = 9\nd = 4\n")), HypothesisError);
    try {
        runMorse(fromToml("[manifold]\nkind = \"circle\"\n"));
        FAIL("expected a hypothesis error");
    } catch (const HypothesisError& e) {
        CHECK(e.exitCode() == 2);
        CHECK(std::string(e.what()).find("perturbation") != std::string::npos);
    }
}

TEST_CASE("the re-seed loop stops after 32 attempts") {
    // An amplitude far above the reach fails on every seed.
    const auto s = fromToml("[manifold]\nkind = \"circle\"\n[perturbation]\nkind = \"fourier\"\namplitude = 5.0\n");
    try {
        prepare(s);
        FAIL("expected a hypothesis error");
    } catch (const HypothesisError& e) {
        CHECK(std::string(e.what()).find("32") != std::string::npos);
    }
}

TEST_CASE("repro hopf") {
    const auto r = reproHopf({true});
    CHECK(r.exitCode == 0);
    const auto& c = r.json["certificate"];
    CHECK(c["statement"] == "hopf-coproduct-nonzero");
    CHECK(c["certified"] == true);
    CHECK(r.svg.at("locus.svg").find("<svg") == 0);
    CHECK(reproHopf({false}).json.dump() == r.json.dump());
}

TEST_CASE("repro k0k1 refuses lch below codimension 4") {
    K0K1ReproOptions o;
    o.n = 5;
    o.d = 2;
    o.lch = true;
    CHECK_THROWS_AS(reproK0K1(o), HypothesisError);
    o.lch = false;
    o.M = "T3";
    CHECK_THROWS_AS(reproK0K1(o), ConfigError);
}

TEST_CASE("report bundle is written to disk") {
    namespace fs = std::filesystem;
    const auto dir = fs::temp_directory_path() / "conormal_cli_test";
    fs::remove_all(dir);
    auto s = fromToml(kCircle);
    s.svg = true;
    const auto r = runChords(s);
    REQUIRE(r.svg.count("chords.svg") == 1);
    r.write(dir.string());
    CHECK(fs::exists(dir / "report.json"));
    CHECK(fs::exists(dir / "chords.csv"));
    CHECK(fs::exists(dir / "chords.svg"));
    std::ifstream f(dir / "report.json");
    std::stringstream text;
    text << f.rdbuf();
    CHECK(nlohmann::json::parse(text.str()) == r.json);
    fs::remove_all(dir);
}
