#include <cmath>

#include "conormal/errors.hpp"
#include "conormal/strops.hpp"
#include "doctest.h"

using namespace conormal;
using namespace conormal::geometry;
using namespace conormal::strops;

namespace {

Vec v3(double x, double y, double z) {
    Vec v(3);
    v << x, y, z;
    return v;
}

struct HopfSetup {
    ChartedManifold k;
    chords::ChordSet s;
};

HopfSetup perturbedHopf(unsigned seed) {
    HopfSetup h;
    h.k = perturb(buildHopfLink(), NormalSection::fourier(3, seed, 0.1, 3, 1.5));
    h.s = chords::findChords(h.k);
    return h;
}

}  // namespace

TEST_CASE("evaluation and split maps") {
    const Vec q = v3(1, 0, 0), qp = v3(-1, 2, 0);
    CHECK((ev(q, qp, 0.0) - q).norm() == 0.0);
    CHECK((ev(q, qp, 1.0) - qp).norm() == 0.0);
    CHECK((ev(q, qp, 0.25) - v3(0.5, 0.5, 0)).norm() < 1e-15);
    const Split s = sp(q, qp, 0.5);
    CHECK((s.m - v3(0, 1, 0)).norm() < 1e-15);
    CHECK(s.first().size() == 6);
    CHECK((s.first().tail(3) - s.second().head(3)).norm() == 0.0);
}

TEST_CASE("split on K projects the midpoint and refuses points off K") {
    const auto k = buildHopfLink();
    // The second component passes through the origin.
    const Split s = spOnK(k, v3(1, 0, 0), v3(-1, 0, 0), 0.5);
    CHECK(s.m.norm() < 1e-8);
    CHECK_THROWS_AS(spOnK(k, v3(1, 0, 0), v3(-1, 0, 0), 0.3), HypothesisError);
}

TEST_CASE("tau0 bound") {
    const auto c = SplitConfig::fromEnergy(0.08, 3.0, 0.1);
    CHECK(c.tau0 == doctest::Approx(0.9 * std::sqrt(0.16) / 3.0));
    CHECK(c.satisfies(0.08, 3.0));
    CHECK_FALSE(c.satisfies(0.01, 3.0));
    // Capped at 1/4 for large energies.
    CHECK(SplitConfig::fromEnergy(0.5, 1.0).tau0 == 0.25);
    CHECK_THROWS_AS(SplitConfig::fromEnergy(0.0, 3.0), std::invalid_argument);
}

TEST_CASE("component pair basis") {
    const ComponentPairBasis b(2);
    CHECK(b.pairs.size() == 2);
    CHECK(b.indexOf(0, 0) == -1);
    CHECK(b.indexOf(0, 1) >= 0);
    CHECK(b.indexOf(1, 0) != b.indexOf(0, 1));
    CHECK(b.tensorDim() == 4);
    CHECK(b.label(static_cast<std::size_t>(b.indexOf(0, 1) * 2 + b.indexOf(1, 0))) == "[C1xC2](x)[C2xC1]");
}

TEST_CASE("unperturbed Hopf link: the locus is one transversal point at (pi, 1/2)") {
    const auto k = buildHopfLink();
    const auto cyc = pointTimesLoop(k, 0, v3(1, 0, 0));
    CHECK(cyc.dim() == 1);
    const auto loc = intersectionLocus(cyc, k, {});
    REQUIRE(loc.points.size() == 1);
    const auto& p = loc.points.front();
    CHECK(std::abs(p.z.u[0] - M_PI) < 1e-6);
    CHECK(std::abs(p.tau - 0.5) < 1e-6);
    CHECK(loc.transversal);
    CHECK(loc.expectedDim == 0);
    CHECK(p.residual < 1e-12);
    const auto cls = geometricClass(k, loc);
    CHECK(cls.count() == 1);
    CHECK(loc.toJson()["points"].size() == 1);
}

TEST_CASE("perturbed Hopf link: Morse coproduct, chain map and route coincidence") {
    const auto h = perturbedHopf(1);
    REQUIRE(h.s.allNondegenerate());
    FlowContext g(h.k, h.s, morseflow::MetricSpec::bumped(h.k, h.s, "g", 7, 0.3));
    FlowContext gp(h.k, h.s, morseflow::MetricSpec::bumped(h.k, h.s, "g'", 11, 0.3));
    const auto cg = morseflow::buildComplex(g);
    const auto cgp = morseflow::buildComplex(gp);
    const auto cfg = SplitConfig::fromEnergy(g.epsilon0(), 3.0);
    const auto delta = morseCoproduct(g, gp, cfg);

    CHECK(delta.degreeShiftHolds());
    CHECK(chainMapIdentity(delta, cg, cgp));
    CHECK(delta.minSplitEnergy() > g.epsilon0());
    CHECK_FALSE(delta.full.isZero());
    // Rank profile per bidegree, frozen from seeds 1..4 of the CLI run.
    const std::map<std::tuple<int, int, int>, int> profile{{{1, 0, 0}, 4}, {{2, 0, 1}, 6}, {{2, 1, 0}, 6}};
    CHECK(delta.rankProfile() == profile);

    for (int comp = 0; comp < 2; ++comp) {
        const auto cyc = pointTimesLoop(h.k, comp, comp == 0 ? v3(1, 0, 0) : v3(-1, 0, 0));
        const auto loc = intersectionLocus(cyc, h.k, {});
        const auto cmp = compareRoutes(h.k, h.s, cg, delta, loc, comp);
        CHECK(cmp.agree);
        CHECK(cmp.morse.any());
    }
}

TEST_CASE("perturbed circle: coproduct respects the grading and the chain map") {
    const auto k = perturb(buildCircle(1.0), NormalSection::fourier(3, 2, 0.1, 3, 1.5));
    const auto s = chords::findChords(k);
    FlowContext g(k, s, morseflow::MetricSpec::bumped(k, s, "g", 7, 0.3));
    FlowContext gp(k, s, morseflow::MetricSpec::bumped(k, s, "g'", 11, 0.3));
    const auto delta = morseCoproduct(g, gp, SplitConfig::fromEnergy(g.epsilon0(), 2.4));
    CHECK(delta.degreeShiftHolds());
    CHECK(chainMapIdentity(delta, morseflow::buildComplex(g), morseflow::buildComplex(gp)));
}

TEST_CASE("loop choices") {
    const LoopChoice mer{0, 1}, lon2{1, 2}, cst{-1, 0};
    CHECK(mer.name() == "meridian");
    CHECK(lon2.name() == "longitude^2");
    CHECK(cst.name() == "constant");
    CHECK(mer.cycle().target == std::vector<int>{0});
    CHECK(cst.cycle().target == std::vector<int>{-1});
    CHECK(lon2.cycle().degree == std::vector<int>{2});
}

TEST_CASE("K0 (5,2): the coproduct vanishes with clearance") {
    K0K1Params p;
    const auto r = k0VanishingCertificate(p);
    CHECK(r.certificate.certified);
    CHECK(r.minDistance > 0.01);
    CHECK(r.analyticMargin >= p.shift - 1e-12);
    CHECK(r.cycles > 0);
    for (int deg = 0; deg < 8; ++deg) CHECK(r.delta.rank(deg) == algebra::Bound{0, 0});
    CHECK(r.certificate.statement == "k0-coproduct-vanishes");
}

TEST_CASE("K1 (5,2): a meridian pair certifies a nonzero coproduct") {
    K0K1Params p;
    p.qGrid = 4;
    const auto r = k1NonvanishingCertificate(p, {{{0, 1}, {0, 1}}});
    CHECK(r.certificate.certified);
    CHECK(r.certifiedRank == 1);
    REQUIRE(r.loci.size() == 1);
    const auto& loc = r.loci.front();
    CHECK(loc.components == 1);
    CHECK(loc.points.size() == 16);
    for (const auto& lp : loc.points) {
        CHECK(std::abs(lp.tau - 0.5) < 1e-6);
        CHECK(lp.localDim == 2);
    }
    CHECK(r.delta.rank(3).lo == 1);
}

TEST_CASE("K1 (5,2): a constant loop is refused by the pairing") {
    K0K1Params p;
    p.qGrid = 3;
    const auto r = k1NonvanishingCertificate(p, {{{0, 1}, {-1, 0}}});
    CHECK_FALSE(r.certificate.certified);
    CHECK(r.certifiedRank == 0);
    CHECK(r.delta.rank(3).lo == 0);
}

TEST_CASE("K0 / K1 parameter checks") {
    K0K1Params p;
    p.n = 6;
    CHECK_THROWS_AS(k1NonvanishingCertificate(p, {{{0, 1}, {0, 1}}}), ConfigError);
    p.n = 5;
    CHECK_THROWS_AS(k1NonvanishingCertificate(p, {}), ConfigError);
}
