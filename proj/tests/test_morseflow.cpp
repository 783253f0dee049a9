#include <cmath>

#include "conormal/errors.hpp"
#include "conormal/morseflow.hpp"
#include "doctest.h"

using namespace conormal;
using namespace conormal::geometry;
using namespace conormal::morseflow;

namespace {

ChartedManifold perturbedCircle(unsigned seed) {
    return perturb(buildCircle(1.0), NormalSection::fourier(3, seed, 0.1, 3, 1.5));
}

ChartedManifold perturbedHopf(unsigned seed) {
    return perturb(buildHopfLink(), NormalSection::fourier(3, seed, 0.1, 3, 1.5));
}

// Betti oracle for a closed curve: (1,1) * (1,1) - (1,1).
const algebra::GradedDims kCurveOracle{{1, 1}, {2, 1}};
// Hopf link: (2,2) * (2,2) - (2,2).
const algebra::GradedDims kHopfOracle{{0, 2}, {1, 6}, {2, 4}};

}  // namespace

TEST_CASE("base metric is the product of pullback metrics") {
    const auto k = perturbedCircle(1);
    const auto s = chords::findChords(k);
    const auto g = MetricSpec::base("g");
    const auto& c = s.chords.front();
    const auto e = chords::energyJet(k, c.p, c.pp);
    const Mat G = g.chartMetric(e.q, e.qp, e.J, e.Jp);
    CHECK(G(0, 1) == doctest::Approx(0.0));
    CHECK(G(0, 0) == doctest::Approx((e.J.transpose() * e.J)(0, 0)));
    CHECK(G(1, 1) == doctest::Approx((e.Jp.transpose() * e.Jp)(0, 0)));
}

TEST_CASE("bumps avoid the chords and stay positive") {
    const auto k = perturbedCircle(1);
    const auto s = chords::findChords(k);
    const auto g = MetricSpec::bumped(k, s, "g", 7, 0.3);
    CHECK(g.bumps().size() == 5);
    CHECK(g.chordClearance(s) > 0.0);
    for (const auto& b : g.bumps()) {
        CHECK(b.amplitude >= 0.15);
        CHECK(b.amplitude <= 0.3);
        CHECK(b.direction.norm() == doctest::Approx(1.0));
    }
    const auto j = g.jittered(k, s, 99, 1e-3);
    CHECK(j.bumps().size() == 10);
    CHECK(j.bumps().back().amplitude <= 1e-3);
    CHECK(j.chordClearance(s) > 0.0);
    CHECK(g.toJson()["bumps"].size() == 5);
}

TEST_CASE("negative gradient vanishes at chords and descends elsewhere") {
    const auto k = perturbedCircle(2);
    const auto s = chords::findChords(k);
    FlowContext ctx(k, s, MetricSpec::bumped(k, s, "g", 7, 0.3));
    for (const auto& c : s.chords) {
        const PairPoint y = ctx.chordPoint(c.id);
        CHECK(negGradient(k, ctx.metric(), y).norm() < 1e-8);
        // The flow for a fixed time stays at the chord.
        const PairPoint z = ctx.flow(y, 5.0);
        CHECK((pairAmbient(k, z) - pairAmbient(k, y)).norm() < 1e-6);
    }
    // Off the chords, E decreases monotonically along the flow.
    PairPoint y{{0, 0, Vec::Constant(1, 0.3)}, {0, 0, Vec::Constant(1, 2.0)}};
    FlowOptions opt;
    opt.stopAtChords = false;
    opt.maxTime = 3.0;
    opt.record = true;
    const auto r = ctx.integrate(y, opt);
    REQUIRE(r.trace.size() > 2);
    for (std::size_t i = 1; i < r.trace.size(); ++i) CHECK(r.trace[i].E <= r.trace[i - 1].E + 1e-9);
}

TEST_CASE("negative gradient solves g(V, .) = -dE") {
    const auto k = perturbedCircle(3);
    const auto s = chords::findChords(k);
    const auto g = MetricSpec::bumped(k, s, "g", 7, 0.3);
    const PairPoint y{{0, 0, Vec::Constant(1, 0.7)}, {0, 0, Vec::Constant(1, 2.6)}};
    const auto e = chords::energyJet(k, y.p, y.pp, 1);
    const Vec v = negGradient(k, g, y);
    const Mat G = g.chartMetric(e.q, e.qp, e.J, e.Jp);
    CHECK((G * v + e.grad).norm() < 1e-10);
}

TEST_CASE("perturbed curve: Morse homology equals the Betti oracle for three seeds") {
    for (unsigned seed : {1u, 2u, 3u}) {
        const auto k = perturbedCircle(seed);
        const auto s = chords::findChords(k);
        REQUIRE(s.allNondegenerate());
        FlowContext ctx(k, s, MetricSpec::bumped(k, s, "g", 7, 0.3));
        const auto cx = buildComplex(ctx);
        CHECK(cx.squareZero());
        CHECK(algebra::normalize(cx.homology().dims) == kCurveOracle);
        CHECK((cx.full() * cx.full()).isZero());
    }
}

TEST_CASE("Hopf link: Morse homology, jitter stability and json") {
    const auto k = perturbedHopf(1);
    const auto s = chords::findChords(k);
    REQUIRE(s.allNondegenerate());
    const auto g = MetricSpec::bumped(k, s, "g", 7, 0.3);
    FlowContext ctx(k, s, g);
    const auto cx = buildComplex(ctx);
    CHECK(cx.squareZero());
    CHECK(algebra::normalize(cx.homology().dims) == kHopfOracle);

    FlowContext jit(k, s, g.jittered(k, s, 1234, 1e-3));
    const auto cj = buildComplex(jit);
    CHECK(cj.full() == cx.full());

    const auto j = cx.toJson();
    CHECK(j["homology"]["1"] == 6);
    CHECK(j["trajectories"].size() == cx.counts.size());
    CHECK(j["basis"]["0"].size() == 6);
}

TEST_CASE("trajectory count preconditions") {
    const auto k = perturbedCircle(1);
    const auto s = chords::findChords(k);
    FlowContext ctx(k, s, MetricSpec::base("g"));
    const auto i1 = s.ofIndex(1), i2 = s.ofIndex(2);
    REQUIRE(!i1.empty());
    CHECK_THROWS_AS(countTrajectories(ctx, i1.front(), i2.front()), std::invalid_argument);
    const auto tc = countTrajectories(ctx, i2.front(), i1.front());
    CHECK(tc.count >= 0);
    CHECK(tc.count <= 1);
    CHECK_FALSE(tc.suspect);
}

TEST_CASE("degenerate chords are refused") {
    const auto k = buildCircle(1.0);
    const auto s = chords::findChords(k);
    REQUIRE_FALSE(s.allNondegenerate());
    CHECK_THROWS_AS(FlowContext(k, s, MetricSpec::base("g")), HypothesisError);
}
