#include <random>

#include "conormal/algebra.hpp"
#include "conormal/errors.hpp"
#include "doctest.h"

using namespace conormal;
using namespace conormal::algebra;

namespace {

// Plain-vector Betti oracle, independent of the library's GradedDims helpers.
using Poly = std::vector<long long>;

Poly conv(const Poly& a, const Poly& b) {
    Poly out(a.size() + b.size() - 1, 0);
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
    return out;
}

Poly minus(Poly a, const Poly& b) {
    for (std::size_t i = 0; i < b.size(); ++i) a[i] -= b[i];
    return a;
}

Poly spherePoly(int m) {
    Poly p(static_cast<std::size_t>(m) + 1, 0);
    p.front() = 1;
    p.back() += 1;
    return p;
}

Poly torusPoly(int m) {
    Poly p{1};
    for (int i = 0; i < m; ++i) p = conv(p, {1, 1});
    return p;
}

long long at(const Poly& p, int i) { return i < 0 || i >= static_cast<int>(p.size()) ? 0 : p[static_cast<std::size_t>(i)]; }

void checkEqual(const GradedDims& got, const Poly& want) {
    for (int i = -2; i < static_cast<int>(want.size()) + 3; ++i) CHECK_MESSAGE(dimAt(got, i) == at(want, i), "degree " << i);
}

Mod2Matrix randomMatrix(std::size_t r, std::size_t c, std::mt19937& rng) {
    Mod2Matrix m(r, c);
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) m.set(i, j, rng() & 1u);
    return m;
}

// Random complex C_2 -> C_1 -> C_0 with d1 d2 = 0: columns of d2 are random
// combinations of a kernel basis of d1.
Mod2Complex randomComplex(std::mt19937& rng, std::size_t n0, std::size_t n1, std::size_t n2) {
    const Mod2Matrix d1 = randomMatrix(n0, n1, rng);
    const auto ker = kernelBasis(d1);
    Mod2Matrix d2(n1, n2);
    for (std::size_t j = 0; j < n2; ++j) {
        Bits col(n1);
        for (const auto& v : ker)
            if (rng() & 1u) col ^= v;
        for (std::size_t i = 0; i < n1; ++i) d2.set(i, j, col[i]);
    }
    Mod2Complex c;
    c.setBasis(0, std::vector<std::string>(n0, "a"));
    c.setBasis(1, std::vector<std::string>(n1, "b"));
    c.setBasis(2, std::vector<std::string>(n2, "c"));
    c.setDifferential(1, d1);
    c.setDifferential(2, d2);
    return c;
}

ProductTopology k0Product(int d) { return ProductTopology{{Factor::sphere(d - 1), Factor::torus(2)}}; }

}  // namespace

TEST_CASE("graded dims helpers") {
    const GradedDims a{{0, 1}, {1, 2}, {3, 0}};
    CHECK(normalize(a).count(3) == 0);
    CHECK(total(a) == 3);
    CHECK(eulerCharacteristic(a) == -1);
    CHECK(shift(a, 2).at(3) == 2);
    CHECK(subtract(add(a, a), a) == normalize(a));
    CHECK_THROWS(subtract(GradedDims{{0, 1}}, GradedDims{{0, 2}}));
    CHECK(fromVector(toVector(a, 4)) == normalize(a));
}

TEST_CASE("Betti tables of primitives against the oracle") {
    checkEqual(betti(Factor::circle()), spherePoly(1));
    checkEqual(betti(Factor::sphere(4)), spherePoly(4));
    checkEqual(betti(Factor::torus(3)), torusPoly(3));
    checkEqual(betti(Factor::point()), Poly{1});
    checkEqual(betti(k0Product(4)), conv(spherePoly(3), torusPoly(2)));
}

TEST_CASE("relative diagonal dims: closed curve") {
    // (1,1)*(1,1) - (1,1) = (0,1,1).
    const auto rel = relativeDiagonalDims(Topology::single({Factor::circle()}));
    checkEqual(rel, Poly{0, 1, 1});
}

TEST_CASE("relative diagonal dims: S^3 x T^2 in degrees 0..10") {
    const Poly k = conv(spherePoly(3), torusPoly(2));
    REQUIRE(k == Poly{1, 2, 1, 1, 2, 1});
    const Poly want = minus(conv(k, k), k);
    const auto rel = relativeDiagonalDims(Topology{{k0Product(4)}});
    checkEqual(rel, want);
    // Frozen from the oracle above.
    CHECK(toVector(rel, 10) == std::vector<long long>{0, 2, 5, 5, 7, 11, 9, 6, 6, 4, 1});
}

TEST_CASE("relative diagonal dims: disconnected examples") {
    const Topology pointPair{{ProductTopology{{Factor::point()}}, ProductTopology{{Factor::point()}}}};
    CHECK(dimAt(relativeDiagonalDims(pointPair), 0) == 2);
    // Hopf link: (2,2)^2 - (2,2) = (2,6,4).
    const Topology hopf{{ProductTopology{{Factor::circle()}}, ProductTopology{{Factor::circle()}}}};
    checkEqual(relativeDiagonalDims(hopf), Poly{2, 6, 4});
}

TEST_CASE("property: relative dims plus H(K) equal the Kunneth square") {
    for (int d = 2; d <= 6; ++d)
        for (int m = 1; m <= 3; ++m) {
            const Topology k{{ProductTopology{{Factor::sphere(d - 1), Factor::torus(m)}}}};
            const Poly b = conv(spherePoly(d - 1), torusPoly(m));
            checkEqual(add(relativeDiagonalDims(k), betti(k)), conv(b, b));
        }
}

TEST_CASE("relative square dims are the Kunneth square of the relative dims") {
    const auto rel = relativeDiagonalDims(Topology::single({Factor::circle()}));
    checkEqual(relativeSquareDims(rel), conv(Poly{0, 1, 1}, Poly{0, 1, 1}));
}

TEST_CASE("strip contact homology shifts by d - 2") {
    const Topology k{{k0Product(4)}};
    const auto hl = hlDims(k, 4);
    const auto rel = relativeDiagonalDims(k);
    for (int p = -1; p < 16; ++p) CHECK(dimAt(hl, p) == dimAt(rel, p - 2));
    CHECK(dimAt(hl, 1) == 0);
    CHECK_THROWS_AS(hlDims(k, 3), HypothesisError);
}

TEST_CASE("Mod2Matrix basics") {
    Mod2Matrix a(2, 3);
    a.set(0, 0, true);
    a.set(1, 2, true);
    a.flip(0, 1);
    CHECK(a.rank() == 2);
    CHECK(a.nonzeros() == 3);
    CHECK(a.transpose().transpose() == a);
    CHECK((a + a).isZero());
    CHECK(Mod2Matrix::identity(2) * a == a);
    const auto k = Mod2Matrix::kron(Mod2Matrix::identity(2), a);
    CHECK(k.rows() == 4);
    CHECK(k.cols() == 6);
    CHECK(k.get(2, 3));
    CHECK(k.rank() == 4);
    Bits x(3);
    x.set(1);
    CHECK(a.apply(x) == a.column(1));
}

TEST_CASE("echelon span expresses combinations") {
    EchelonSpan s(4);
    Bits a(4), b(4);
    a.set(0);
    a.set(1);
    b.set(1);
    CHECK(s.add(a));
    CHECK(s.add(b));
    CHECK_FALSE(s.add(a ^ b));
    const auto c = s.express(a ^ b);
    REQUIRE(c);
    CHECK(c->count() == 2);
    Bits e(4);
    e.set(3);
    CHECK_FALSE(s.contains(e));
}

TEST_CASE("homology: trivial complexes") {
    Mod2Complex zero;
    zero.setBasis(0, {"x", "y"});
    zero.setBasis(1, {"z"});
    zero.setDifferential(1, Mod2Matrix(2, 1));
    const auto h = homology(zero);
    CHECK(dimAt(h.dims, 0) == 2);
    CHECK(dimAt(h.dims, 1) == 1);

    Mod2Complex acyclic;
    acyclic.setBasis(0, {"x"});
    acyclic.setBasis(1, {"y"});
    acyclic.setDifferential(1, Mod2Matrix::identity(1));
    CHECK(total(homology(acyclic).dims) == 0);
}

TEST_CASE("homology rejects d o d != 0") {
    Mod2Complex c;
    c.setBasis(0, {"x"});
    c.setBasis(1, {"y"});
    c.setBasis(2, {"z"});
    c.setDifferential(1, Mod2Matrix::identity(1));
    c.setDifferential(2, Mod2Matrix::identity(1));
    CHECK(c.squareZeroFailure().has_value());
    CHECK_THROWS(homology(c));
}

TEST_CASE("property: rank-nullity on random complexes") {
    std::mt19937 rng(20261016);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n0 = 1 + rng() % 6, n1 = 1 + rng() % 8, n2 = 1 + rng() % 6;
        const auto c = randomComplex(rng, n0, n1, n2);
        REQUIRE_FALSE(c.squareZeroFailure());
        const auto h = homology(c);
        const long long r1 = static_cast<long long>(c.differential(1).rank());
        const long long r2 = static_cast<long long>(c.differential(2).rank());
        CHECK(dimAt(h.dims, 0) == static_cast<long long>(n0) - r1);
        CHECK(dimAt(h.dims, 1) == static_cast<long long>(n1) - r1 - r2);
        CHECK(dimAt(h.dims, 2) == static_cast<long long>(n2) - r2);
        // Representatives are cycles with independent coordinates.
        for (const auto& [deg, reps] : h.representatives) {
            CHECK(static_cast<long long>(reps.size()) == dimAt(h.dims, deg));
            EchelonSpan coords(reps.size());
            for (const auto& v : reps) {
                const auto x = homologyCoordinates(c, h, deg, v);
                REQUIRE(x);
                CHECK(coords.add(*x));
            }
        }
    }
}

TEST_CASE("homology coproduct bounds") {
    const auto rel = relativeDiagonalDims(Topology{{k0Product(4)}});
    const auto zero = HomologyCoproduct::zero(rel, 4);
    CHECK(zero.rank(5) == Bound{0, 0});
    auto unk = HomologyCoproduct::unknown(rel, 4);
    const Bound b = unk.rank(5);
    CHECK(b.lo == 0);
    CHECK(b.hi > 0);
    unk.certifyLowerBound(5, 2);
    CHECK(unk.rank(5).lo == 2);
    CHECK(unk.rank(5).hi == b.hi);
    CHECK_THROWS(unk.certifyLowerBound(5, b.hi + 1));
}

TEST_CASE("low-degree LCH with zero coproduct against the oracle") {
    for (int d = 4; d <= 6; ++d) {
        const Poly k = conv(spherePoly(d - 1), torusPoly(2));
        const Poly rel = minus(conv(k, k), k);
        const Poly sq = conv(rel, rel);
        const auto relDims = relativeDiagonalDims(Topology{{k0Product(d)}});
        const auto table = lchDimsLow(relDims, d, HomologyCoproduct::zero(relDims, d));
        CHECK(table.size() == static_cast<std::size_t>(3 * d - 7));
        for (const auto& [p, dim] : table) {
            CHECK(dim.exact());
            CHECK_MESSAGE(dim.lo == at(rel, p - d + 2) + at(sq, p - 2 * d + 4), "d " << d << " p " << p);
        }
    }
}

TEST_CASE("LCH window and codimension preconditions") {
    const auto rel = relativeDiagonalDims(Topology{{k0Product(4)}});
    const auto z = HomologyCoproduct::zero(rel, 4);
    CHECK_THROWS_AS(lchDim(rel, 4, z, 0), ConormalError);
    CHECK_THROWS_AS(lchDim(rel, 4, z, 6), ConormalError);
    const auto rel2 = relativeDiagonalDims(Topology{{k0Product(2)}});
    CHECK_THROWS_AS(lchDimsLow(rel2, 2, HomologyCoproduct::zero(rel2, 2)), HypothesisError);
}

TEST_CASE("LCH_8 for (11,5,T2): values frozen from the oracle") {
    const int d = 5;
    const Poly k = conv(spherePoly(d - 1), torusPoly(2));
    const Poly rel = minus(conv(k, k), k);
    const Poly sq = conv(rel, rel);
    const long long oracleK0 = at(rel, 8 - d + 2) + at(sq, 8 - 2 * d + 4);
    REQUIRE(oracleK0 == 10);

    const auto relDims = relativeDiagonalDims(Topology{{k0Product(d)}});
    const auto lch0 = lchDimsLow(relDims, d, HomologyCoproduct::zero(relDims, d));
    auto delta1 = HomologyCoproduct::zero(relDims, d);
    Mod2Matrix m(static_cast<std::size_t>(dimAt(relativeSquareDims(relDims), 2)), static_cast<std::size_t>(dimAt(relDims, 6)));
    for (std::size_t i = 0; i < 4; ++i) m.set(i, i, true);
    delta1.setMatrix(6, m);
    const auto lch1 = lchDimsLow(relDims, d, delta1);
    CHECK(lch0.at(8) == Bound{10, 10});
    CHECK(lch1.at(8) == Bound{6, 6});
    // Only the cokernel term of degree 8 sees the rank-4 map on H_6.
    CHECK(lch0.at(8).lo - lch1.at(8).lo == 4);
    // The kernel term of H_6 sits at p = 9, outside the window, so no other
    // degree moves.
    for (int p = 1; p <= 7; ++p) CHECK(lch0.at(p) == lch1.at(p));
}

TEST_CASE("invariant comparison") {
    const Topology k{{k0Product(4)}};
    const auto rel = relativeDiagonalDims(k);
    InvariantData a{"A", 4, rel, HomologyCoproduct::zero(rel, 4)};
    auto deltaB = HomologyCoproduct::unknown(rel, 4);
    deltaB.certifyLowerBound(5, 1);
    for (int p = 0; p < 12; ++p)
        if (p != 5) deltaB.certifyLowerBound(p, 0);
    InvariantData b{"B", 4, rel, deltaB};

    SUBCASE("self comparison is inconclusive") {
        CHECK(compareInvariants(a, a).verdict == Verdict::Inconclusive);
        CHECK(compareInvariants(b, b).verdict == Verdict::Inconclusive);
    }
    SUBCASE("rank 0 against rank >= 1 distinguishes, symmetrically") {
        const auto ab = compareInvariants(a, b), ba = compareInvariants(b, a);
        CHECK(ab.verdict == Verdict::Distinguished);
        CHECK(ba.verdict == Verdict::Distinguished);
        CHECK(ab.legendrianLevel);
        CHECK(ab.alignedRanks.at(9).first == Bound{0, 0});
        CHECK(ab.alignedRanks.at(9).second.lo >= 1);
    }
    SUBCASE("codimension 2 is coproduct-level only") {
        const Topology k2{{k0Product(2)}};
        const auto rel2 = relativeDiagonalDims(k2);
        auto d2 = HomologyCoproduct::unknown(rel2, 2);
        d2.certifyLowerBound(3, 1);
        const auto c = compareInvariants({"A", 2, rel2, HomologyCoproduct::zero(rel2, 2)}, {"B", 2, rel2, d2});
        CHECK(c.verdict == Verdict::Distinguished);
        CHECK_FALSE(c.legendrianLevel);
        CHECK(c.toJson()["level"] == "coproduct-level only");
    }
    SUBCASE("different dimension tables distinguish") {
        const auto relS = relativeDiagonalDims(Topology::single({Factor::sphere(5)}));
        const auto c = compareInvariants(a, {"S", 4, relS, HomologyCoproduct::zero(relS, 4)});
        CHECK(c.verdict == Verdict::Distinguished);
    }
}

TEST_CASE("tb certificate follows the Euler characteristic") {
    CHECK_FALSE(tbCertificate(Topology::single({Factor::sphere(2)})).certified);
    CHECK(tbCertificate(Topology::single({Factor::torus(2)})).certified);
    CHECK(tbCertificate(Topology{{k0Product(4)}}).certified);
    CHECK(tbCertificate(Topology{{k0Product(3)}}).certified);  // torus factor
    CHECK(tbCertificate(Topology::single({Factor::sphere(3)})).certified);
}

TEST_CASE("projection pairing") {
    const ProductTopology t2{{Factor::torus(2)}};
    const ProductTopology t3{{Factor::torus(3)}};
    CHECK(splitFactors(t3).size() == 3);
    const FactorCycle meridian{{1}, {0}, {1}};
    const FactorCycle constant{{1}, {-1}, {0}};
    const FactorCycle doubled{{1}, {1}, {2}};
    CHECK(pushforwardNonzero(t2, meridian));
    CHECK_FALSE(pushforwardNonzero(t2, constant));
    CHECK_FALSE(pushforwardNonzero(t2, doubled));
    CHECK(pushforwardNonzero(t3, FactorCycle{{1}, {2}, {1}}));
    CHECK(projectionPairing(t2, meridian, meridian).nonzero);
    CHECK(projectionPairing(t2, meridian, meridian).degree == 1);
    CHECK_FALSE(projectionPairing(t2, meridian, constant).nonzero);
}

TEST_CASE("csv and json") {
    const GradedDims a{{1, 2}, {2, 1}};
    CHECK(toCsv(a) == "degree,dim\n1,2\n2,1\n");
    CHECK(toJson(a)["1"] == 2);
    CHECK(toJson(Bound{1, 1}) == 1);
    CHECK(toJson(Bound{0, 3})["hi"] == 3);
}
