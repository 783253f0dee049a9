#include <cmath>
#include <random>

#include "conormal/algebra.hpp"
#include "conormal/errors.hpp"
#include "conormal/geometry.hpp"
#include "doctest.h"
#include "fd_oracle.hpp"

using namespace conormal;
using namespace conormal::geometry;

namespace {

Vec v3(double x, double y, double z) {
    Vec v(3);
    v << x, y, z;
    return v;
}

// Random usable sample points of every chart.
std::vector<ManifoldPoint> randomPoints(const ChartedManifold& k, int count, unsigned seed) {
    std::mt19937 rng(seed);
    std::vector<ManifoldPoint> out;
    for (int comp = 0; comp < k.components(); ++comp)
        for (int ci = 0; ci < k.chartsIn(comp); ++ci) {
            const Chart& c = k.chart(comp, ci);
            int found = 0;
            for (int tries = 0; tries < 2000 && found < count; ++tries) {
                Vec u(c.dim());
                for (int i = 0; i < c.dim(); ++i) {
                    std::uniform_real_distribution<double> U(c.domain().lo[i], c.domain().hi[i]);
                    u[i] = U(rng);
                }
                if (!c.usable(u)) continue;
                out.push_back({comp, ci, u});
                ++found;
            }
        }
    return out;
}

void checkJetsAgainstFd(const ChartedManifold& k, int count, double tolJ, double tolH) {
    for (const auto& p : randomPoints(k, count, 7)) {
        const Chart& c = k.chart(p);
        const LocalJet lj = k.eval(p, 2);
        CHECK((lj.q - c.point(p.u)).norm() < 1e-12);
        const Mat Jfd = testing_oracle::fdJacobian(c, p.u);
        CHECK((lj.J - Jfd).norm() < tolJ * (1.0 + lj.J.norm()));
        for (int kk = 0; kk < k.ambientDim(); ++kk) {
            const Mat Hfd = testing_oracle::fdHessian(c, p.u, kk);
            CHECK((lj.H[static_cast<std::size_t>(kk)] - Hfd).norm() < tolH * (1.0 + Hfd.norm()));
        }
        const Frame f = k.tangentFrame(p);
        CHECK(f.orthonormalityResidual < 1e-10);
    }
}

}  // namespace

TEST_CASE("circle chart at u = 0") {
    const auto k = buildCircle();
    const LocalJet lj = k.eval({0, 0, Vec::Zero(1)});
    CHECK((lj.q - v3(1, 0, 0)).norm() < 1e-15);
    CHECK((lj.J.col(0) - v3(0, 1, 0)).norm() < 1e-15);
    const Frame f = k.tangentFrame({0, 0, Vec::Zero(1)});
    CHECK(std::abs(std::abs(f.tangent(1, 0)) - 1.0) < 1e-14);
    // Normal span is {e1, e3}.
    CHECK(std::abs(f.normal.row(1).norm()) < 1e-14);
}

TEST_CASE("eval rejects out-of-domain parameters") {
    const auto s = buildRoundSphere(2);
    Vec u(2);
    u << 3.0, 0.0;
    CHECK_THROWS_AS(s.eval({0, 0, u}), ConormalError);
}

TEST_CASE("Hopf link components") {
    const auto k = buildHopfLink();
    REQUIRE(k.components() == 2);
    Vec u(1);
    u[0] = 0.0;
    CHECK((k.point({0, 0, u}) - v3(1, 0, 0)).norm() < 1e-15);
    u[0] = M_PI;
    CHECK(k.point({1, 0, u}).norm() < 1e-15);
    // Brute-force distance scan between the components.
    double best = 1e9;
    for (int i = 0; i < 400; ++i)
        for (int j = 0; j < 400; ++j) {
            const double a = 2 * M_PI * i / 400, b = 2 * M_PI * j / 400;
            const Vec p = v3(std::cos(a), std::sin(a), 0), q = v3(0, 1 + std::cos(b), std::sin(b));
            best = std::min(best, (p - q).norm());
        }
    CHECK(best > 0.1);
}

TEST_CASE("chart jets agree with finite differences") {
    checkJetsAgainstFd(buildCircle(), 5, 1e-8, 1e-5);
    checkJetsAgainstFd(buildHopfLink(), 5, 1e-8, 1e-5);
    checkJetsAgainstFd(buildEllipsoid(1.0, 1.2, 1.5), 5, 1e-8, 1e-5);
    checkJetsAgainstFd(buildRoundTorus(2.0, 0.7), 5, 1e-8, 1e-5);
    checkJetsAgainstFd(buildRoundSphere(3), 5, 1e-8, 1e-5);
    checkJetsAgainstFd(buildTrefoil(), 5, 1e-8, 1e-5);
    const auto m3 = buildNormalizedM("T2", 3);
    checkJetsAgainstFd(buildK0(5, 2, m3), 4, 1e-8, 1e-5);
    const auto m5 = buildNormalizedM("T2", 5);
    checkJetsAgainstFd(buildK0(9, 4, m5), 2, 1e-8, 1e-5);
}

TEST_CASE("perturbed charts: jets and normal section") {
    const auto k = buildCircle();
    const auto s = NormalSection::fourier(3, 11, 0.05, 4);
    const auto ks = perturb(k, s);
    checkJetsAgainstFd(ks, 6, 1e-7, 1e-4);
    for (const auto& p : randomPoints(k, 10, 3)) {
        const Vec sig = sectionAt(k, s, p);
        const Frame f = k.tangentFrame(p);
        CHECK((f.tangent.transpose() * sig).norm() < 1e-13);
        CHECK(sig.norm() <= 0.05 + 1e-12);
    }
}

TEST_CASE("perturbed frame is orthogonal to the finite-difference tangent") {
    const auto k = buildRoundTorus(2.0, 0.7);
    const auto ks = perturb(k, NormalSection::fourier(3, 5, 0.05, 3));
    for (const auto& p : randomPoints(ks, 6, 9)) {
        const Frame f = ks.tangentFrame(p);
        const Mat Jfd = testing_oracle::fdJacobian(ks.chart(p), p.u, 1e-5);
        const double resid = (f.normal.transpose() * Jfd).norm() / Jfd.norm();
        CHECK(resid < 1e-9);
    }
}

TEST_CASE("zero section is the identity") {
    const auto k = buildEllipsoid(1.0, 1.2, 1.5);
    const auto ks = perturb(k, NormalSection::zero(3));
    for (const auto& p : k.samples(6)) CHECK((k.point(p) - ks.point(p)).norm() == 0.0);
}

TEST_CASE("perturb enforces the sup-norm bound") {
    const auto k = buildCircle();
    CHECK_THROWS_AS(perturb(k, NormalSection::fourier(3, 1, 3.0, 3)), HypothesisError);
    const TubularData t = estimateTubular(k);
    CHECK(t.radius == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("Hopf link reach") {
    const TubularData t = estimateTubular(buildHopfLink(), 64);
    CHECK(t.radius > 0.3);
    CHECK(t.radius <= 1.0 + 1e-9);
}

TEST_CASE("planar cos 2 theta section on the circle") {
    const auto k = buildCircle();
    const auto ks = perturb(k, NormalSection::planarCos2(0.1));
    Vec u(1);
    u[0] = 0.0;
    CHECK((ks.point({0, 0, u}) - v3(1.1, 0, 0)).norm() < 1e-14);
    u[0] = M_PI / 2;
    CHECK((ks.point({0, 0, u}) - v3(0, 0.9, 0)).norm() < 1e-14);
}

TEST_CASE("K0 builder") {
    const auto m3 = buildNormalizedM("T2", 3);
    CHECK(checkNormalization(m3) <= 1.0 + 1e-12);
    const auto k = buildK0(5, 2, m3);
    CHECK(k.ambientDim() == 5);
    CHECK(k.intrinsicDim() == 3);
    CHECK(algebra::eulerCharacteristic(algebra::betti(k.topology())) == 0);
    const auto m5 = buildNormalizedM("T2", 5);
    const auto k9 = buildK0(9, 4, m5);
    CHECK(k9.intrinsicDim() == 5);
    // Product structure: the sphere block and the torus block of the frame
    // are orthogonal.
    ManifoldPoint p{0, 0, Vec::Zero(5)};
    const LocalJet lj = k9.eval(p, 1);
    const Mat G = lj.J.transpose() * lj.J;
    CHECK(G.block(0, 3, 3, 2).norm() < 1e-15);
    CHECK_THROWS_AS(buildK0(9, 4, m3), ConfigError);
}

TEST_CASE("normalized torus loops stay below the cap") {
    const auto m = buildNormalizedM("T2", 5);
    for (int which = 0; which < 2; ++which)
        for (int i = 0; i < 64; ++i) {
            const Vec w = m.loop(which, 2 * M_PI * i / 64);
            CHECK(w[4] < 0.5);
            const auto loc = m.manifold.locate(0, w, 1e-9);
            CHECK(loc.has_value());
        }
}

TEST_CASE("connected-sum recipe invariants") {
    const auto m = buildNormalizedM("T2", 3);
    const auto rc = defaultRecipe(5, 2, m);
    const double r0 = rc.r0;
    for (double r : {r0, 1.1 * r0, 1.2 * r0}) {
        const auto [a1, a2] = rc.interpolationCurve(r);
        CHECK(a1 == doctest::Approx(3 * r0 - r));
        CHECK(a2 == 1.0);
    }
    for (double r : {1.8 * r0, 1.9 * r0, 2.0 * r0}) {
        const auto [a1, a2] = rc.interpolationCurve(r);
        CHECK(a1 == doctest::Approx(r));
        CHECK(a2 == 0.0);
    }
    for (double t : {0.0, 0.3, 0.7, 1.0}) {
        const Mat b = rc.frame(t);
        CHECK((b.transpose() * b - Mat::Identity(b.cols(), b.cols())).norm() < 1e-14);
        Vec g = Vec::Zero(5);
        g[4] = 1.0;
        CHECK((b.transpose() * g).norm() < 1e-15);
    }
    CHECK((rc.gamma(0) - rc.p0).norm() == 0.0);
    Vec ytop = Vec::Zero(4);
    ytop[3] = 1.0;
    CHECK((sphereMapF(5, 2, ytop) - rc.p1).norm() < 1e-15);
}

TEST_CASE("sphere map: V-region contains the flat disk") {
    // Points with y0 < 0 and |w| = 3|y'| <= sqrt(8) map to v = 0.
    for (double wn : {0.0, 0.5, 1.0, std::sqrt(2.0)}) {
        Vec y = Vec::Zero(4);
        y[1] = wn / 3.0;
        y[0] = -std::sqrt(1 - y[1] * y[1]);
        const Vec f = sphereMapF(5, 2, y);
        CHECK(f.head(2).norm() < 1e-15);
        CHECK(f.tail(3).norm() == doctest::Approx(wn));
    }
}

TEST_CASE("K1 construction: identity outside U and seams") {
    const auto m = buildNormalizedM("T2", 3);
    const auto rc = defaultRecipe(5, 2, m);
    const auto b = buildK1(rc, m);
    // Outside the modified region the map is the identity.
    for (const auto& p : b.k0.samples(6)) {
        const Vec x = b.k0.point(p);
        if ((x - rc.p0).norm() < 4 * rc.r0) continue;
        Vec z(5);
        b.k0SideMap->apply(x.data(), z.data());
        CHECK((z - x).norm() == 0.0);
    }
    const auto diag = diagnoseK1(b, 8, 1000);
    CHECK(diag.seamSamples == 1000);
    CHECK(diag.seamPositionMismatch < b.manifold.seamTolerance());
    CHECK(diag.seamDerivativeMismatch < b.manifold.seamTolerance());
    CHECK(diag.minSeparation > 1e-3);
    CHECK(diag.gammaClearance > 0.05);
    CHECK(diag.k0SClearance > 0.5);
    // Diffeomorphic to K0: same Betti table.
    CHECK(algebra::betti(b.manifold.topology()) == algebra::betti(b.k0.topology()));
}

TEST_CASE("K1 chart jets agree with finite differences") {
    const auto m = buildNormalizedM("T2", 3);
    auto rc = defaultRecipe(5, 2, m);
    const auto b = buildK1(rc, m);
    checkJetsAgainstFd(b.manifold, 3, 1e-6, 1e-3);
    // Points in the tube, through the flat chart p0 + frame0 u.
    std::mt19937 rng(4);
    std::normal_distribution<double> N01;
    for (int i = 0; i < 20; ++i) {
        Vec dir(3);
        for (int j = 0; j < 3; ++j) dir[j] = N01(rng);
        dir.normalize();
        const double rho = rc.r0 * (0.7 + 1.2 * i / 19.0);
        LocalJet flat;
        flat.q = rc.p0 + rc.frame0 * (rho * dir);
        flat.J = rc.frame0;
        flat.H.assign(5, Mat::Zero(3, 3));
        const LocalJet z = composeJet(*b.k0SideMap, flat, 1);
        Mat Jfd(5, 3);
        for (int j = 0; j < 3; ++j) {
            const double h = 1e-7;
            Vec xp = flat.q + h * rc.frame0.col(j), xm = flat.q - h * rc.frame0.col(j);
            Vec zp(5), zm(5);
            b.k0SideMap->apply(xp.data(), zp.data());
            b.k0SideMap->apply(xm.data(), zm.data());
            Jfd.col(j) = (zp - zm) / (2 * h);
        }
        CHECK((z.J - Jfd).norm() < 1e-6 * (1 + Jfd.norm()));
        // Immersion: full rank in the tube.
        Eigen::JacobiSVD<Mat> svd(z.J);
        CHECK(svd.singularValues().minCoeff() > 1e-3);
    }
}

TEST_CASE("K1 for (9,4) with a shift passes the sampled checks") {
    const auto m = buildNormalizedM("T2", 5);
    auto rc = defaultRecipe(9, 4, m);
    rc.shift = 0.0675;
    const auto b = buildK1(rc, m);
    const auto diag = diagnoseK1(b, 5, 200);
    CHECK(diag.seamPositionMismatch < b.manifold.seamTolerance());
    CHECK(diag.seamDerivativeMismatch < b.manifold.seamTolerance());
    CHECK(diag.minSeparation > 1e-3);
}
