// Certificates for delta on the K0 / K1 families: an analytic-plus-sampled
// vanishing argument for K0 and a transversal locus with the projection
// pairing for K1.

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <set>

#include "conormal/errors.hpp"
#include "conormal/strops.hpp"

namespace conormal::strops {

using geometry::AmbientMapT;
using geometry::ChartPtr;
using geometry::NormalizedM;
using geometry::SampleCloud;

// -------------------------------------------------------------- Certificate

bool Certificate::hypothesesHold() const {
    return std::all_of(hypotheses.begin(), hypotheses.end(), [](const Hypothesis& h) { return h.holds; });
}

nlohmann::json Certificate::toJson() const {
    nlohmann::json hs = nlohmann::json::array();
    for (const auto& h : hypotheses)
        hs.push_back({{"name", h.name}, {"holds", h.holds}, {"value", h.value}, {"detail", h.detail}});
    return {{"kind", kind},
            {"statement", statement},
            {"hypotheses", hs},
            {"evidence", evidence},
            {"certified", certified},
            {"verdict", verdict},
            {"provenance", provenance}};
}

// --------------------------------------------------------------- LoopChoice

std::string LoopChoice::name() const {
    const std::string base = which == 0 ? "meridian" : which == 1 ? "longitude" : "constant";
    return which < 0 || winding == 1 ? base : base + "^" + std::to_string(winding);
}

algebra::FactorCycle LoopChoice::cycle() const {
    algebra::FactorCycle c;
    c.qFactorDims = {1};
    c.target = {which < 0 ? -1 : which};
    c.degree = {which < 0 ? 0 : winding};
    return c;
}

namespace {

int perDimFor(int m, double budget) {
    int per = 2;
    while (std::pow(per + 1, m) <= budget) ++per;
    return per;
}

// ---------------------------------------------------------------- K0 cycles

// One factor of a basis element of H_*(S^{d-1} x T^2): the sphere part is the
// point e1 or the whole sphere; the torus part is a point, the meridian, the
// longitude or the whole torus.
struct K0Element {
    bool sphere = false;
    int torus = 0;  // 0 point, 1 meridian, 2 longitude, 3 torus
    int degree(int d) const { return (sphere ? d - 1 : 0) + (torus == 0 ? 0 : torus == 3 ? 2 : 1); }
    std::string label() const {
        static const char* t[] = {"pt", "mer", "lon", "T2"};
        return std::string(sphere ? "S" : "pt") + "x" + t[torus];
    }
};

Vec randomUnit(int d, std::mt19937_64& rng) {
    std::normal_distribution<double> g(0.0, 1.0);
    Vec v(d);
    do {
        for (int i = 0; i < d; ++i) v[i] = g(rng);
    } while (v.norm() < 1e-6);
    return v.normalized();
}

Vec torusPoint(const NormalizedM& m, double phi, double theta) {
    const double rho = m.R + m.r * std::cos(phi);
    Vec w = Vec::Zero(m.ambient);
    w[m.offset] = m.r * std::sin(phi);
    w[m.offset + 1] = rho * std::cos(theta);
    w[m.offset + 2] = rho * std::sin(theta);
    return w;
}

// A random point of the cycle e in R^d x R^{n-d}.
Vec sampleElement(const K0Element& e, int d, const NormalizedM& m, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> ang(0.0, 2.0 * M_PI);
    Vec v = Vec::Zero(d);
    if (e.sphere)
        v = randomUnit(d, rng);
    else
        v[0] = 1.0;
    Vec w;
    switch (e.torus) {
        case 0: w = m.loop(0, M_PI); break;
        case 1: w = m.loop(0, ang(rng)); break;
        case 2: w = m.loop(1, ang(rng)); break;
        default: w = torusPoint(m, ang(rng), ang(rng)); break;
    }
    Vec q(d + m.ambient);
    q << v, w;
    return q;
}

// ----------------------------------------------------------- K1 cycle map

// (v, c1, s1, c2, s2) -> ((v, b1(c1, s1)), (e1, b2(c2, s2))) with the loops
// written polynomially in the circle coordinates, so jets are exact.
class K1CycleAmbient : public AmbientMapT<K1CycleAmbient> {
public:
    K1CycleAmbient(int n, int d, const NormalizedM& m, LoopChoice a, LoopChoice b)
        : AmbientMapT(d + 4, 2 * n), n_(n), d_(d), R_(m.R), r_(m.r), off_(m.offset), a_(a), b_(b) {}

    template <class S>
    void eval(const S* x, S* y) const {
        for (int i = 0; i < 2 * n_; ++i) y[i] = S(0.0);
        for (int i = 0; i < d_; ++i) y[i] = x[i];
        y[n_] = S(1.0);
        loop(a_, x[d_], x[d_ + 1], y + d_);
        loop(b_, x[d_ + 2], x[d_ + 3], y + n_ + d_);
    }

private:
    template <class S>
    void loop(const LoopChoice& l, const S& c, const S& s, S* w) const {
        if (l.which < 0) {
            w[off_ + 2] = S(-(R_ - r_));
            return;
        }
        // (c + i s)^k
        S C = S(1.0), Sn = S(0.0);
        for (int k = 0; k < l.winding; ++k) {
            const S c2 = C * c - Sn * s;
            Sn = C * s + Sn * c;
            C = c2;
        }
        if (l.which == 0) {
            w[off_] = r_ * Sn;
            w[off_ + 2] = -(R_ + r_ * C);
        } else {
            w[off_ + 1] = (R_ - r_) * C;
            w[off_ + 2] = (R_ - r_) * Sn;
        }
    }

    int n_, d_;
    double R_, r_;
    int off_;
    LoopChoice a_, b_;
};

CycleMap k1Cycle(int n, int d, const NormalizedM& m, const LoopChoice& a, const LoopChoice& b) {
    CycleMap c;
    c.n = n;
    c.label = "S" + std::to_string(d - 1) + " x " + a.name() + " x " + b.name();
    c.P = ChartedManifold("P", d + 4, d + 1,
                          Topology::single({Factor::sphere(d - 1), Factor::circle(), Factor::circle()}));
    const auto sphere = geometry::buildRoundSphere(d - 1);
    const auto circle = geometry::buildRoundSphere(1);
    std::vector<ChartPtr> charts;
    for (int ci = 0; ci < sphere.chartsIn(0); ++ci)
        charts.push_back(geometry::makeProduct({sphere.chartPtr(0, ci), circle.chartPtr(0, 0), circle.chartPtr(0, 0)}));
    c.P.addComponent(std::move(charts));
    c.c = std::make_shared<K1CycleAmbient>(n, d, m, a, b);
    return c;
}

// Points of the flat disc live on the S side of the construction, whose two
// charts (the last two) invert in closed form.
std::optional<ManifoldPoint> locateOnS(const ChartedManifold& k1, const Vec& x, double tol) {
    std::optional<ManifoldPoint> best;
    double bestMargin = -1.0;
    for (int ci = k1.chartsIn(0) - 2; ci < k1.chartsIn(0); ++ci) {
        const auto u = k1.locateInChart(0, ci, x, tol);
        if (!u || !k1.chart(0, ci).valid(*u)) continue;
        const double mg = k1.chart(0, ci).domain().margin(*u);
        if (mg > bestMargin) {
            bestMargin = mg;
            best = ManifoldPoint{0, ci, *u};
        }
    }
    return best;
}

Vec vPart(const Vec& x, int d) { return x.head(d); }
Vec wPart(const Vec& x, int d) { return x.tail(x.size() - d); }

}  // namespace

// ---------------------------------------------------------------------- K0

K0Result k0VanishingCertificate(const K0K1Params& p) {
    const int n = p.n, d = p.d;
    if (d < 2 || n != 2 * d + 1) throw ConfigError("the K0 / K1 family needs d >= 2 and n = 2d + 1");
    if (!(p.shift > 0.0)) throw ConfigError("the K0 shift must be positive");
    const NormalizedM m = geometry::buildNormalizedM(p.M, n - d);
    const ChartedManifold k0 = geometry::buildK0(n, d, m);
    // Reach of S^{d-1} x M: the unit sphere and the torus radii both bound it.
    const double reach = std::min({1.0, m.R - m.r, m.r});
    const ChartedManifold k0s = geometry::perturb(k0, geometry::NormalSection::radialBlock(n, d, p.shift), reach);

    K0Result out;
    Certificate& cert = out.certificate;
    cert.kind = "vanishing";
    cert.statement = "k0-coproduct-vanishes";
    cert.provenance = {{"n", n}, {"d", d}, {"M", p.M}, {"shift", p.shift}, {"seed", p.seed}};

    // K_{0,sigma} is exactly {(1 + c) v} x M.
    double radialDefect = 0.0;
    const int per = perDimFor(k0s.intrinsicDim(), 20000);
    for (const auto& z : k0s.samples(per)) {
        const Vec x = k0s.point(z);
        radialDefect = std::max(radialDefect, std::abs(vPart(x, d).norm() - (1.0 + p.shift)));
    }
    cert.hypotheses.push_back({"shifted-sphere-factor", radialDefect < 1e-12, radialDefect,
                               "max | |v| - (1 + c) | over samples of K_{0,sigma}"});
    cert.hypotheses.push_back({"shift-below-reach", p.shift < 0.5 * reach, p.shift,
                               "c < reach / 2 with reach = " + std::to_string(reach)});

    std::vector<K0Element> elems;
    for (bool s : {false, true})
        for (int t = 0; t < 4; ++t) elems.push_back({s, t});

    const SampleCloud cloudM(m.manifold, 96);
    std::mt19937_64 rng(p.seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    double minDist = std::numeric_limits<double>::infinity();
    double maxV = 0.0;
    nlohmann::json perCycle = nlohmann::json::array();
    for (const auto& a : elems)
        for (const auto& b : elems) {
            if (a.degree(d) == 0) continue;  // pt x b is homologous to a sum of the others mod the diagonal
            double cycleMin = std::numeric_limits<double>::infinity();
            for (int s = 0; s < p.samplesPerCycle; ++s) {
                const Vec q = sampleElement(a, d, m, rng), qp = sampleElement(b, d, m, rng);
                const double tau = s == 0 ? 0.0 : s == 1 ? 1.0 : unif(rng);
                const Vec x = ev(q, qp, tau);
                const double vn = vPart(x, d).norm();
                maxV = std::max(maxV, vn);
                const double dm = cloudM.closestPoint(wPart(x, d)).second;
                const double dist = std::hypot(vn - (1.0 + p.shift), dm);
                cycleMin = std::min(cycleMin, dist);
            }
            minDist = std::min(minDist, cycleMin);
            perCycle.push_back({{"cycle", a.label() + " x " + b.label()},
                                {"degree", a.degree(d) + b.degree(d)},
                                {"min_distance", cycleMin}});
            ++out.cycles;
        }
    out.minDistance = minDist;
    out.analyticMargin = 1.0 + p.shift - maxV;
    cert.hypotheses.push_back({"segments-in-unit-v-ball", out.analyticMargin >= p.shift - 1e-12, out.analyticMargin,
                               "1 + c - max |v| over sampled segment points; convexity gives >= c"});
    cert.hypotheses.push_back({"sampled-clearance", minDist > 0.01, minDist,
                               "min distance from sampled ev images to K_{0,sigma}"});

    const auto rel = algebra::relativeDiagonalDims(k0.topology());
    out.delta = algebra::HomologyCoproduct::zero(rel, d);
    cert.evidence = {{"cycles", out.cycles},
                     {"samples_per_cycle", p.samplesPerCycle},
                     {"min_distance", minDist},
                     {"analytic_margin", out.analyticMargin},
                     {"radial_defect", radialDefect},
                     {"per_cycle", perCycle}};
    cert.certified = cert.hypothesesHold();
    cert.verdict = cert.certified ? "delta_K0 = 0 in every degree" : "not certified";
    return out;
}

// ---------------------------------------------------------------------- K1

K1Result k1NonvanishingCertificate(const K0K1Params& p,
                                   const std::vector<std::pair<LoopChoice, LoopChoice>>& loops) {
    const int n = p.n, d = p.d;
    if (d < 2 || n != 2 * d + 1) throw ConfigError("the K0 / K1 family needs d >= 2 and n = 2d + 1");
    if (loops.empty()) throw ConfigError("K1 certificate needs at least one loop pair");
    if (p.qGrid < 2) throw ConfigError("qGrid must be at least 2");
    const NormalizedM m = geometry::buildNormalizedM(p.M, n - d);
    auto rc = geometry::defaultRecipe(n, d, m);
    rc.shift = p.shift;
    const auto build = geometry::buildK1(rc, m);
    const ChartedManifold& ks = build.manifold;
    const int k = 1;  // loops are circles
    const int top = 2 * k + d - 1;

    K1Result out;
    Certificate& cert = out.certificate;
    cert.kind = "nonvanishing";
    cert.statement = "k1-coproduct-nonzero";
    cert.provenance = {{"n", n}, {"d", d}, {"M", p.M}, {"shift", p.shift}, {"q_grid", p.qGrid}};

    cert.hypotheses.push_back({"loop-dimension-window", 1 <= k && k <= n - 2 * d, static_cast<double>(k),
                               "1 <= k <= n - 2d"});

    // Loops stay below the level a of the cap.
    double maxLast = -std::numeric_limits<double>::infinity();
    for (int which = -1; which <= 1; ++which)
        for (int i = 0; i < 256; ++i) {
            const double t = 2.0 * M_PI * i / 256.0;
            const Vec w = which < 0 ? m.loop(0, M_PI) : m.loop(which, t);
            maxLast = std::max(maxLast, w[w.size() - 1]);
        }
    cert.hypotheses.push_back({"loops-below-level", maxLast <= rc.levelA, maxLast,
                               "max last coordinate of the loops against a = " + std::to_string(rc.levelA)});

    const SampleCloud cloudK(ks, perDimFor(ks.intrinsicDim(), 40000));

    // Inside {|v| <= 1, |w| <= 1, w_last <= a} the manifold is the flat disc
    // v = 0.  Random points of both sides of the construction, with extra
    // weight on the polar cap of S that lands near the disc.
    double regionV = 0.0;
    long regionCount = 0;
    {
        std::mt19937_64 rng(p.seed);
        std::uniform_real_distribution<double> ang(0.0, 2.0 * M_PI), unif(0.0, 1.0);
        auto inspect = [&](const Vec& x) {
            const Vec v = vPart(x, d), w = wPart(x, d);
            if (v.norm() <= 1.0 && w.norm() <= 1.0 && w[w.size() - 1] <= rc.levelA) {
                regionV = std::max(regionV, v.norm());
                ++regionCount;
            }
        };
        const int N = n - d;
        Vec z(n);
        for (int i = 0; i < 20000; ++i) {
            Vec q0(n);
            q0 << randomUnit(d, rng), torusPoint(m, ang(rng), ang(rng));
            build.k0SideMap->apply(q0.data(), z.data());
            inspect(z);
        }
        for (int i = 0; i < 40000; ++i) {
            Vec y = randomUnit(N + 1, rng);
            if (i % 2 == 1) {
                // Uniform in the cap |y_rest| <= 1/2 around -e_0.
                Vec t = randomUnit(N, rng) * (0.5 * std::pow(unif(rng), 1.0 / N));
                y[0] = -std::sqrt(1.0 - t.squaredNorm());
                y.tail(N) = t;
            }
            build.sSideMap->apply(y.data(), z.data());
            inspect(z);
        }
    }
    cert.hypotheses.push_back({"flat-region", regionCount > 0 && regionV < 1e-9, regionV,
                               "max |v| over " + std::to_string(regionCount) +
                                   " sampled points of K1_sigma in the segment region"});

    const auto sphere = geometry::buildRoundSphere(d - 1);
    const auto sphereSamples = sphere.samples(d == 2 ? 64 : 16);
    const ProductTopology mTop = m.manifold.topology().components.front();
    const double step = 2.0 * M_PI / p.qGrid;

    algebra::EchelonSpan span(4);
    bool allPairs = true;
    double endpointClear = std::numeric_limits<double>::infinity();
    double worstTau = 0.0, worstV = 0.0, worstSplit = 0.0, worstSegment = 0.0;
    nlohmann::json pairsJson = nlohmann::json::array();

    for (const auto& [la, lb] : loops) {
        const CycleMap cyc = k1Cycle(n, d, m, la, lb);
        const auto pairing = algebra::projectionPairing(mTop, la.cycle(), lb.cycle());
        IntersectionLocus loc;
        loc.cycle = cyc.label;
        loc.expectedDim = cyc.dim() + 1 - ks.codim();
        loc.minSingular = std::numeric_limits<double>::infinity();
        bool fibersOk = true;
        LocusOptions opt;
        for (int i = 0; i < p.qGrid; ++i)
            for (int j = 0; j < p.qGrid; ++j) {
                const double x1 = i * step, x2 = j * step;
                struct Seed {
                    double proxy;
                    std::size_t s;
                    double tau;
                };
                std::vector<Seed> seeds;
                for (std::size_t s = 0; s < sphereSamples.size(); ++s) {
                    const Vec v = sphere.point(sphereSamples[s]);
                    for (int t = 1; t < 64; ++t) {
                        const double tau = t / 64.0;
                        Vec e1 = Vec::Zero(d);
                        e1[0] = 1.0;
                        ++loc.scanned;
                        seeds.push_back({((1.0 - tau) * v + tau * e1).norm(), s, tau});
                    }
                }
                std::sort(seeds.begin(), seeds.end(), [](const Seed& a, const Seed& b) { return a.proxy < b.proxy; });
                std::vector<LocusPoint> found;
                int attempts = 0;
                for (const auto& sd : seeds) {
                    if (sd.proxy > 0.25 || attempts >= 6) break;
                    const auto& sp0 = sphereSamples[sd.s];
                    const Vec v0 = sphere.point(sp0);
                    bool near = false;
                    for (const auto& f : found)
                        if ((vPart(f.q, d) - v0).norm() + std::abs(f.tau - sd.tau) < 0.3) near = true;
                    if (near) continue;
                    ++attempts;
                    ++loc.seeds;
                    Vec u(cyc.dim());
                    u << sp0.u, x1, x2;
                    const ManifoldPoint z{0, sp0.chart, u};
                    const auto [q, qp] = cyc.pair(z);
                    // The seed's ev point sits over the flat disc; its foot
                    // (0, w) there is the natural point of K1_sigma to start from.
                    Vec foot = ev(q, qp, sd.tau);
                    foot.head(d).setZero();
                    const auto located = locateOnS(ks, foot, 1e-9);
                    const ManifoldPoint onK = located ? *located : cloudK.closestPoint(foot).first;
                    auto sol = solveLocusPoint(cyc, ks, z, sd.tau, onK, opt);
                    if (!sol || sol->tau <= 0.0 || sol->tau >= 1.0) continue;
                    // Minimum-norm steps may slide along the loops; within a
                    // fiber only (v, tau) distinguishes solutions.
                    bool dup = false;
                    for (const auto& f : found)
                        if ((vPart(f.q, d) - vPart(sol->q, d)).norm() + std::abs(f.tau - sol->tau) < 1e-6) dup = true;
                    if (!dup) found.push_back(*sol);
                }
                if (found.size() != 1) {
                    fibersOk = false;
                    continue;
                }
                const LocusPoint& lp = found.front();
                Vec e1 = Vec::Zero(d);
                e1[0] = 1.0;
                worstTau = std::max(worstTau, std::abs(lp.tau - 0.5));
                worstV = std::max(worstV, (vPart(lp.q, d) + e1).norm());
                if (lp.rank != n || lp.localDim != 2 * k) fibersOk = false;
                // Split: the midpoint is (0, (b1 + b2) / 2), and the segment
                // from it to the origin lies on K1_sigma.
                Vec mid = Vec::Zero(n);
                mid.tail(n - d) = 0.5 * (wPart(lp.q, d) + wPart(lp.qp, d));
                const Split s = sp(lp.q, lp.qp, lp.tau);
                worstSplit = std::max(worstSplit, (s.m - mid).norm());
                for (int t = 0; t <= 8; ++t) {
                    const Vec x = (t / 8.0) * mid;
                    const auto at = locateOnS(ks, x, 1e-9);
                    worstSegment = std::max(worstSegment, at ? (ks.point(*at) - x).norm()
                                                             : std::numeric_limits<double>::infinity());
                }
                endpointClear = std::min({endpointClear, cloudK.closestPoint(lp.q).second,
                                          cloudK.closestPoint(lp.qp).second});
                loc.points.push_back(lp);
                loc.worstResidual = std::max(loc.worstResidual, lp.residual);
                loc.minSingular = std::min(loc.minSingular, lp.minSingular);
                loc.transversal = loc.transversal && lp.rank == n && lp.localDim == loc.expectedDim;
            }
        if (loc.points.empty()) loc.minSingular = 0.0;
        double hMin = std::numeric_limits<double>::infinity();
        for (const auto& lp : loc.points) hMin = std::min(hMin, lp.h);
        loc.epsilon1 = loc.points.empty() ? 0.0 : 0.5 * hMin;
        // Neighbouring fibers move q or q' by at most one grid step of a loop.
        const int wind = std::max(std::max(la.winding, lb.winding), 1);
        labelComponents(loc, 1.5 * step * wind * std::max(m.r, m.R - m.r));

        const bool ok = fibersOk && loc.components == 1 && pairing.nonzero &&
                        static_cast<int>(loc.points.size()) == p.qGrid * p.qGrid;
        if (ok) {
            algebra::Bits t(4);
            t.set(static_cast<std::size_t>(la.which * 2 + lb.which));
            span.add(t);
        }
        allPairs = allPairs && ok;
        pairsJson.push_back({{"cycle", cyc.label},
                             {"fibers_ok", fibersOk},
                             {"points", loc.points.size()},
                             {"components", loc.components},
                             {"pairing", pairing.explanation},
                             {"pairing_nonzero", pairing.nonzero},
                             {"min_singular", loc.minSingular},
                             {"worst_residual", loc.worstResidual}});
        out.loci.push_back(std::move(loc));
    }

    cert.hypotheses.push_back({"locus-fibers", allPairs, worstTau,
                               "one transversal solution per fiber at tau = 1/2, u = -e1, rank n, local dim 2k"});
    cert.hypotheses.push_back({"locus-position", worstTau < 1e-6 && worstV < 1e-6, std::max(worstTau, worstV),
                               "max |tau - 1/2| and |v + e1| over the locus"});
    cert.hypotheses.push_back({"split-midpoint", worstSplit < 1e-9, worstSplit, "sp midpoint equals (0, (b1 + b2) / 2)"});
    cert.hypotheses.push_back({"split-segment-on-K", worstSegment < 1e-8, worstSegment,
                               "segment from the midpoint to the origin lies on K1_sigma"});
    cert.hypotheses.push_back({"endpoints-clear", endpointClear > 1e-3, endpointClear,
                               "q_z and q'_z stay off K1_sigma"});

    out.certifiedRank = static_cast<int>(span.size());
    const auto rel = algebra::relativeDiagonalDims(ks.topology());
    out.delta = algebra::HomologyCoproduct::unknown(rel, d);
    cert.certified = cert.hypothesesHold() && out.certifiedRank > 0;
    if (cert.certified) out.delta.certifyLowerBound(top, out.certifiedRank);
    cert.evidence = {{"source_degree", top},
                     {"certified_rank", out.certifiedRank},
                     {"flat_region_samples", regionCount},
                     {"endpoint_clearance", endpointClear},
                     {"pairs", pairsJson}};
    cert.verdict = cert.certified ? "rank delta_K1 on H_" + std::to_string(top) + " >= " +
                                        std::to_string(out.certifiedRank)
                                  : "not certified";
    return out;
}

}  // namespace conormal::strops
