// Intersection loci of evaluation maps with K_sigma, and the degree-zero
// classes they and the Morse route define.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <numeric>

#include "conormal/errors.hpp"
#include "conormal/strops.hpp"

namespace conormal::strops {

using geometry::LocalJet;

// ------------------------------------------------------------------ CycleMap

CycleMap::Jet CycleMap::eval(const ManifoldPoint& z) const {
    const LocalJet base = P.eval(z, 1);
    const LocalJet j = geometry::composeJet(*c, base, 1);
    Jet out;
    out.q = j.q.head(n);
    out.qp = j.q.tail(n);
    out.Jq = j.J.topRows(n);
    out.Jqp = j.J.bottomRows(n);
    return out;
}

std::pair<Vec, Vec> CycleMap::pair(const ManifoldPoint& z) const {
    const Vec x = P.point(z);
    Vec y(2 * n);
    c->apply(x.data(), y.data());
    return {y.head(n), y.tail(n)};
}

CycleMap pointTimesLoop(const ChartedManifold& k, int comp, const Vec& anchor) {
    if (k.intrinsicDim() != 1) throw std::invalid_argument("pointTimesLoop needs a curve");
    const int n = k.ambientDim();
    CycleMap c;
    c.n = n;
    c.label = "point x loop on component " + std::to_string(comp);
    c.P = ChartedManifold("loop", n, 1, Topology::single({Factor::circle()}));
    std::vector<geometry::ChartPtr> charts;
    for (int ci = 0; ci < k.chartsIn(comp); ++ci) charts.push_back(k.chartPtr(comp, ci));
    c.P.addComponent(charts);
    // Closest point of the component to the anchor.
    const geometry::SampleCloud cloud(c.P, 512);
    const Vec q0 = c.P.point(cloud.closestPoint(anchor).first);
    Mat A = Mat::Zero(2 * n, n);
    A.bottomRows(n) = Mat::Identity(n, n);
    Vec b = Vec::Zero(2 * n);
    b.head(n) = q0;
    c.c = geometry::makeAffine(A, b);
    return c;
}

// ---------------------------------------------------------- locus solving

namespace {

bool stepPoint(const ChartedManifold& m, ManifoldPoint& p, const Vec& du) {
    const auto& ch = m.chart(p);
    Vec u = ch.domain().wrap(p.u + du);
    if (!ch.domain().contains(u) || !ch.valid(u)) return false;
    p = m.recentre({p.comp, p.chart, u});
    return true;
}

}  // namespace

std::optional<LocusPoint> solveLocusPoint(const CycleMap& c, const ChartedManifold& ks, ManifoldPoint z, double tau,
                                          ManifoldPoint onK, const LocusOptions& opt) {
    const int p = c.dim(), m = ks.intrinsicDim(), n = c.n;
    z = c.P.recentre(z);
    onK = ks.recentre(onK);
    for (int it = 0; it <= opt.maxNewton; ++it) {
        const CycleMap::Jet cj = c.eval(z);
        const LocalJet kj = ks.eval(onK, 1);
        const Vec x = ev(cj.q, cj.qp, tau);
        const Vec F = x - kj.q;
        Mat J(n, p + 1 + m);
        J.leftCols(p) = (1.0 - tau) * cj.Jq + tau * cj.Jqp;
        J.col(p) = cj.qp - cj.q;
        J.rightCols(m) = -kj.J;
        if (F.norm() < opt.residualTol) {
            LocusPoint out;
            out.z = z;
            out.tau = tau;
            out.onK = onK;
            out.q = cj.q;
            out.qp = cj.qp;
            out.x = kj.q;
            out.residual = F.norm();
            Eigen::JacobiSVD<Mat> svd(J);
            const Vec sv = svd.singularValues();
            const double tol = 1e-8 * std::max(1.0, sv[0]);
            out.rank = static_cast<int>((sv.array() > tol).count());
            out.minSingular = sv.size() >= n ? sv[n - 1] : 0.0;
            out.localDim = static_cast<int>(J.cols()) - out.rank;
            out.h = tau * (1.0 - tau) * 0.5 * (cj.qp - cj.q).squaredNorm();
            return out;
        }
        if (it == opt.maxNewton) break;
        Eigen::CompleteOrthogonalDecomposition<Mat> cod(J);
        Vec step = -cod.solve(F);
        const double cap = 0.5;
        if (step.norm() > cap) step *= cap / step.norm();
        bool moved = false;
        for (double alpha = 1.0; alpha > 1e-6 && !moved; alpha *= 0.5) {
            ManifoldPoint z2 = z, k2 = onK;
            if (!stepPoint(c.P, z2, alpha * step.head(p))) continue;
            if (!stepPoint(ks, k2, alpha * step.tail(m))) continue;
            z = z2;
            onK = k2;
            tau += alpha * step[p];
            moved = true;
        }
        if (!moved) return std::nullopt;
        if (tau < -0.5 || tau > 1.5) return std::nullopt;
    }
    return std::nullopt;
}

void labelComponents(IntersectionLocus& l, double linkRadius) {
    const std::size_t N = l.points.size();
    std::vector<std::size_t> parent(N);
    std::iota(parent.begin(), parent.end(), 0);
    std::function<std::size_t(std::size_t)> find = [&](std::size_t i) {
        return parent[i] == i ? i : parent[i] = find(parent[i]);
    };
    for (std::size_t i = 0; i < N; ++i)
        for (std::size_t j = i + 1; j < N; ++j) {
            const auto& a = l.points[i];
            const auto& b = l.points[j];
            const double dz = std::sqrt((a.q - b.q).squaredNorm() + (a.qp - b.qp).squaredNorm());
            if (dz + std::abs(a.tau - b.tau) < linkRadius) parent[find(i)] = find(j);
        }
    std::map<std::size_t, int> label;
    for (std::size_t i = 0; i < N; ++i) {
        const std::size_t r = find(i);
        auto it = label.find(r);
        if (it == label.end()) it = label.emplace(r, static_cast<int>(label.size())).first;
        l.points[i].component = it->second;
    }
    l.components = static_cast<int>(label.size());
}

IntersectionLocus intersectionLocus(const CycleMap& c, const ChartedManifold& ks, const LocusOptions& opt) {
    if (ks.ambientDim() != c.n) throw std::invalid_argument("cycle and K_sigma live in different spaces");
    IntersectionLocus out;
    out.cycle = c.label;
    out.expectedDim = c.dim() + 1 - ks.codim();
    if (out.expectedDim < 0) return out;

    const geometry::SampleCloud cloudK(ks, ks.intrinsicDim() == 1 ? 512 : 32);
    const auto zs = c.P.samples(opt.perDim);
    // Scan spacing in R^n: the largest ambient step between neighbouring
    // samples, bounded by the speed of ev_c.
    double speed = 0.0, span = 0.0;
    for (const auto& z : zs) {
        const auto j = c.eval(z);
        speed = std::max(speed, std::max(j.Jq.norm(), j.Jqp.norm()));
        span = std::max(span, (j.qp - j.q).norm());
    }
    double paramStep = 0.0;
    for (int ci = 0; ci < c.P.chartsIn(0); ++ci) {
        const auto& dom = c.P.chart(0, ci).domain();
        for (int i = 0; i < dom.dim(); ++i) paramStep = std::max(paramStep, (dom.hi[i] - dom.lo[i]) / opt.perDim);
    }
    const double scan = std::max(speed * paramStep, span / opt.tauSamples);
    const double seedDist = opt.seedDistance > 0.0 ? opt.seedDistance : 2.0 * (scan + cloudK.spacing());

    struct Seed {
        double dist;
        std::size_t z;
        double tau;
        std::size_t k;
    };
    std::vector<Seed> seeds;
    for (std::size_t i = 0; i < zs.size(); ++i) {
        const auto [q, qp] = c.pair(zs[i]);
        for (int t = 1; t < opt.tauSamples; ++t) {
            const double tau = static_cast<double>(t) / opt.tauSamples;
            ++out.scanned;
            if (tau * (1.0 - tau) * 0.5 * (qp - q).squaredNorm() < opt.hFloor) continue;
            const Vec x = ev(q, qp, tau);
            const std::size_t kn = cloudK.nearest(x);
            const double dist = (cloudK.ambient().col(static_cast<Eigen::Index>(kn)) - x).norm();
            if (dist < seedDist) seeds.push_back({dist, i, tau, kn});
        }
    }
    std::sort(seeds.begin(), seeds.end(), [](const Seed& a, const Seed& b) { return a.dist < b.dist; });
    out.seeds = static_cast<long>(seeds.size());

    const double link = opt.linkRadius > 0.0 ? opt.linkRadius : 3.0 * scan;
    out.worstResidual = 0.0;
    out.minSingular = std::numeric_limits<double>::infinity();
    int attempts = 0;
    for (const auto& sd : seeds) {
        // Seeds next to a known solution add nothing.
        const auto [q, qp] = c.pair(zs[sd.z]);
        bool near = false;
        for (const auto& p : out.points)
            if (std::sqrt((p.q - q).squaredNorm() + (p.qp - qp).squaredNorm()) + std::abs(p.tau - sd.tau) < 0.5 * link) {
                near = true;
                break;
            }
        if (near) continue;
        if (++attempts > 4000) break;
        auto sol = solveLocusPoint(c, ks, zs[sd.z], sd.tau, cloudK.points()[sd.k], opt);
        if (!sol || sol->h < opt.hFloor || sol->tau <= 0.0 || sol->tau >= 1.0) continue;
        bool dup = false;
        for (const auto& p : out.points)
            if (std::sqrt((p.q - sol->q).squaredNorm() + (p.qp - sol->qp).squaredNorm()) +
                    std::abs(p.tau - sol->tau) <
                opt.dedup) {
                dup = true;
                break;
            }
        if (dup) continue;
        out.points.push_back(*sol);
    }
    double hMin = std::numeric_limits<double>::infinity();
    for (const auto& p : out.points) {
        out.worstResidual = std::max(out.worstResidual, p.residual);
        out.minSingular = std::min(out.minSingular, p.minSingular);
        if (p.rank < c.n || p.localDim != out.expectedDim) out.transversal = false;
        hMin = std::min(hMin, p.h);
    }
    if (out.points.empty()) out.minSingular = 0.0;
    out.epsilon1 = out.points.empty() ? 0.0 : 0.5 * hMin;
    labelComponents(out, link);
    return out;
}

nlohmann::json IntersectionLocus::toJson() const {
    nlohmann::json pts = nlohmann::json::array();
    for (const auto& p : points) {
        pts.push_back({{"tau", p.tau},
                       {"z", std::vector<double>(p.z.u.data(), p.z.u.data() + p.z.u.size())},
                       {"z_chart", p.z.chart},
                       {"q", std::vector<double>(p.q.data(), p.q.data() + p.q.size())},
                       {"qp", std::vector<double>(p.qp.data(), p.qp.data() + p.qp.size())},
                       {"x", std::vector<double>(p.x.data(), p.x.data() + p.x.size())},
                       {"residual", p.residual},
                       {"rank", p.rank},
                       {"min_singular", p.minSingular},
                       {"local_dim", p.localDim},
                       {"component", p.component},
                       {"h", p.h}});
    }
    return {{"cycle", cycle},
            {"expected_dim", expectedDim},
            {"components", components},
            {"worst_residual", worstResidual},
            {"min_singular", minSingular},
            {"transversal", transversal},
            {"epsilon1", epsilon1},
            {"scanned", scanned},
            {"seeds", seeds},
            {"points", pts}};
}

// ----------------------------------------------------- degree-zero classes

ComponentPairBasis::ComponentPairBasis(int components) {
    for (int a = 0; a < components; ++a)
        for (int b = 0; b < components; ++b)
            if (a != b) pairs.emplace_back(a, b);
}

int ComponentPairBasis::indexOf(int a, int b) const {
    for (std::size_t i = 0; i < pairs.size(); ++i)
        if (pairs[i] == std::make_pair(a, b)) return static_cast<int>(i);
    return -1;
}

std::string ComponentPairBasis::label(std::size_t t) const {
    const auto& [a, b] = pairs[t / pairs.size()];
    const auto& [c, d] = pairs[t % pairs.size()];
    return "[C" + std::to_string(a + 1) + "xC" + std::to_string(b + 1) + "](x)[C" + std::to_string(c + 1) + "xC" +
           std::to_string(d + 1) + "]";
}

namespace {

int componentOf(const geometry::SampleCloud& cloud, const Vec& x) {
    const auto [p, dist] = cloud.closestPoint(x);
    if (dist > 1e-6) throw NumericalError(Stage::Strops, "point is not on K");
    return p.comp;
}

}  // namespace

algebra::Bits geometricClass(const ChartedManifold& k, const IntersectionLocus& l) {
    if (l.expectedDim != 0) throw std::invalid_argument("degree-zero class needs a zero-dimensional locus");
    const ComponentPairBasis basis(k.components());
    algebra::Bits out(basis.tensorDim());
    const geometry::SampleCloud cloud(k, k.intrinsicDim() == 1 ? 512 : 32);
    const auto P = basis.pairs.size();
    for (const auto& p : l.points) {
        const int a = componentOf(cloud, p.q), m = componentOf(cloud, p.x), b = componentOf(cloud, p.qp);
        const int i = basis.indexOf(a, m), j = basis.indexOf(m, b);
        if (i >= 0 && j >= 0) out.flip(static_cast<std::size_t>(i) * P + static_cast<std::size_t>(j));
    }
    return out;
}

nlohmann::json RouteComparison::toJson() const {
    nlohmann::json m = nlohmann::json::array(), g = nlohmann::json::array();
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (morse[i]) m.push_back(labels[i]);
        if (geometric[i]) g.push_back(labels[i]);
    }
    return {{"morse_class", m}, {"geometric_class", g}, {"source_cycle", sourceCycle}, {"agree", agree}};
}

RouteComparison compareRoutes(const ChartedManifold& k, const chords::ChordSet& s, const MorseComplex& cg,
                              const CoproductMatrix& delta, const IntersectionLocus& locus, int comp) {
    const ComponentPairBasis basis(k.components());
    const auto N = static_cast<std::size_t>(s.chords.size());
    if (static_cast<std::size_t>(delta.chordCount) != N) throw std::invalid_argument("chord count mismatch");

    // The comp x comp block of the complex (trajectories never leave a
    // component of K x K).
    std::map<int, std::vector<int>> block;
    for (const auto& c : s.chords)
        if (c.p.comp == comp && c.pp.comp == comp) block[c.index].push_back(c.id);
    const algebra::Mod2Matrix D = cg.full();
    algebra::Mod2Complex sub;
    for (const auto& [deg, ids] : block) {
        std::vector<std::string> labels;
        for (int id : ids) labels.push_back(std::to_string(id));
        sub.setBasis(deg, labels);
    }
    for (const auto& [deg, ids] : block) {
        auto lower = block.find(deg - 1);
        if (lower == block.end()) continue;
        algebra::Mod2Matrix m(lower->second.size(), ids.size());
        for (std::size_t r = 0; r < lower->second.size(); ++r)
            for (std::size_t c = 0; c < ids.size(); ++c)
                m.set(r, c, D.get(static_cast<std::size_t>(lower->second[r]), static_cast<std::size_t>(ids[c])));
        sub.setDifferential(deg, m);
    }
    const auto h = algebra::homology(sub);
    auto reps = h.representatives.find(1);
    if (reps == h.representatives.end() || reps->second.size() != 1)
        throw NumericalError(Stage::Strops, "the diagonal block does not have one-dimensional H_1");

    RouteComparison out;
    algebra::Bits z(N);
    const auto& ids1 = block.at(1);
    for (std::size_t i = 0; i < ids1.size(); ++i)
        if (reps->second[0][i]) {
            z.set(static_cast<std::size_t>(ids1[i]));
            out.sourceCycle.push_back(ids1[i]);
        }
    const algebra::Bits w = delta.full.apply(z);
    out.morse = algebra::Bits(basis.tensorDim());
    const auto P = basis.pairs.size();
    for (std::size_t r = 0; r < w.size(); ++r) {
        if (!w[r]) continue;
        const auto& c1 = s.chords[r / N];
        const auto& c2 = s.chords[r % N];
        if (c1.index != 0 || c2.index != 0) continue;
        const int i = basis.indexOf(c1.p.comp, c1.pp.comp), j = basis.indexOf(c2.p.comp, c2.pp.comp);
        if (i >= 0 && j >= 0) out.morse.flip(static_cast<std::size_t>(i) * P + static_cast<std::size_t>(j));
    }
    out.geometric = geometricClass(k, locus);
    for (std::size_t t = 0; t < basis.tensorDim(); ++t) out.labels.push_back(basis.label(t));
    out.agree = out.morse == out.geometric;
    return out;
}

}  // namespace conormal::strops
