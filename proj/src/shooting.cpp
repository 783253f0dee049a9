// Trajectory counting by shooting from the one- or two-dimensional side of a
// pair of chords, and assembly of the Morse complex.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <stdexcept>

#include "conormal/errors.hpp"
#include "conormal/morseflow.hpp"

namespace conormal::morseflow {

// ------------------------------------------------------------------ branches

double Branch::tMax() const { return flow.trace.empty() ? 0.0 : flow.trace.back().t; }

namespace {

std::size_t segmentOf(const std::vector<FlowSample>& tr, double t) {
    auto it = std::upper_bound(tr.begin(), tr.end(), t, [](double v, const FlowSample& s) { return v < s.t; });
    std::size_t i = it == tr.begin() ? 0 : static_cast<std::size_t>(it - tr.begin()) - 1;
    return std::min(i, tr.size() - 2);
}

}  // namespace

Vec Branch::at(double t) const {
    const auto& tr = flow.trace;
    if (tr.size() == 1) return tr[0].y;
    const std::size_t i = segmentOf(tr, t);
    const double h = tr[i + 1].t - tr[i].t;
    const double s = std::clamp((t - tr[i].t) / h, 0.0, 1.0);
    const double h00 = 2 * s * s * s - 3 * s * s + 1, h10 = s * s * s - 2 * s * s + s;
    const double h01 = -2 * s * s * s + 3 * s * s, h11 = s * s * s - s * s;
    return h00 * tr[i].y + h10 * h * tr[i].dy + h01 * tr[i + 1].y + h11 * h * tr[i + 1].dy;
}

Vec Branch::velocity(double t) const {
    const auto& tr = flow.trace;
    if (tr.size() == 1) return tr[0].dy;
    const std::size_t i = segmentOf(tr, t);
    const double h = tr[i + 1].t - tr[i].t;
    const double s = std::clamp((t - tr[i].t) / h, 0.0, 1.0);
    const double d00 = 6 * s * s - 6 * s, d10 = 3 * s * s - 4 * s + 1;
    const double d01 = -6 * s * s + 6 * s, d11 = 3 * s * s - 2 * s;
    return (d00 * tr[i].y + d01 * tr[i + 1].y) / h + d10 * tr[i].dy + d11 * tr[i + 1].dy;
}

PairPoint Branch::seed(double t) const {
    const auto& tr = flow.trace;
    std::size_t best = 0;
    double bd = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < tr.size(); ++i) {
        const double d = std::abs(tr[i].t - t);
        if (d < bd) {
            bd = d;
            best = i;
        }
    }
    return tr[best].at;
}

std::vector<Branch> branches(const FlowContext& ctx, int x, int direction, double radiusScale) {
    const auto& l = ctx.local(x);
    const int dim = ctx.dim();
    int col = -1;
    if (direction > 0) {
        if (l.index != 1) throw std::invalid_argument("unstable branches need an index-1 chord");
        col = 0;
    } else {
        if (dim - l.index != 1) throw std::invalid_argument("stable branches need a chord of co-index 1");
        col = dim - 1;
    }
    std::vector<Branch> out;
    for (int sign : {1, -1}) {
        Vec c(1);
        c[0] = sign;
        FlowOptions opt;
        opt.direction = direction;
        opt.record = true;
        opt.ignoreChord = x;
        Branch b;
        b.chord = x;
        b.sign = sign;
        b.direction = direction;
        b.flow = ctx.integrate(ctx.rayStart(x, {col}, c, radiusScale * l.shootRadius), opt);
        out.push_back(std::move(b));
    }
    return out;
}

// ------------------------------------------------------------ circle shooting

namespace {

struct Ray {
    double theta = 0.0;
    bool near = false;
    int side = 0;
    int endChord = -1;
    FlowEnd end = FlowEnd::TimeLimit;
    double distance = 0.0;
    double minE = 0.0;
};

// Shoots over the circle of directions in the two-dimensional unstable
// (direction +1) or stable (-1) space of src and counts flow lines into the
// target, located as sign changes of the target's escape coordinate.
std::vector<TrajectoryHit> circleHits(const FlowContext& ctx, int src, int target, int direction,
                                      const CountOptions& opt, bool& suspect) {
    const auto& ls = ctx.local(src);
    const auto& lt = ctx.local(target);
    const int dim = ctx.dim();
    const std::vector<int> dirs = direction > 0 ? std::vector<int>{0, 1} : std::vector<int>{dim - 2, dim - 1};
    const int escape = direction > 0 ? 0 : dim - 1;
    const double r = opt.radiusScale * ls.shootRadius;
    // Start on the backward linear image of a circle of radius R, so that
    // uniformly spaced angles stay uniformly spaced once the rays leave the
    // linear regime instead of collapsing onto the stronger eigendirection.
    const double R = std::max(r, 0.5 * ls.coneRadius);
    const double l0 = std::abs(ls.lambda[dirs[0]]), l1 = std::abs(ls.lambda[dirs[1]]);
    const double lmax = std::max(l0, l1);
    const double a0 = R * std::pow(r / R, l0 / lmax) / r, a1 = R * std::pow(r / R, l1 / lmax) / r;

    auto shoot = [&](double theta) {
        Vec c(2);
        c << a0 * std::cos(theta), a1 * std::sin(theta);
        FlowOptions fo;
        fo.direction = direction;
        fo.ignoreChord = src;
        const FlowResult f = ctx.integrate(ctx.rayStart(src, dirs, c, r), fo, target);
        Ray ray;
        ray.theta = theta;
        ray.end = f.reason;
        ray.endChord = f.chord;
        ray.distance = f.watchDistance;
        ray.minE = f.minE;
        ray.near = f.watchDistance < 2.0 * lt.coneRadius;
        if (ray.near && f.watchCoordinates.size() > escape)
            ray.side = f.watchCoordinates[escape] >= 0 ? 1 : -1;
        return ray;
    };

    std::vector<TrajectoryHit> hits;
    const double twoPi = 2.0 * std::numbers::pi;
    std::function<void(const Ray&, const Ray&, int)> scan = [&](const Ray& a, const Ray& b, int depth) {
        const double width = b.theta - a.theta;
        if (a.near && b.near && a.side != b.side) {
            Ray lo = a, hi = b;
            for (int it = 0; it < opt.refineDepth && hi.theta - lo.theta > 1e-13; ++it) {
                const Ray mid = shoot(0.5 * (lo.theta + hi.theta));
                if (!mid.near) {
                    // The pass widened out between two near rays: the two
                    // sides are separated by something other than one hit.
                    suspect = true;
                    scan(lo, mid, depth + 1);
                    scan(mid, hi, depth + 1);
                    return;
                }
                (mid.side == lo.side ? lo : hi) = mid;
            }
            TrajectoryHit h;
            h.parameter = 0.5 * (lo.theta + hi.theta);
            h.residual = std::min(lo.distance, hi.distance);
            h.minEnergy = std::min(lo.minE, hi.minE);
            h.method = direction > 0 ? "circle" : "reverse-circle";
            hits.push_back(h);
            return;
        }
        const bool differs = a.end != b.end || a.endChord != b.endChord || a.near != b.near;
        if ((differs || a.near || b.near) && depth < 14 && width > 1e-9) {
            const Ray mid = shoot(0.5 * (a.theta + b.theta));
            scan(a, mid, depth + 1);
            scan(mid, b, depth + 1);
        }
    };

    std::vector<Ray> rays;
    for (int i = 0; i < opt.rays; ++i) rays.push_back(shoot(twoPi * i / opt.rays));
    for (int i = 0; i < opt.rays; ++i) {
        Ray b = rays[static_cast<std::size_t>((i + 1) % opt.rays)];
        if (i + 1 == opt.rays) b.theta += twoPi;
        scan(rays[static_cast<std::size_t>(i)], b, 0);
    }
    // Isolation: hits closer than the merge radius are one cluster.
    std::sort(hits.begin(), hits.end(), [](const auto& p, const auto& q) { return p.parameter < q.parameter; });
    for (std::size_t i = 1; i < hits.size(); ++i)
        if (hits[i].parameter - hits[i - 1].parameter < 1e-4 * twoPi) suspect = true;
    if (hits.size() > 1 && hits.front().parameter + twoPi - hits.back().parameter < 1e-4 * twoPi) suspect = true;
    return hits;
}

bool sameComponents(const FlowContext& ctx, int a, int b) {
    const auto& ca = ctx.chords().chords[static_cast<std::size_t>(a)];
    const auto& cb = ctx.chords().chords[static_cast<std::size_t>(b)];
    return ca.p.comp == cb.p.comp && ca.pp.comp == cb.pp.comp;
}

TrajectoryHit branchHit(const Branch& b, const FlowContext& ctx, int target) {
    TrajectoryHit h;
    h.parameter = b.sign;
    h.residual = (pairAmbient(ctx.manifold(), b.flow.end) - ctx.local(target).y).norm();
    h.minEnergy = b.flow.minE;
    h.method = b.direction > 0 ? "unstable-branch" : "stable-branch";
    return h;
}

}  // namespace

nlohmann::json TrajectoryCount::toJson() const {
    nlohmann::json j;
    j["source"] = source;
    j["target"] = target;
    j["count"] = count;
    j["raw"] = raw;
    j["method"] = method;
    j["suspect"] = suspect;
    auto arr = nlohmann::json::array();
    for (const auto& h : hits)
        arr.push_back({{"parameter", h.parameter}, {"residual", h.residual}, {"min_energy", h.minEnergy}});
    j["hits"] = arr;
    return j;
}

TrajectoryCount countTrajectories(const FlowContext& ctx, int x, int xp, const CountOptions& opt) {
    const auto& lx = ctx.local(x);
    const auto& lp = ctx.local(xp);
    if (x == xp || lp.index != lx.index - 1)
        throw std::invalid_argument("trajectory count needs ind x' = ind x - 1");
    TrajectoryCount tc;
    tc.source = x;
    tc.target = xp;
    if (!sameComponents(ctx, x, xp)) {
        tc.method = "components";
        return tc;
    }
    const int dim = ctx.dim();
    const int du = lx.index, ds = dim - lp.index;
    if (du == 1 || ds == 1) {
        const bool forward = du == 1;
        tc.method = forward ? "unstable-branch" : "stable-branch";
        for (const auto& b : branches(ctx, forward ? x : xp, forward ? 1 : -1, opt.radiusScale)) {
            if (b.flow.reason == FlowEnd::Chord && b.flow.chord == (forward ? xp : x))
                tc.hits.push_back(branchHit(b, ctx, forward ? xp : x));
        }
    } else if (du == 2 || ds == 2) {
        const bool forward = du == 2;
        tc.method = forward ? "circle" : "reverse-circle";
        tc.hits = forward ? circleHits(ctx, x, xp, 1, opt, tc.suspect) : circleHits(ctx, xp, x, -1, opt, tc.suspect);
    } else {
        throw NumericalError(Stage::MorseFlow, "trajectory space between chords " + std::to_string(x) + " and " +
                                                   std::to_string(xp) + " needs shooting over a sphere of dimension " +
                                                   std::to_string(std::min(du, ds) - 1) + " > 1");
    }
    tc.raw = static_cast<int>(tc.hits.size());
    tc.count = tc.raw % 2;
    return tc;
}

// ------------------------------------------------------------- the complex

algebra::Mod2Complex MorseComplex::toMod2() const {
    algebra::Mod2Complex c;
    for (const auto& [deg, ids] : basis) {
        std::vector<std::string> labels;
        for (int id : ids) labels.push_back("c" + std::to_string(id));
        c.setBasis(deg, labels);
    }
    for (const auto& [deg, m] : differential) c.setDifferential(deg, m);
    return c;
}

algebra::Mod2Matrix MorseComplex::full() const {
    algebra::Mod2Matrix out(static_cast<std::size_t>(chordCount), static_cast<std::size_t>(chordCount));
    for (const auto& [deg, m] : differential) {
        const auto& src = basis.at(deg);
        const auto& dst = basis.at(deg - 1);
        for (std::size_t r = 0; r < m.rows(); ++r)
            for (std::size_t c = 0; c < m.cols(); ++c)
                if (m.get(r, c)) out.set(static_cast<std::size_t>(dst[r]), static_cast<std::size_t>(src[c]), true);
    }
    return out;
}

algebra::HomologyData MorseComplex::homology() const { return algebra::homology(toMod2()); }

bool MorseComplex::squareZero() const { return !toMod2().squareZeroFailure().has_value(); }

nlohmann::json MorseComplex::toJson() const {
    nlohmann::json j;
    j["manifold"] = manifold;
    j["metric"] = metricTag;
    j["epsilon0"] = epsilon0;
    j["dim"] = dim;
    nlohmann::json b = nlohmann::json::object();
    for (const auto& [deg, ids] : basis) b[std::to_string(deg)] = ids;
    j["basis"] = b;
    nlohmann::json d = nlohmann::json::object();
    for (const auto& [deg, m] : differential) d[std::to_string(deg)] = m.toJson();
    j["differential"] = d;
    auto arr = nlohmann::json::array();
    for (const auto& c : counts) arr.push_back(c.toJson());
    j["trajectories"] = arr;
    j["homology"] = algebra::toJson(homology().dims);
    return j;
}

namespace {

// Fills all differentials at one shooting radius.
std::map<int, algebra::Mod2Matrix> differentials(const FlowContext& ctx, const std::map<int, std::vector<int>>& basis,
                                                 const CountOptions& opt, std::vector<TrajectoryCount>* counts) {
    std::map<int, algebra::Mod2Matrix> d;
    const int dim = ctx.dim();
    for (const auto& [deg, src] : basis) {
        auto it = basis.find(deg - 1);
        if (it == basis.end()) continue;
        const auto& dst = it->second;
        algebra::Mod2Matrix m(dst.size(), src.size());
        auto put = [&](std::size_t r, std::size_t c, TrajectoryCount tc) {
            if (tc.count) m.set(r, c, true);
            if (counts && tc.raw > 0) counts->push_back(std::move(tc));
        };
        if (deg == 1 || dim - (deg - 1) == 1) {
            // Branch flows, one integration per branch and all targets at once.
            const bool forward = deg == 1;
            const auto& outer = forward ? src : dst;
            for (std::size_t a = 0; a < outer.size(); ++a) {
                const auto bs = branches(ctx, outer[a], forward ? 1 : -1, opt.radiusScale);
                const auto& inner = forward ? dst : src;
                for (std::size_t b = 0; b < inner.size(); ++b) {
                    TrajectoryCount tc;
                    tc.source = forward ? outer[a] : inner[b];
                    tc.target = forward ? inner[b] : outer[a];
                    tc.method = forward ? "unstable-branch" : "stable-branch";
                    for (const auto& br : bs)
                        if (br.flow.reason == FlowEnd::Chord && br.flow.chord == inner[b])
                            tc.hits.push_back(branchHit(br, ctx, inner[b]));
                    tc.raw = static_cast<int>(tc.hits.size());
                    tc.count = tc.raw % 2;
                    put(forward ? b : a, forward ? a : b, std::move(tc));
                }
            }
        } else {
            for (std::size_t c = 0; c < src.size(); ++c)
                for (std::size_t r = 0; r < dst.size(); ++r) put(r, c, countTrajectories(ctx, src[c], dst[r], opt));
        }
        d[deg] = std::move(m);
    }
    return d;
}

}  // namespace

MorseComplex buildComplex(const FlowContext& ctx, const ComplexOptions& opt) {
    const auto& s = ctx.chords();
    if (!s.allNondegenerate()) throw HypothesisError(Stage::MorseFlow, "degenerate chords present; re-perturb K");
    MorseComplex mc;
    mc.manifold = s.manifold;
    mc.metricTag = ctx.metric().tag();
    mc.epsilon0 = ctx.epsilon0();
    mc.dim = ctx.dim();
    mc.chordCount = static_cast<int>(s.chords.size());
    for (int deg = 0; deg <= ctx.dim(); ++deg) {
        auto ids = s.ofIndex(deg);
        if (!ids.empty()) mc.basis[deg] = std::move(ids);
    }
    mc.differential = differentials(ctx, mc.basis, opt.count, &mc.counts);
    for (const auto& tc : mc.counts) {
        if (tc.suspect)
            throw NumericalError(Stage::MorseFlow, "Morse-Smale suspect: non-isolated hits from chord " +
                                                       std::to_string(tc.source) + " to " + std::to_string(tc.target));
        // Trajectories between chords stay above the filtration floor.
        for (const auto& h : tc.hits)
            if (h.minEnergy < mc.epsilon0)
                throw NumericalError(Stage::MorseFlow, "trajectory dips below the filtration floor");
    }
    if (opt.radiusCheck) {
        CountOptions twice = opt.count;
        twice.radiusScale *= 2.0;
        const auto d2 = differentials(ctx, mc.basis, twice, nullptr);
        for (const auto& [deg, m] : mc.differential)
            if (!(d2.at(deg) == m))
                throw NumericalError(Stage::MorseFlow,
                                     "trajectory counts into degree " + std::to_string(deg - 1) +
                                         " change when the shooting radius doubles");
    }
    if (auto bad = mc.toMod2().squareZeroFailure())
        throw NumericalError(Stage::MorseFlow, "d o d != 0 at degree " + std::to_string(*bad) + " (" +
                                                   std::to_string(mc.counts.size()) + " nonzero counts)");
    return mc;
}

}  // namespace conormal::morseflow
