// Splitting of segments and the Morse-level coproduct on closed curves.

#include "conormal/strops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <unordered_map>

#include "conormal/errors.hpp"

namespace conormal::strops {

using morseflow::Branch;
using morseflow::FlowEnd;
using morseflow::FlowOptions;
using morseflow::PairPoint;

// ------------------------------------------------------------------ splitting

SplitConfig SplitConfig::fromEnergy(double epsilon0, double diameter, double margin) {
    if (epsilon0 <= 0.0 || diameter <= 0.0) throw std::invalid_argument("tau0 needs positive eps0 and diameter");
    SplitConfig c;
    c.tau0 = std::min(0.25, (1.0 - margin) * std::sqrt(2.0 * epsilon0) / diameter);
    return c;
}

bool SplitConfig::satisfies(double epsilon0, double diameter) const {
    return tau0 > 0.0 && tau0 < 0.5 && 0.5 * tau0 * tau0 * diameter * diameter < epsilon0;
}

Vec ev(const Vec& q, const Vec& qp, double tau) {
    if (q.size() != qp.size()) throw std::invalid_argument("ev: endpoint dimensions differ");
    return (1.0 - tau) * q + tau * qp;
}

Vec Split::first() const {
    Vec y(q.size() + m.size());
    y << q, m;
    return y;
}

Vec Split::second() const {
    Vec y(m.size() + qp.size());
    y << m, qp;
    return y;
}

Split sp(const Vec& q, const Vec& qp, double tau) { return {q, ev(q, qp, tau), qp}; }

Split spOnK(const ChartedManifold& k, const Vec& q, const Vec& qp, double tau, double tol) {
    Split s = sp(q, qp, tau);
    const geometry::SampleCloud cloud(k, k.intrinsicDim() == 1 ? 256 : 24);
    const auto [p, dist] = cloud.closestPoint(s.m);
    if (dist > tol)
        throw HypothesisError(Stage::Strops, "split point lies " + std::to_string(dist) + " away from K");
    s.m = k.point(p);
    return s;
}

// ------------------------------------------------------- coproduct matrices

bool CoproductMatrix::entry(int source, int first, int second) const {
    return full.get(static_cast<std::size_t>(first * chordCount + second), static_cast<std::size_t>(source));
}

bool CoproductMatrix::degreeShiftHolds() const {
    const auto N = static_cast<std::size_t>(chordCount);
    for (std::size_t r = 0; r < full.rows(); ++r)
        for (std::size_t c = 0; c < full.cols(); ++c)
            if (full.get(r, c) && index[r / N] + index[r % N] != index[c] - d + 1) return false;
    return true;
}

std::map<std::tuple<int, int, int>, int> CoproductMatrix::rankProfile() const {
    std::map<std::tuple<int, int, int>, std::vector<std::size_t>> rows;
    std::map<int, std::vector<std::size_t>> cols;
    const auto N = static_cast<std::size_t>(chordCount);
    for (std::size_t c = 0; c < N; ++c) cols[index[c]].push_back(c);
    std::map<std::tuple<int, int, int>, int> out;
    for (const auto& [p, cs] : cols) {
        std::map<std::pair<int, int>, std::vector<std::size_t>> byBidegree;
        for (std::size_t i = 0; i < N; ++i)
            for (std::size_t j = 0; j < N; ++j)
                if (index[i] + index[j] == p - d + 1) byBidegree[{index[i], index[j]}].push_back(i * N + j);
        for (const auto& [bd, rs] : byBidegree) {
            algebra::Mod2Matrix sub(rs.size(), cs.size());
            for (std::size_t a = 0; a < rs.size(); ++a)
                for (std::size_t b = 0; b < cs.size(); ++b) sub.set(a, b, full.get(rs[a], cs[b]));
            out[{p, bd.first, bd.second}] = static_cast<int>(sub.rank());
        }
    }
    return out;
}

double CoproductMatrix::minSplitEnergy() const {
    double e = std::numeric_limits<double>::infinity();
    for (const auto& h : hits)
        if (h.counted) e = std::min({e, h.energyFirst, h.energySecond});
    return e;
}

nlohmann::json CoproductMatrix::toJson() const {
    nlohmann::json entries = nlohmann::json::array();
    const auto N = static_cast<std::size_t>(chordCount);
    for (std::size_t r = 0; r < full.rows(); ++r)
        for (std::size_t c = 0; c < full.cols(); ++c)
            if (full.get(r, c)) entries.push_back({{"source", c}, {"first", r / N}, {"second", r % N}});
    nlohmann::json profile = nlohmann::json::array();
    for (const auto& [key, rank] : rankProfile()) {
        const auto [p, a, b] = key;
        profile.push_back({{"source_index", p}, {"first_index", a}, {"second_index", b}, {"rank", rank}});
    }
    nlohmann::json hs = nlohmann::json::array();
    for (const auto& h : hits) {
        hs.push_back({{"source", h.source},
                      {"first", h.first},
                      {"second", h.second},
                      {"method", h.method},
                      {"tau", h.tau},
                      {"min_singular", h.minSingular},
                      {"energy_first", h.energyFirst},
                      {"energy_second", h.energySecond},
                      {"counted", h.counted}});
    }
    return {{"route", route},  {"d", d},         {"chords", chordCount}, {"epsilon0", epsilon0},
            {"tau0", tau0},    {"entries", entries}, {"rank_profile", profile}, {"hits", hs},
            {"degree_shift_holds", degreeShiftHolds()}};
}

bool chainMapIdentity(const CoproductMatrix& delta, const MorseComplex& cg, const MorseComplex& cgp) {
    const auto N = static_cast<std::size_t>(delta.chordCount);
    if (static_cast<std::size_t>(cg.chordCount) != N || static_cast<std::size_t>(cgp.chordCount) != N)
        throw std::invalid_argument("chain-map identity: chord counts differ");
    const algebra::Mod2Matrix D = cg.full(), Dp = cgp.full();
    const algebra::Mod2Matrix I = algebra::Mod2Matrix::identity(N);
    const algebra::Mod2Matrix lhs = delta.full * D;
    const algebra::Mod2Matrix rhs = (algebra::Mod2Matrix::kron(Dp, I) + algebra::Mod2Matrix::kron(I, Dp)) * delta.full;
    return lhs == rhs;
}

// ------------------------------------------------------------ Morse route

namespace {

// Dense polyline of each component of a closed curve, bucketed on a uniform
// grid for segment lookups.
class CurveIndex {
public:
    CurveIndex(const ChartedManifold& k, double spacing) : k_(&k), cell_(2.0 * spacing) {
        for (int c = 0; c < k.components(); ++c) {
            const auto& ch = k.chart(c, 0);
            const double lo = ch.domain().lo[0], hi = ch.domain().hi[0];
            // Length estimate from a coarse pass.
            double len = 0.0;
            Vec prev = ch.point(Vec::Constant(1, lo));
            for (int i = 1; i <= 256; ++i) {
                Vec cur = ch.point(Vec::Constant(1, lo + (hi - lo) * i / 256.0));
                len += (cur - prev).norm();
                prev = cur;
            }
            const int ns = std::max(64, static_cast<int>(std::ceil(len / (0.5 * spacing))));
            std::vector<double> s(static_cast<std::size_t>(ns) + 1);
            std::vector<Vec> pts;
            for (int i = 0; i <= ns; ++i) {
                s[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / ns;
                pts.push_back(ch.point(Vec::Constant(1, s[static_cast<std::size_t>(i)])));
            }
            for (int i = 0; i < ns; ++i) {
                Seg g{c, s[static_cast<std::size_t>(i)], s[static_cast<std::size_t>(i) + 1],
                      pts[static_cast<std::size_t>(i)], pts[static_cast<std::size_t>(i) + 1]};
                const std::size_t id = segs_.size();
                segs_.push_back(g);
                Vec lo3 = g.a.cwiseMin(g.b), hi3 = g.a.cwiseMax(g.b);
                forCells(lo3, hi3, [&](long key) { grid_[key].push_back(id); });
            }
        }
        stamp_.assign(segs_.size(), 0);
    }

    struct Seg {
        int comp;
        double s0, s1;
        Vec a, b;
    };
    const std::vector<Seg>& segments() const { return segs_; }

    template <class F>
    void candidates(const Vec& lo, const Vec& hi, F&& f) {
        ++tick_;
        forCells(lo, hi, [&](long key) {
            auto it = grid_.find(key);
            if (it == grid_.end()) return;
            for (std::size_t id : it->second) {
                if (stamp_[id] == tick_) continue;
                stamp_[id] = tick_;
                f(segs_[id]);
            }
        });
    }

private:
    long keyOf(long i, long j, long l) const { return (i * 73856093L) ^ (j * 19349663L) ^ (l * 83492791L); }

    template <class F>
    void forCells(const Vec& lo, const Vec& hi, F&& f) const {
        const long i0 = static_cast<long>(std::floor(lo[0] / cell_)), i1 = static_cast<long>(std::floor(hi[0] / cell_));
        const long j0 = static_cast<long>(std::floor(lo[1] / cell_)), j1 = static_cast<long>(std::floor(hi[1] / cell_));
        const long l0 = static_cast<long>(std::floor(lo[2] / cell_)), l1 = static_cast<long>(std::floor(hi[2] / cell_));
        for (long i = i0; i <= i1; ++i)
            for (long j = j0; j <= j1; ++j)
                for (long l = l0; l <= l1; ++l) f(keyOf(i, j, l));
    }

    const ChartedManifold* k_;
    double cell_;
    std::vector<Seg> segs_;
    std::unordered_map<long, std::vector<std::size_t>> grid_;
    std::vector<unsigned> stamp_;
    unsigned tick_ = 0;
};

// Segment [p, p + d] against triangle (a, b, c).  Returns (segment parameter,
// barycentric u, v) on a hit.
std::optional<Eigen::Vector3d> segmentTriangle(const Vec& p, const Vec& d, const Vec& a, const Vec& b, const Vec& c) {
    const Eigen::Vector3d e1 = b - a, e2 = c - a, dd = d;
    const Eigen::Vector3d h = dd.cross(e2);
    const double det = e1.dot(h);
    if (std::abs(det) < 1e-300) return std::nullopt;
    const double inv = 1.0 / det;
    const Eigen::Vector3d s = p - a;
    const double u = inv * s.dot(h);
    if (u < 0.0 || u > 1.0) return std::nullopt;
    const Eigen::Vector3d qv = s.cross(e1);
    const double v = inv * dd.dot(qv);
    if (v < 0.0 || u + v > 1.0) return std::nullopt;
    const double t = inv * e2.dot(qv);
    if (t < 0.0 || t > 1.0) return std::nullopt;
    return Eigen::Vector3d(t, u, v);
}

// Lines through A(t) and B(t) parametrized by lambda: X = A + lambda (B - A).
// mode 0: (A, B) = (q, q') on W^u(x), tau = lambda.
// mode 1: (A, B) = (q, m) on W^s(x1), q' = X, tau = 1 / lambda.
// mode 2: (A, B) = (q', m) on W^s(x2), q = X, tau = 1 - 1 / lambda.
struct SweptFamily {
    const Branch* br = nullptr;
    int mode = 0;
    int n = 3;
    double lamLo = 0.0, lamCap = 0.0, reach = 0.0;  // reach caps lambda |B - A|

    void ends(double t, Vec& A, Vec& B, Vec* dA, Vec* dB) const {
        const Vec y = br->at(t);
        Vec v;
        if (dA) v = br->velocity(t);
        if (mode == 2) {
            A = y.tail(n);
            B = y.head(n);
            if (dA) {
                *dA = v.tail(n);
                *dB = v.head(n);
            }
        } else {
            A = y.head(n);
            B = y.tail(n);
            if (dA) {
                *dA = v.head(n);
                *dB = v.tail(n);
            }
        }
    }
    double lamHi(const Vec& A, const Vec& B) const {
        if (mode == 0) return lamCap;
        const double len = (B - A).norm();
        return len > 0.0 ? std::clamp(reach / len, lamLo, lamCap) : lamLo;
    }
    double tauOf(double lam) const {
        if (mode == 0) return lam;
        if (mode == 1) return 1.0 / lam;
        return 1.0 - 1.0 / lam;
    }
};

struct SweptHit {
    double t = 0.0, lam = 0.0, s = 0.0;
    int comp = 0;
    double minSingular = 0.0;
};

// Intersections of the swept surface with K, seeded by triangle crossings of
// the polyline and polished by Newton in (t, lambda, s).
std::vector<SweptHit> sweptIntersections(const ChartedManifold& k, CurveIndex& idx, const SweptFamily& fam,
                                         double tEnd, double h, const SplitConfig& cfg) {
    const auto& tr = fam.br->flow.trace;
    std::vector<double> ts;
    Vec A0, B0;
    fam.ends(0.0, A0, B0, nullptr, nullptr);
    for (std::size_t i = 0; i + 1 < tr.size() && tr[i].t < tEnd; ++i) {
        const double ta = tr[i].t, tb = std::min(tr[i + 1].t, tEnd);
        Vec Aa, Ba, Ab, Bb;
        fam.ends(ta, Aa, Ba, nullptr, nullptr);
        fam.ends(tb, Ab, Bb, nullptr, nullptr);
        const double lam = std::max(fam.lamHi(Aa, Ba), fam.lamHi(Ab, Bb));
        const double disp = (Ab - Aa).norm() + lam * ((Bb - Ab) - (Ba - Aa)).norm();
        const int sub = std::clamp(static_cast<int>(std::ceil(disp / h)), 1, 4096);
        for (int j = 0; j < sub; ++j) ts.push_back(ta + (tb - ta) * j / sub);
    }
    ts.push_back(std::min(tEnd, fam.br->tMax()));
    if (ts.size() < 2) return {};

    // Column count from the longest line piece.
    std::vector<Vec> As(ts.size()), Bs(ts.size());
    std::vector<double> his(ts.size());
    double longest = 0.0;
    for (std::size_t i = 0; i < ts.size(); ++i) {
        fam.ends(ts[i], As[i], Bs[i], nullptr, nullptr);
        his[i] = fam.lamHi(As[i], Bs[i]);
        longest = std::max(longest, (his[i] - fam.lamLo) * (Bs[i] - As[i]).norm());
    }
    const int cols = std::clamp(static_cast<int>(std::ceil(longest / h)), 2, cfg.tauSamples);
    auto lamAt = [&](std::size_t i, int j) { return fam.lamLo + (his[i] - fam.lamLo) * j / cols; };
    auto node = [&](std::size_t i, int j) -> Vec { return As[i] + lamAt(i, j) * (Bs[i] - As[i]); };

    std::vector<SweptHit> raw;
    std::vector<Vec> rowPrev(static_cast<std::size_t>(cols) + 1), rowCur(static_cast<std::size_t>(cols) + 1);
    for (int j = 0; j <= cols; ++j) rowPrev[static_cast<std::size_t>(j)] = node(0, j);
    for (std::size_t i = 0; i + 1 < ts.size(); ++i) {
        for (int j = 0; j <= cols; ++j) rowCur[static_cast<std::size_t>(j)] = node(i + 1, j);
        for (int j = 0; j < cols; ++j) {
            const Vec& p00 = rowPrev[static_cast<std::size_t>(j)];
            const Vec& p01 = rowPrev[static_cast<std::size_t>(j) + 1];
            const Vec& p10 = rowCur[static_cast<std::size_t>(j)];
            const Vec& p11 = rowCur[static_cast<std::size_t>(j) + 1];
            const Vec lo = p00.cwiseMin(p01).cwiseMin(p10).cwiseMin(p11);
            const Vec hi = p00.cwiseMax(p01).cwiseMax(p10).cwiseMax(p11);
            idx.candidates(lo, hi, [&](const CurveIndex::Seg& g) {
                const Vec dseg = g.b - g.a;
                // Triangles (00, 10, 11) and (00, 11, 01) with local (di, dj).
                if (auto r = segmentTriangle(g.a, dseg, p00, p10, p11)) {
                    const double di = (*r)[1] + (*r)[2], dj = (*r)[2];
                    raw.push_back({ts[i] + di * (ts[i + 1] - ts[i]), fam.lamLo + (j + dj) / cols * (his[i] - fam.lamLo),
                                   g.s0 + (*r)[0] * (g.s1 - g.s0), g.comp, 0.0});
                }
                if (auto r = segmentTriangle(g.a, dseg, p00, p11, p01)) {
                    const double di = (*r)[1], dj = (*r)[1] + (*r)[2];
                    raw.push_back({ts[i] + di * (ts[i + 1] - ts[i]), fam.lamLo + (j + dj) / cols * (his[i] - fam.lamLo),
                                   g.s0 + (*r)[0] * (g.s1 - g.s0), g.comp, 0.0});
                }
            });
        }
        std::swap(rowPrev, rowCur);
    }

    // Newton polish and deduplication.
    std::vector<SweptHit> out;
    const double tMaxAll = ts.back();
    for (SweptHit hcur : raw) {
        const auto& ch = k.chart(hcur.comp, 0);
        bool ok = false;
        for (int it = 0; it < cfg.maxNewton; ++it) {
            Vec A, B, dA, dB;
            fam.ends(hcur.t, A, B, &dA, &dB);
            const geometry::LocalJet lj = ch.jet(ch.domain().wrap(Vec::Constant(1, hcur.s)), 1);
            const Vec G = A + hcur.lam * (B - A) - lj.q;
            Eigen::Matrix3d Jm;
            Jm.col(0) = dA + hcur.lam * (dB - dA);
            Jm.col(1) = B - A;
            Jm.col(2) = -lj.J.col(0);
            if (G.norm() < cfg.newtonTol) {
                Eigen::JacobiSVD<Eigen::Matrix3d> svd(Jm);
                hcur.minSingular = svd.singularValues()[2];
                ok = true;
                break;
            }
            Eigen::Vector3d step = Jm.colPivHouseholderQr().solve(-Eigen::Vector3d(G));
            const double scale = std::min(1.0, 4.0 * h / std::max(1e-300, step.norm()));
            hcur.t += scale * step[0];
            hcur.lam += scale * step[1];
            hcur.s += scale * step[2];
            if (hcur.t < 0.0 || hcur.t > tMaxAll) break;
        }
        if (!ok) continue;
        {
            Vec A, B;
            fam.ends(hcur.t, A, B, nullptr, nullptr);
            if (hcur.lam < fam.lamLo || hcur.lam > fam.lamHi(A, B)) continue;
        }
        const auto& dom = ch.domain();
        hcur.s = dom.wrap(Vec::Constant(1, hcur.s))[0];
        bool dup = false;
        for (const auto& o : out) {
            const double ds = std::abs(dom.difference(Vec::Constant(1, hcur.s), Vec::Constant(1, o.s))[0]);
            if (o.comp == hcur.comp && std::abs(o.t - hcur.t) < 1e-7 * (1 + std::abs(o.t)) &&
                std::abs(o.lam - hcur.lam) < 1e-7 && ds < 1e-7) {
                dup = true;
                break;
            }
        }
        if (!dup) out.push_back(hcur);
    }
    std::sort(out.begin(), out.end(), [](const SweptHit& a, const SweptHit& b) { return a.t < b.t; });
    return out;
}

int descend(const FlowContext& ctx, const PairPoint& y, int direction) {
    FlowOptions opt;
    opt.direction = direction;
    const auto r = ctx.integrate(y, opt);
    return r.reason == FlowEnd::Chord ? r.chord : -1;
}

}  // namespace

CoproductMatrix morseCoproduct(const FlowContext& g, const FlowContext& gp, const SplitConfig& cfgIn) {
    const auto& k = g.manifold();
    if (&gp.manifold() != &k || &gp.chords() != &g.chords())
        throw std::invalid_argument("both metrics must live on the same manifold and chord set");
    if (k.intrinsicDim() != 1 || k.ambientDim() != 3)
        throw HypothesisError(Stage::Strops, "the Morse-route coproduct is implemented for closed curves in R^3");
    for (int c = 0; c < k.components(); ++c)
        if (k.chartsIn(c) != 1 || !k.chart(c, 0).domain().periodic[0])
            throw HypothesisError(Stage::Strops, "curve components need a single periodic chart");
    const auto& s = g.chords();
    if (!s.allNondegenerate()) throw HypothesisError(Stage::Strops, "degenerate chords: re-seed the perturbation");

    const int N = static_cast<int>(s.chords.size());
    const int d = k.codim();
    CoproductMatrix out;
    out.route = "morse";
    out.d = d;
    out.chordCount = N;
    out.full = algebra::Mod2Matrix(static_cast<std::size_t>(N) * N, static_cast<std::size_t>(N));
    for (const auto& c : s.chords) out.index.push_back(c.index);
    out.epsilon0 = g.epsilon0();
    if (N == 0) return out;

    double diam = 0.0;
    for (const auto& c : s.chords) diam = std::max(diam, c.length);
    SplitConfig cfg = cfgIn;
    if (cfg.tau0 <= 0.0) {
        const double keepTau = cfg.tauSamples;
        cfg = SplitConfig::fromEnergy(std::min(g.epsilon0(), gp.epsilon0()), diam);
        cfg.tauSamples = static_cast<int>(keepTau);
        cfg.meshSpacing = cfgIn.meshSpacing;
        cfg.newtonTol = cfgIn.newtonTol;
        cfg.maxNewton = cfgIn.maxNewton;
    }
    if (!cfg.satisfies(std::min(g.epsilon0(), gp.epsilon0()), diam))
        throw HypothesisError(Stage::Strops, "tau0 violates tau0^2 diam^2 / 2 < eps0");
    out.tau0 = cfg.tau0;
    const double h = cfg.meshSpacing > 0.0 ? cfg.meshSpacing : 0.01 * diam;
    CurveIndex index(k, h);
    const double eps0 = g.epsilon0();

    auto record = [&](SplitHit hit, int x, int x1, int x2) {
        const auto& cs = s.chords;
        const bool degreesMatch = x >= 0 && x1 >= 0 && x2 >= 0 &&
                                  cs[static_cast<std::size_t>(x1)].index + cs[static_cast<std::size_t>(x2)].index ==
                                      cs[static_cast<std::size_t>(x)].index - d + 1;
        hit.source = x;
        hit.first = x1;
        hit.second = x2;
        hit.counted = degreesMatch;
        if (degreesMatch) {
            if (std::min(hit.energyFirst, hit.energySecond) <= eps0)
                throw NumericalError(Stage::Strops, "a counted split pair lies below the energy floor");
            out.full.flip(static_cast<std::size_t>(x1 * N + x2), static_cast<std::size_t>(x));
        }
        out.hits.push_back(std::move(hit));
    };

    auto mPoint = [&](const SweptHit& sh) {
        return ManifoldPoint{sh.comp, 0, k.chart(sh.comp, 0).domain().wrap(Vec::Constant(1, sh.s))};
    };
    auto pairVec = [](const Vec& a, const Vec& b) {
        Vec y(a.size() + b.size());
        y << a, b;
        return y;
    };

    // Index-1 sources: sweep the unstable branches until the energy floor.
    for (int x : s.ofIndex(1)) {
        for (const Branch& br : morseflow::branches(g, x, +1)) {
            double tEnd = br.tMax();
            for (const auto& smp : br.flow.trace)
                if (smp.E < eps0) {
                    tEnd = smp.t;
                    break;
                }
            SweptFamily fam{&br, 0, 3, cfg.tau0, 1.0 - cfg.tau0, 0.0};
            for (const auto& sh : sweptIntersections(k, index, fam, tEnd, h, cfg)) {
                const PairPoint seed = br.seed(sh.t);
                const Vec y = br.at(sh.t);
                const PairPoint yp = g.locate(y, seed);
                const ManifoldPoint mp = mPoint(sh);
                SplitHit hit;
                hit.method = "unstable-branch";
                hit.tau = fam.tauOf(sh.lam);
                hit.q = k.point(yp.p);
                hit.qp = k.point(yp.pp);
                hit.m = k.point(mp);
                hit.minSingular = sh.minSingular;
                hit.energyFirst = 0.5 * (hit.q - hit.m).squaredNorm();
                hit.energySecond = 0.5 * (hit.m - hit.qp).squaredNorm();
                const int x1 = descend(gp, gp.locate(pairVec(hit.q, hit.m), {yp.p, mp}), +1);
                const int x2 = descend(gp, gp.locate(pairVec(hit.m, hit.qp), {mp, yp.pp}), +1);
                record(std::move(hit), x, x1, x2);
            }
        }
    }

    // Index-2 sources, through the stable branches of the index-1 factor.
    const int top = 2 * k.intrinsicDim();
    for (int xt : s.ofIndex(top - 1)) {
        for (const Branch& br : morseflow::branches(gp, xt, -1)) {
            for (int mode : {1, 2}) {
                SweptFamily fam{&br, mode, 3, 1.0 / (1.0 - cfg.tau0), 1.0 / cfg.tau0, 1.05 * diam + 2.0 * h};
                for (const auto& sh : sweptIntersections(k, index, fam, br.tMax(), h, cfg)) {
                    const PairPoint seed = br.seed(sh.t);
                    const Vec w = br.at(sh.t);
                    const PairPoint wp = gp.locate(w, seed);
                    const ManifoldPoint xp = mPoint(sh);  // the recovered endpoint on K
                    SplitHit hit;
                    hit.method = mode == 1 ? "first-stable-branch" : "second-stable-branch";
                    hit.tau = fam.tauOf(sh.lam);
                    int x = -1, x1 = -1, x2 = -1;
                    if (mode == 1) {
                        hit.q = k.point(wp.p);
                        hit.m = k.point(wp.pp);
                        hit.qp = k.point(xp);
                        x = descend(g, g.locate(pairVec(hit.q, hit.qp), {wp.p, xp}), -1);
                        x1 = xt;
                        x2 = descend(gp, gp.locate(pairVec(hit.m, hit.qp), {wp.pp, xp}), +1);
                    } else {
                        hit.m = k.point(wp.p);
                        hit.qp = k.point(wp.pp);
                        hit.q = k.point(xp);
                        x = descend(g, g.locate(pairVec(hit.q, hit.qp), {xp, wp.pp}), -1);
                        x1 = descend(gp, gp.locate(pairVec(hit.q, hit.m), {xp, wp.p}), +1);
                        x2 = xt;
                    }
                    hit.minSingular = sh.minSingular;
                    hit.energyFirst = 0.5 * (hit.q - hit.m).squaredNorm();
                    hit.energySecond = 0.5 * (hit.m - hit.qp).squaredNorm();
                    record(std::move(hit), x, x1, x2);
                }
            }
        }
    }
    return out;
}

}  // namespace conormal::strops
