#include "conormal/chords.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <thread>

#include "conormal/errors.hpp"

namespace conormal::chords {

using geometry::Frame;
using geometry::LocalJet;
using geometry::SampleCloud;

namespace {

// Generalized eigenvalues of (H, G), ascending.
std::vector<double> generalizedSpectrum(const Mat& H, const Mat& G) {
    Eigen::GeneralizedSelfAdjointEigenSolver<Mat> es(0.5 * (H + H.transpose()), G, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw NumericalError(Stage::Chords, "generalized eigensolver failed");
    std::vector<double> out(es.eigenvalues().data(), es.eigenvalues().data() + es.eigenvalues().size());
    std::sort(out.begin(), out.end());
    return out;
}

double binormalResidual(const ChartedManifold& k, const ManifoldPoint& p, const ManifoldPoint& pp, const Vec& r) {
    const Frame f = k.tangentFrame(p), fp = k.tangentFrame(pp);
    return std::max((f.tangent.transpose() * r).norm(), (fp.tangent.transpose() * r).norm());
}

bool lexLess(const Vec& a, const Vec& b) {
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        if (a[i] < b[i] - 1e-12) return true;
        if (a[i] > b[i] + 1e-12) return false;
    }
    return false;
}

}  // namespace

EnergyJet energyJet(const ChartedManifold& k, const ManifoldPoint& p, const ManifoldPoint& pp, int order) {
    const LocalJet a = k.eval(p, order), b = k.eval(pp, order);
    const auto m = a.J.cols(), mp = b.J.cols();
    EnergyJet e;
    e.q = a.q;
    e.qp = b.q;
    e.J = a.J;
    e.Jp = b.J;
    const Vec r = a.q - b.q;
    e.E = 0.5 * r.squaredNorm();
    e.grad.resize(m + mp);
    e.grad.head(m) = a.J.transpose() * r;
    e.grad.tail(mp) = -b.J.transpose() * r;
    e.metric = Mat::Zero(m + mp, m + mp);
    e.metric.topLeftCorner(m, m) = a.J.transpose() * a.J;
    e.metric.bottomRightCorner(mp, mp) = b.J.transpose() * b.J;
    if (order >= 2) {
        e.hess.resize(m + mp, m + mp);
        e.hess.topLeftCorner(m, m) = a.J.transpose() * a.J + a.contract(r);
        e.hess.topRightCorner(m, mp) = -a.J.transpose() * b.J;
        e.hess.bottomLeftCorner(mp, m) = -b.J.transpose() * a.J;
        e.hess.bottomRightCorner(mp, mp) = b.J.transpose() * b.J - b.contract(r);
    }
    return e;
}

std::optional<BinormalChord> refineChord(const ChartedManifold& k, ManifoldPoint p, ManifoldPoint pp,
                                         const SolverConfig& cfg) {
    const auto m = k.chart(p).dim();
    try {
        p = k.recentre(p);
        pp = k.recentre(pp);
        for (int it = 0; it < cfg.maxNewton; ++it) {
            const EnergyJet e = energyJet(k, p, pp, 2);
            const Vec r = e.q - e.qp;
            if (r.norm() < 1e-6) return std::nullopt;  // fell onto the diagonal
            if (binormalResidual(k, p, pp, r) < 0.05 * cfg.residualTol) break;
            // Newton step through the symmetric eigendecomposition, with tiny
            // eigenvalues floored so the step stays bounded.
            Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (e.hess + e.hess.transpose()));
            const Vec lam = es.eigenvalues();
            const double floor = 1e-10 * std::max(1.0, lam.cwiseAbs().maxCoeff());
            Vec coef = es.eigenvectors().transpose() * e.grad;
            for (Eigen::Index i = 0; i < coef.size(); ++i) {
                const double l = std::abs(lam[i]) < floor ? (lam[i] < 0 ? -floor : floor) : lam[i];
                coef[i] /= l;
            }
            Vec step = -(es.eigenvectors() * coef);
            const double maxStep = 0.5;
            if (step.norm() > maxStep) step *= maxStep / step.norm();
            const double g0 = e.grad.norm();
            double alpha = 1.0;
            ManifoldPoint np, npp;
            bool accepted = false;
            for (int ls = 0; ls < 12; ++ls) {
                const auto& c = k.chart(p);
                const auto& cp = k.chart(pp);
                np = {p.comp, p.chart, c.domain().wrap(p.u + alpha * step.head(m))};
                npp = {pp.comp, pp.chart, cp.domain().wrap(pp.u + alpha * step.tail(step.size() - m))};
                if (c.domain().contains(np.u) && cp.domain().contains(npp.u)) {
                    np = k.recentre(np);
                    npp = k.recentre(npp);
                    const EnergyJet t = energyJet(k, np, npp, 1);
                    if (t.grad.norm() < (1.0 - 1e-4 * alpha) * g0 || ls == 11) {
                        accepted = true;
                        break;
                    }
                }
                alpha *= 0.5;
            }
            if (!accepted) return std::nullopt;
            p = np;
            pp = npp;
            if (alpha * step.norm() < 1e-16) break;
        }
    } catch (const NumericalError&) {
        return std::nullopt;
    }
    BinormalChord c;
    c.p = p;
    c.pp = pp;
    c.q = k.point(p);
    c.qp = k.point(pp);
    const Vec r = c.q - c.qp;
    c.length = r.norm();
    c.energy = 0.5 * r.squaredNorm();
    if (c.length < 1e-6) return std::nullopt;
    c.residual = binormalResidual(k, p, pp, r);
    if (c.residual > cfg.residualTol) return std::nullopt;
    return c;
}

HessianData hessianIndex(const ChartedManifold& k, const BinormalChord& c, double nullBand) {
    const EnergyJet e = energyJet(k, c.p, c.pp, 2);
    HessianData h;
    h.spectrum = generalizedSpectrum(e.hess, e.metric);
    for (double l : h.spectrum) {
        if (std::abs(l) <= nullBand) ++h.nullity;
        else if (l < 0) ++h.index;
    }
    // Central differences of the analytic gradient.
    const auto m = k.chart(c.p).dim();
    const auto dim = e.grad.size();
    Mat H(dim, dim);
    const double step = 1e-5;
    for (Eigen::Index j = 0; j < dim; ++j) {
        ManifoldPoint a = c.p, ap = c.pp, b = c.p, bp = c.pp;
        if (j < m) {
            a.u[j] += step;
            b.u[j] -= step;
        } else {
            ap.u[j - m] += step;
            bp.u[j - m] -= step;
        }
        H.col(j) = (energyJet(k, a, ap, 1).grad - energyJet(k, b, bp, 1).grad) / (2 * step);
    }
    const auto fd = generalizedSpectrum(H, e.metric);
    h.fdIndex = 0;
    for (double l : fd)
        if (l < -std::max(nullBand, 1e-6)) ++h.fdIndex;
    return h;
}

ChordSet findChords(const ChartedManifold& k, const SolverConfig& cfg) {
    const int m = k.intrinsicDim();
    int per = cfg.gridPerDim;
    if (per <= 0) per = m == 1 ? 25 : (m == 2 ? 11 : 5);  // odd: chart centres are starts
    const auto samples = k.samples(per);

    // Unordered start pairs; swaps are added after the solve.
    std::vector<std::pair<std::size_t, std::size_t>> starts;
    for (std::size_t i = 0; i < samples.size(); ++i)
        for (std::size_t j = i + 1; j < samples.size(); ++j) starts.emplace_back(i, j);
    if (static_cast<long long>(starts.size()) > cfg.maxStarts) {
        // Stratified: every s-th pair.
        const double stride = static_cast<double>(starts.size()) / cfg.maxStarts;
        std::vector<std::pair<std::size_t, std::size_t>> kept;
        for (long long i = 0; i < cfg.maxStarts; ++i) kept.push_back(starts[static_cast<std::size_t>(i * stride)]);
        starts.swap(kept);
    }

    std::vector<std::optional<BinormalChord>> results(starts.size());
    const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    const unsigned nthreads = cfg.threads > 0 ? static_cast<unsigned>(cfg.threads) : hw;
    auto worker = [&](unsigned t) {
        for (std::size_t i = t; i < starts.size(); i += nthreads)
            results[i] = refineChord(k, samples[starts[i].first], samples[starts[i].second], cfg);
    };
    if (nthreads == 1) {
        worker(0);
    } else {
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < nthreads; ++t) pool.emplace_back(worker, t);
        for (auto& th : pool) th.join();
    }

    ChordSet out;
    out.manifold = k.name();
    out.codim = k.codim();
    out.telemetry.starts = static_cast<long long>(starts.size());
    std::vector<BinormalChord> cands;
    for (auto& r : results) {
        if (!r) {
            ++out.telemetry.diverged;
            continue;
        }
        ++out.telemetry.converged;
        // Store both orientations.
        BinormalChord s = *r;
        std::swap(s.p, s.pp);
        std::swap(s.q, s.qp);
        cands.push_back(std::move(*r));
        cands.push_back(std::move(s));
    }
    // Deterministic reduction: sort, then merge within the dedup radius.
    std::sort(cands.begin(), cands.end(), [](const BinormalChord& a, const BinormalChord& b) {
        if (std::abs(a.energy - b.energy) > 1e-9) return a.energy < b.energy;
        if (lexLess(a.q, b.q)) return true;
        if (lexLess(b.q, a.q)) return false;
        return lexLess(a.qp, b.qp);
    });
    std::vector<BinormalChord> kept;
    for (auto& c : cands) {
        bool dup = false;
        for (const auto& kc : kept) {
            const double d = std::sqrt((c.q - kc.q).squaredNorm() + (c.qp - kc.qp).squaredNorm());
            if (d < cfg.dedupRadius) {
                dup = true;
                break;
            }
        }
        if (dup) {
            ++out.telemetry.merges;
            continue;
        }
        kept.push_back(std::move(c));
    }
    for (auto& c : kept) {
        const HessianData h = hessianIndex(k, c, cfg.nullBand);
        c.index = h.index;
        c.nullity = h.nullity;
        c.spectrum = h.spectrum;
        c.fdIndex = h.fdIndex;
        out.telemetry.worstResidual = std::max(out.telemetry.worstResidual, c.residual);
    }
    std::sort(kept.begin(), kept.end(), [](const BinormalChord& a, const BinormalChord& b) {
        if (a.index != b.index) return a.index < b.index;
        if (std::abs(a.energy - b.energy) > 1e-9) return a.energy < b.energy;
        if (lexLess(a.q, b.q)) return true;
        if (lexLess(b.q, a.q)) return false;
        return lexLess(a.qp, b.qp);
    });
    for (std::size_t i = 0; i < kept.size(); ++i) kept[i].id = static_cast<int>(i);
    for (auto& c : kept)
        for (const auto& o : kept)
            if (std::sqrt((c.q - o.qp).squaredNorm() + (c.qp - o.q).squaredNorm()) < cfg.dedupRadius) {
                c.swapId = o.id;
                break;
            }
    out.chords = std::move(kept);
    return out;
}

bool ChordSet::allNondegenerate() const {
    return std::all_of(chords.begin(), chords.end(), [](const BinormalChord& c) { return c.nondegenerate(); });
}

double ChordSet::minEnergy() const {
    double e = std::numeric_limits<double>::infinity();
    for (const auto& c : chords) e = std::min(e, c.energy);
    return e;
}

std::vector<int> ChordSet::ofIndex(int index) const {
    std::vector<int> out;
    for (const auto& c : chords)
        if (c.nondegenerate() && c.index == index) out.push_back(c.id);
    return out;
}

nlohmann::json ChordSet::toJson() const {
    nlohmann::json j;
    j["manifold"] = manifold;
    j["codim"] = codim;
    j["telemetry"] = {{"starts", telemetry.starts},
                      {"converged", telemetry.converged},
                      {"diverged", telemetry.diverged},
                      {"merges", telemetry.merges},
                      {"worst_residual", telemetry.worstResidual}};
    auto arr = nlohmann::json::array();
    for (const auto& c : chords) {
        nlohmann::json e;
        e["id"] = c.id;
        e["q"] = std::vector<double>(c.q.data(), c.q.data() + c.q.size());
        e["q_prime"] = std::vector<double>(c.qp.data(), c.qp.data() + c.qp.size());
        e["energy"] = c.energy;
        e["length"] = c.length;
        e["index"] = c.index;
        e["nullity"] = c.nullity;
        if (c.nondegenerate()) e["degree"] = c.index + codim - 2;
        else e["degree"] = nullptr;
        e["residual"] = c.residual;
        e["spectrum"] = c.spectrum;
        e["swap"] = c.swapId;
        arr.push_back(std::move(e));
    }
    j["chords"] = std::move(arr);
    return j;
}

int reebDegree(const BinormalChord& c, int d) {
    if (!c.nondegenerate())
        throw HypothesisError(Stage::Chords, "degree of a degenerate chord (nullity " + std::to_string(c.nullity) + ")");
    return c.index + d - 2;
}

StarReport checkStar(const ChordSet& s, int d) {
    StarReport r;
    for (const auto& c : s.chords) {
        const int deg = reebDegree(c, d);
        if (!r.minDegree || deg < *r.minDegree) {
            r.minDegree = deg;
            r.witness = c.id;
        }
    }
    if (s.chords.empty()) {
        r.holds = true;
        r.message = "no chords: condition holds vacuously";
    } else if (d >= 4) {
        r.holds = true;
        r.message = "codimension " + std::to_string(d) + " >= 4: every degree is at least 2 (min " +
                    std::to_string(*r.minDegree) + ")";
    } else {
        r.holds = false;
        r.message = "codimension " + std::to_string(d) + " < 4; minimal degree " + std::to_string(*r.minDegree) +
                    " at chord " + std::to_string(r.witness);
    }
    return r;
}

// ------------------------------------------------------------ admissibility

double lineLineDistance(const Vec& a0, const Vec& a1, const Vec& b0, const Vec& b1) {
    const Vec u = a1 - a0, v = b1 - b0, w = a0 - b0;
    Mat A(u.size(), 2);
    A.col(0) = u;
    A.col(1) = -v;
    // Least squares for a0 + s u = b0 + t v.
    const Vec st = A.colPivHouseholderQr().solve(-w);
    return (w + A * st).norm();
}

bool AdmissibilityReport::allPass() const {
    for (const auto& f : flags)
        if (f && !*f) return false;
    return true;
}

nlohmann::json AdmissibilityReport::toJson() const {
    nlohmann::json j;
    auto arr = nlohmann::json::array();
    for (const auto& f : flags) arr.push_back(f ? nlohmann::json(*f) : nlohmann::json(nullptr));
    j["flags"] = arr;
    j["notes"] = notes;
    j["min_line_return_distance"] = minLineReturnDistance;
    j["min_line_separation"] = minLineSeparation;
    j["all_pass"] = allPass();
    return j;
}

namespace {

std::optional<bool> rankFlag(const std::vector<RankCheck>& v) {
    if (v.empty()) return std::nullopt;
    return std::all_of(v.begin(), v.end(), [](const RankCheck& r) { return r.ok; });
}

// Closest approach of the line through q, q' to K for tau outside small
// neighbourhoods of 0 and 1.
double lineReturnDistance(const ChartedManifold& k, const SampleCloud& cloud, const Vec& q, const Vec& qp) {
    const Mat& X = cloud.ambient();
    const Vec centre = X.rowwise().mean();
    const double radius = (X.colwise() - centre).colwise().norm().maxCoeff();
    const Vec dir = qp - q;
    const double len = dir.norm();
    // tau range where the line is inside the bounding ball.
    const double tc = (centre - q).dot(dir) / (len * len);
    const double half = (radius + cloud.spacing()) / len;
    const double lo = tc - half, hi = tc + half;
    const int samples = 4096;
    const double excl = 0.02;
    std::vector<double> dist(samples + 1);
    std::vector<double> taus(samples + 1);
    for (int i = 0; i <= samples; ++i) {
        const double t = lo + (hi - lo) * i / samples;
        taus[static_cast<std::size_t>(i)] = t;
        const Vec x = q + t * dir;
        dist[static_cast<std::size_t>(i)] = (X.colwise() - x).colwise().norm().minCoeff();
    }
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= samples; ++i) {
        const double t = taus[static_cast<std::size_t>(i)];
        if (std::abs(t) < excl || std::abs(t - 1.0) < excl) continue;
        const double di = dist[static_cast<std::size_t>(i)];
        best = std::min(best, di);
        const bool localMin = (i == 0 || di <= dist[static_cast<std::size_t>(i - 1)]) &&
                              (i == samples || di <= dist[static_cast<std::size_t>(i + 1)]);
        if (!localMin || di > 3.0 * cloud.spacing()) continue;
        // Golden-section refinement of the true distance on the bracket.
        double a = taus[static_cast<std::size_t>(std::max(0, i - 1))];
        double b = taus[static_cast<std::size_t>(std::min(samples, i + 1))];
        auto f = [&](double t) {
            const Vec x = q + t * dir;
            return cloud.closestPoint(x).second;
        };
        const double g = 0.5 * (std::sqrt(5.0) - 1.0);
        double c = b - g * (b - a), d = a + g * (b - a);
        double fc = f(c), fd = f(d);
        for (int it = 0; it < 60 && b - a > 1e-13; ++it) {
            if (fc < fd) {
                b = d;
                d = c;
                fd = fc;
                c = b - g * (b - a);
                fc = f(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + g * (b - a);
                fd = f(d);
            }
        }
        const double tm = 0.5 * (a + b);
        if (std::abs(tm) >= excl && std::abs(tm - 1.0) >= excl) best = std::min(best, f(tm));
    }
    (void)k;
    return best;
}

}  // namespace

AdmissibilityReport admissibilityReport(const ChartedManifold& k, const ChordSet& s, const AdmissibilityEvidence& ev) {
    AdmissibilityReport r;
    r.flags[0] = s.allNondegenerate();
    if (!*r.flags[0]) r.notes.push_back("degenerate chords present: re-seed the normal perturbation");

    const int m = k.intrinsicDim();
    const SampleCloud cloud(k, m == 1 ? 256 : (m == 2 ? 48 : 8));
    r.minLineReturnDistance = std::numeric_limits<double>::infinity();
    r.minLineSeparation = std::numeric_limits<double>::infinity();
    std::vector<const BinormalChord*> unordered;
    for (const auto& c : s.chords)
        if (c.swapId < 0 || c.id < c.swapId) unordered.push_back(&c);
    for (const auto* c : unordered)
        r.minLineReturnDistance = std::min(r.minLineReturnDistance, lineReturnDistance(k, cloud, c->q, c->qp));
    for (std::size_t i = 0; i < unordered.size(); ++i)
        for (std::size_t j = i + 1; j < unordered.size(); ++j)
            r.minLineSeparation = std::min(r.minLineSeparation, lineLineDistance(unordered[i]->q, unordered[i]->qp,
                                                                                 unordered[j]->q, unordered[j]->qp));
    const bool noReturn = r.minLineReturnDistance > 1e-6;
    const bool linesApart = r.minLineSeparation > 1e-8;
    r.flags[1] = noReturn && linesApart;
    if (!noReturn) r.notes.push_back("a chord line meets K away from its endpoints");
    if (!linesApart) r.notes.push_back("lines of two distinct chords intersect: re-seed the normal perturbation");

    r.flags[2] = rankFlag(ev.evTransversality);
    r.flags[3] = ev.morseSmaleStable;
    r.flags[4] = rankFlag(ev.unstableTransversality);
    r.flags[5] = rankFlag(ev.splitTransversality);
    for (int i = 2; i < 6; ++i)
        if (!r.flags[i]) r.notes.push_back("condition " + std::to_string(i + 1) + " not evaluated");
    return r;
}

}  // namespace conormal::chords
