#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "conormal/errors.hpp"
#include "conormal/geometry.hpp"

namespace conormal::geometry {

// ------------------------------------------------------------ manifold

ChartedManifold::ChartedManifold(std::string name, int ambient, int intrinsic, Topology topology)
    : name_(std::move(name)), n_(ambient), m_(intrinsic), topology_(std::move(topology)) {
    if (m_ < 1 || n_ <= m_) throw ConormalError(Stage::Geometry, "codimension must be at least 1");
    if (m_ > kMaxJetVars) throw ConormalError(Stage::Geometry, "intrinsic dimension exceeds jet capacity");
}

void ChartedManifold::addComponent(std::vector<ChartPtr> charts) {
    for (const auto& c : charts)
        if (c->dim() != m_ || c->ambientDim() != n_)
            throw ConormalError(Stage::Geometry, "chart " + c->name() + " has the wrong dimensions");
    charts_.push_back(std::move(charts));
}

const Chart& ChartedManifold::chart(int comp, int chart) const {
    return *charts_.at(static_cast<std::size_t>(comp)).at(static_cast<std::size_t>(chart));
}

LocalJet ChartedManifold::eval(const ManifoldPoint& p, int order) const {
    const Chart& c = chart(p);
    if (!c.domain().contains(p.u))
        throw ConormalError(Stage::Geometry, "parameter outside the domain of chart " + c.name());
    return c.jet(p.u, order);
}

Vec ChartedManifold::point(const ManifoldPoint& p) const {
    const Chart& c = chart(p);
    if (!c.domain().contains(p.u))
        throw ConormalError(Stage::Geometry, "parameter outside the domain of chart " + c.name());
    return c.point(p.u);
}

Frame ChartedManifold::tangentFrame(const ManifoldPoint& p) const {
    const LocalJet lj = eval(p, 1);
    Eigen::HouseholderQR<Mat> qr(lj.J);
    const Mat Q = qr.householderQ() * Mat::Identity(n_, n_);
    const Mat R = qr.matrixQR().topRows(m_).triangularView<Eigen::Upper>();
    const double scale = std::max(1.0, R.cwiseAbs().maxCoeff());
    for (int i = 0; i < m_; ++i)
        if (std::abs(R(i, i)) < 1e-12 * scale)
            throw NumericalError(Stage::Geometry, "rank-deficient chart differential in " + chart(p).name());
    Frame f;
    f.tangent = Q.leftCols(m_);
    f.normal = Q.rightCols(n_ - m_);
    f.orthonormalityResidual = (Q.transpose() * Q - Mat::Identity(n_, n_)).cwiseAbs().maxCoeff();
    return f;
}

std::optional<Vec> ChartedManifold::locateInChart(int comp, int ci, const Vec& q, double tol) const {
    const Chart& c = chart(comp, ci);
    std::optional<Vec> seed = c.invert(q);
    if (seed && (!seed->allFinite() || !c.domain().contains(*seed))) seed.reset();
    if (!seed) {
        // Grid search over the chart domain.
        const int m = c.dim();
        const int per = std::max(3, static_cast<int>(std::pow(20000.0, 1.0 / m)));
        double best = std::numeric_limits<double>::infinity();
        Vec u(m);
        std::vector<int> idx(static_cast<std::size_t>(m), 0);
        while (true) {
            for (int i = 0; i < m; ++i) {
                const double lo = c.domain().lo[i], hi = c.domain().hi[i];
                const bool per_i = c.domain().periodic[static_cast<std::size_t>(i)];
                const double t = per_i ? static_cast<double>(idx[static_cast<std::size_t>(i)]) / per
                                       : (idx[static_cast<std::size_t>(i)] + 0.5) / per;
                u[i] = lo + t * (hi - lo);
            }
            if (c.domain().contains(u)) {
                const double d = (c.point(u) - q).squaredNorm();
                if (d < best) {
                    best = d;
                    seed = u;
                }
            }
            int k = 0;
            while (k < m && ++idx[static_cast<std::size_t>(k)] == per) idx[static_cast<std::size_t>(k++)] = 0;
            if (k == m) break;
        }
        if (!seed) return std::nullopt;
    }
    // Gauss-Newton polish of q(u) = q.
    Vec u = *seed;
    for (int it = 0; it < 60; ++it) {
        if (!c.domain().contains(u)) return std::nullopt;
        const LocalJet lj = c.jet(u, 1);
        const Vec r = lj.q - q;
        if (r.norm() < 0.1 * tol) break;
        const Vec step = (lj.J.transpose() * lj.J).ldlt().solve(-lj.J.transpose() * r);
        double alpha = 1.0;
        const double r0 = r.squaredNorm();
        while (alpha > 1e-6) {
            const Vec trial = c.domain().wrap(u + alpha * step);
            if (c.domain().contains(trial) && (c.point(trial) - q).squaredNorm() < r0) {
                u = trial;
                break;
            }
            alpha *= 0.5;
        }
        if (alpha <= 1e-6 || step.norm() < 1e-16) break;
    }
    u = c.domain().wrap(u);
    if (!c.domain().contains(u)) return std::nullopt;
    if ((c.point(u) - q).norm() > tol * (1.0 + q.norm())) return std::nullopt;
    return u;
}

std::optional<ManifoldPoint> ChartedManifold::locate(int comp, const Vec& q, double tol) const {
    std::optional<ManifoldPoint> best;
    double bestMargin = -1.0;
    for (int ci = 0; ci < chartsIn(comp); ++ci) {
        auto u = locateInChart(comp, ci, q, tol);
        if (!u) continue;
        const Chart& c = chart(comp, ci);
        if (!c.valid(*u)) continue;
        const double m = c.domain().margin(*u);
        if (m > bestMargin) {
            bestMargin = m;
            best = ManifoldPoint{comp, ci, *u};
        }
    }
    return best;
}

ManifoldPoint ChartedManifold::recentre(const ManifoldPoint& p) const {
    const Chart& c = chart(p);
    ManifoldPoint w{p.comp, p.chart, c.domain().wrap(p.u)};
    if (c.usable(w.u)) return w;
    const Vec q = c.point(w.u);
    double bestMargin = c.domain().contains(w.u) && c.valid(w.u) ? c.domain().margin(w.u) : -1.0;
    ManifoldPoint best = w;
    for (int ci = 0; ci < chartsIn(p.comp); ++ci) {
        if (ci == p.chart) continue;
        auto u = locateInChart(p.comp, ci, q, 1e-9);
        if (!u) continue;
        const Chart& cc = chart(p.comp, ci);
        if (!cc.valid(*u)) continue;
        const double m = cc.domain().margin(*u);
        if (m > bestMargin) {
            bestMargin = m;
            best = ManifoldPoint{p.comp, ci, *u};
        }
    }
    if (bestMargin < 0)
        throw NumericalError(Stage::Geometry, "point left every chart of component " + std::to_string(p.comp));
    return best;
}

std::vector<ManifoldPoint> ChartedManifold::samples(int perDim) const {
    std::vector<ManifoldPoint> out;
    for (int comp = 0; comp < components(); ++comp)
        for (int ci = 0; ci < chartsIn(comp); ++ci) {
            const Chart& c = chart(comp, ci);
            const int m = c.dim();
            std::vector<int> idx(static_cast<std::size_t>(m), 0);
            Vec u(m);
            while (true) {
                for (int i = 0; i < m; ++i) {
                    const double lo = c.domain().lo[i], hi = c.domain().hi[i];
                    const bool per = c.domain().periodic[static_cast<std::size_t>(i)];
                    const double t = per ? static_cast<double>(idx[static_cast<std::size_t>(i)]) / perDim
                                         : (idx[static_cast<std::size_t>(i)] + 0.5) / perDim;
                    u[i] = lo + t * (hi - lo);
                }
                if (c.usable(u)) out.push_back({comp, ci, u});
                int k = 0;
                while (k < m && ++idx[static_cast<std::size_t>(k)] == perDim) idx[static_cast<std::size_t>(k++)] = 0;
                if (k == m) break;
            }
        }
    return out;
}

// ---------------------------------------------------------- sample cloud

SampleCloud::SampleCloud(const ChartedManifold& k, int perDim) : k_(&k), pts_(k.samples(perDim)) {
    X_.resize(k.ambientDim(), static_cast<Eigen::Index>(pts_.size()));
    for (std::size_t i = 0; i < pts_.size(); ++i) X_.col(static_cast<Eigen::Index>(i)) = k.point(pts_[i]);
    // Spacing: largest nearest-neighbour distance over a stride of points.
    const std::size_t stride = std::max<std::size_t>(1, pts_.size() / 200);
    for (std::size_t i = 0; i < pts_.size(); i += stride) {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < pts_.size(); ++j) {
            if (j == i) continue;
            const double d = (X_.col(static_cast<Eigen::Index>(i)) - X_.col(static_cast<Eigen::Index>(j))).norm();
            if (d > 1e-12) best = std::min(best, d);
        }
        if (std::isfinite(best)) spacing_ = std::max(spacing_, best);
    }
}

std::size_t SampleCloud::nearest(const Vec& x) const {
    if (pts_.empty()) throw ConormalError(Stage::Geometry, "empty sample cloud");
    Eigen::Index best = 0;
    (X_.colwise() - x).colwise().squaredNorm().minCoeff(&best);
    return static_cast<std::size_t>(best);
}

std::pair<ManifoldPoint, double> SampleCloud::closestPoint(const Vec& x) const {
    return projectFrom(*k_, x, pts_[nearest(x)]);
}

std::pair<ManifoldPoint, double> projectFrom(const ChartedManifold& k, const Vec& x, ManifoldPoint p, int maxIter) {
    p = k.recentre(p);
    for (int it = 0; it < maxIter; ++it) {
        const LocalJet lj = k.eval(p, 2);
        const Vec r = lj.q - x;
        const Vec g = lj.J.transpose() * r;
        Mat H = lj.J.transpose() * lj.J + lj.contract(r);
        Eigen::LDLT<Mat> ldlt(H);
        Vec step;
        if (ldlt.info() == Eigen::Success && ldlt.isPositive() && (ldlt.vectorD().array() > 1e-12).all())
            step = -ldlt.solve(g);
        else
            step = -(lj.J.transpose() * lj.J).ldlt().solve(g);
        const Chart& c = k.chart(p);
        double alpha = 1.0;
        const double f0 = r.squaredNorm();
        bool moved = false;
        while (alpha > 1e-8) {
            ManifoldPoint t{p.comp, p.chart, c.domain().wrap(p.u + alpha * step)};
            if (c.domain().contains(t.u) && (c.point(t.u) - x).squaredNorm() <= f0) {
                p = k.recentre(t);
                moved = true;
                break;
            }
            alpha *= 0.5;
        }
        if (!moved || alpha * step.norm() < 1e-15) break;
    }
    return {p, (k.point(p) - x).norm()};
}

// ----------------------------------------------------------- sections

namespace {

class ZeroField final : public AmbientMapT<ZeroField> {
public:
    explicit ZeroField(int n) : AmbientMapT(n, n) {}
    template <class S>
    void eval(const S* x, S* y) const {
        for (int i = 0; i < outDim(); ++i) y[i] = 0.0 * x[0];
    }
};

class FourierField final : public AmbientMapT<FourierField> {
public:
    FourierField(std::vector<Vec> k, std::vector<Vec> a, std::vector<double> phase)
        : AmbientMapT(static_cast<int>(k.front().size()), static_cast<int>(k.front().size())),
          k_(std::move(k)),
          a_(std::move(a)),
          phase_(std::move(phase)) {}
    template <class S>
    void eval(const S* x, S* y) const {
        const int n = outDim();
        for (int i = 0; i < n; ++i) y[i] = 0.0 * x[0];
        for (std::size_t j = 0; j < k_.size(); ++j) {
            S arg = S(phase_[j]) + 0.0 * x[0];
            for (int i = 0; i < n; ++i) arg = arg + k_[j][i] * x[i];
            const S s = sin(arg);
            for (int i = 0; i < n; ++i) y[i] = y[i] + a_[j][i] * s;
        }
    }

private:
    std::vector<Vec> k_, a_;
    std::vector<double> phase_;
};

class RadialBlockField final : public AmbientMapT<RadialBlockField> {
public:
    RadialBlockField(int n, int d, double c) : AmbientMapT(n, n), d_(d), c_(c) {}
    template <class S>
    void eval(const S* x, S* y) const {
        for (int i = 0; i < outDim(); ++i) y[i] = (i < d_ ? c_ : 0.0) * x[i];
    }

private:
    int d_;
    double c_;
};

class PlanarCos2Field final : public AmbientMapT<PlanarCos2Field> {
public:
    explicit PlanarCos2Field(double eps) : AmbientMapT(3, 3), eps_(eps) {}
    template <class S>
    void eval(const S* x, S* y) const {
        // eps cos(2 theta) times the radial unit vector of the (x, y)-plane.
        const S r2 = x[0] * x[0] + x[1] * x[1];
        const S r = sqrt(r2);
        const S c2 = (x[0] * x[0] - x[1] * x[1]) / r2;
        y[0] = eps_ * c2 * x[0] / r;
        y[1] = eps_ * c2 * x[1] / r;
        y[2] = 0.0 * x[2];
    }

private:
    double eps_;
};

}  // namespace

NormalSection NormalSection::zero(int n) {
    NormalSection s;
    s.field_ = std::make_shared<ZeroField>(n);
    s.zero_ = true;
    s.project_ = false;
    s.label_ = "zero";
    s.n_ = n;
    return s;
}

NormalSection NormalSection::fourier(int n, unsigned seed, double amplitude, int modes, double wavenumber) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    std::vector<Vec> k, a;
    std::vector<double> phase;
    for (int j = 0; j < modes; ++j) {
        Vec kj(n), aj(n);
        for (int i = 0; i < n; ++i) kj[i] = normal(rng);
        kj *= wavenumber * (0.5 + 0.5 * uni(rng)) / kj.norm();
        for (int i = 0; i < n; ++i) aj[i] = normal(rng);
        aj *= amplitude / (modes * aj.norm());  // sum of |a_j| bounds the sup norm
        k.push_back(kj);
        a.push_back(aj);
        phase.push_back(2.0 * M_PI * uni(rng));
    }
    NormalSection s;
    s.field_ = std::make_shared<FourierField>(std::move(k), std::move(a), std::move(phase));
    s.amplitude_ = amplitude;
    s.label_ = "fourier(seed=" + std::to_string(seed) + ")";
    s.n_ = n;
    return s;
}

NormalSection NormalSection::radialBlock(int n, int d, double c) {
    NormalSection s;
    s.field_ = std::make_shared<RadialBlockField>(n, d, c);
    s.project_ = false;
    s.amplitude_ = std::abs(c);
    s.label_ = "radial(c=" + std::to_string(c) + ")";
    s.n_ = n;
    return s;
}

NormalSection NormalSection::planarCos2(double eps) {
    NormalSection s;
    s.field_ = std::make_shared<PlanarCos2Field>(eps);
    s.amplitude_ = std::abs(eps);
    s.label_ = "planar-cos2";
    s.n_ = 3;
    return s;
}

namespace {

// sigma = P_N A and its Jacobian, from the base jet (order 2).
void sigmaAndJacobian(const LocalJet& base, const AmbientMap& field, bool project, Vec& sigma, Mat& dsigma) {
    const LocalJet a = composeJet(field, base, 1);
    if (!project) {
        sigma = a.q;
        dsigma = a.J;
        return;
    }
    const Mat& J = base.J;
    const auto m = J.cols();
    const auto n = J.rows();
    const Mat Ginv = (J.transpose() * J).inverse();
    const Mat P = Mat::Identity(n, n) - J * Ginv * J.transpose();
    sigma = P * a.q;
    dsigma.resize(n, m);
    for (Eigen::Index i = 0; i < m; ++i) {
        Mat Ji(n, m);
        for (Eigen::Index k = 0; k < n; ++k) Ji.row(k) = base.H[static_cast<std::size_t>(k)].col(i).transpose();
        const Mat dG = Ji.transpose() * J + J.transpose() * Ji;
        const Mat dP = -(Ji * Ginv * J.transpose() + J * Ginv * Ji.transpose() - J * Ginv * dG * Ginv * J.transpose());
        dsigma.col(i) = dP * a.q + P * a.J.col(i);
    }
}

class PerturbedChart final : public Chart {
public:
    PerturbedChart(ChartPtr base, NormalSection s)
        : Chart(base->dim(), base->ambientDim(), base->domain(), base->name() + "+sigma"),
          base_(std::move(base)),
          s_(std::move(s)) {}

    LocalJet jet(const Vec& u, int order) const override {
        if (!s_.project()) {
            // sigma is an ambient field restricted to K: compose exactly.
            LocalJet b = base_->jet(u, order);
            const LocalJet a = composeJet(s_.field(), b, order);
            b.q += a.q;
            b.J += a.J;
            for (std::size_t k = 0; k < b.H.size(); ++k) b.H[k] += a.H[k];
            return b;
        }
        LocalJet b = base_->jet(u, std::max(order, 2));
        Vec sigma;
        Mat ds;
        sigmaAndJacobian(b, s_.field(), true, sigma, ds);
        LocalJet out;
        out.q = b.q + sigma;
        out.J = b.J + ds;
        if (order >= 2) {
            // Second derivatives of sigma by central differences of its
            // analytic Jacobian.
            const int m = dim();
            const auto n = b.q.size();
            out.H = b.H;
            const double h = 1e-5;
            std::vector<Mat> cols(static_cast<std::size_t>(m));
            for (int j = 0; j < m; ++j) {
                Vec up = u, um = u;
                up[j] += h;
                um[j] -= h;
                Vec sp, sm;
                Mat dp, dm;
                sigmaAndJacobian(base_->jet(up, 2), s_.field(), true, sp, dp);
                sigmaAndJacobian(base_->jet(um, 2), s_.field(), true, sm, dm);
                cols[static_cast<std::size_t>(j)] = (dp - dm) / (2 * h);  // d/du_j of dsigma
            }
            for (Eigen::Index k = 0; k < n; ++k)
                for (int i = 0; i < m; ++i)
                    for (int j = 0; j < m; ++j) {
                        const double v = 0.5 * (cols[static_cast<std::size_t>(j)](k, i) +
                                                cols[static_cast<std::size_t>(i)](k, j));
                        out.H[static_cast<std::size_t>(k)](i, j) += v;
                    }
        }
        return out;
    }

    Vec point(const Vec& u) const override {
        if (!s_.project()) {
            const Vec x = base_->point(u);
            Vec a(x.size());
            s_.field().apply(x.data(), a.data());
            return x + a;
        }
        const LocalJet b = base_->jet(u, 1);
        Vec a(b.q.size());
        s_.field().apply(b.q.data(), a.data());
        const Mat Ginv = (b.J.transpose() * b.J).inverse();
        return b.q + a - b.J * (Ginv * (b.J.transpose() * a));
    }

    std::optional<Vec> invert(const Vec& q) const override { return base_->invert(q); }
    bool valid(const Vec& u) const override { return base_->valid(u); }

private:
    ChartPtr base_;
    NormalSection s_;
};

}  // namespace

Vec sectionAt(const ChartedManifold& k, const NormalSection& s, const ManifoldPoint& p) {
    const LocalJet b = k.eval(p, 1);
    Vec a(b.q.size());
    s.field().apply(b.q.data(), a.data());
    if (!s.project()) return a;
    const Mat Ginv = (b.J.transpose() * b.J).inverse();
    return a - b.J * (Ginv * (b.J.transpose() * a));
}

double sectionSupNorm(const ChartedManifold& k, const NormalSection& s, int perDim) {
    if (s.isZero()) return 0.0;
    double sup = 0.0;
    for (const auto& p : k.samples(perDim)) sup = std::max(sup, sectionAt(k, s, p).norm());
    return sup;
}

TubularData estimateTubular(const ChartedManifold& k, int perDim) {
    TubularData t;
    const int m = k.intrinsicDim();
    int per = perDim;
    while (m > 1 && std::pow(per, m) > 3000) --per;
    const auto pts = k.samples(per);
    std::vector<Vec> q;
    std::vector<Mat> T;
    for (const auto& p : pts) {
        const LocalJet lj = k.eval(p, 2);
        const Frame f = k.tangentFrame(p);
        q.push_back(lj.q);
        T.push_back(f.tangent);
        // Normal curvature along coordinate and diagonal directions.
        for (int i = 0; i < m; ++i)
            for (int j = i; j < m; ++j) {
                Vec a = Vec::Zero(m);
                a[i] += 1.0;
                a[j] += 1.0;
                const Vec v = lj.J * a;
                Vec acc = Vec::Zero(lj.q.size());
                for (Eigen::Index c = 0; c < lj.q.size(); ++c) acc[c] = a.dot(lj.H[static_cast<std::size_t>(c)] * a);
                const Vec nrm = f.normal * (f.normal.transpose() * acc);
                t.curvatureBound = std::max(t.curvatureBound, nrm.norm() / v.squaredNorm());
            }
    }
    t.bottleneck = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < q.size(); ++i)
        for (std::size_t j = i + 1; j < q.size(); ++j) {
            const Vec d = q[i] - q[j];
            const double len = d.norm();
            if (len < 1e-9) continue;
            const double ti = (T[i].transpose() * d).norm(), tj = (T[j].transpose() * d).norm();
            if (ti < 0.15 * len && tj < 0.15 * len) t.bottleneck = std::min(t.bottleneck, len);
        }
    const double curv = t.curvatureBound > 0 ? 1.0 / t.curvatureBound : std::numeric_limits<double>::infinity();
    t.radius = std::min(curv, 0.5 * t.bottleneck);
    return t;
}

ChartedManifold perturb(const ChartedManifold& k, const NormalSection& s, double reach) {
    if (s.ambientDim() != k.ambientDim()) throw ConormalError(Stage::Geometry, "section dimension mismatch");
    if (s.isZero()) return k;
    if (reach <= 0) reach = estimateTubular(k).radius;
    // At most ~20000 samples per chart, however large the dimension.
    int per = 16;
    while (k.intrinsicDim() > 1 && std::pow(per, k.intrinsicDim()) > 20000) --per;
    const double sup = sectionSupNorm(k, s, per);
    if (sup > 0.5 * reach)
        throw HypothesisError(Stage::Geometry, "normal section sup norm " + std::to_string(sup) +
                                                   " exceeds half the reach " + std::to_string(reach));
    ChartedManifold out(k.name() + "+" + s.label(), k.ambientDim(), k.intrinsicDim(), k.topology());
    out.setSeamTolerance(k.seamTolerance());
    for (int comp = 0; comp < k.components(); ++comp) {
        std::vector<ChartPtr> charts;
        for (int ci = 0; ci < k.chartsIn(comp); ++ci) {
            charts.push_back(std::make_shared<PerturbedChart>(k.chartPtr(comp, ci), s));
        }
        out.addComponent(std::move(charts));
    }
    return out;
}

}  // namespace conormal::geometry
