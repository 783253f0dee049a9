#include <cmath>
#include <numbers>

#include "conormal/errors.hpp"
#include "conormal/geometry.hpp"

namespace conormal::geometry {

// ------------------------------------------------------------- basics

Mat LocalJet::contract(const Vec& w) const {
    const auto m = J.cols();
    Mat out = Mat::Zero(m, m);
    for (std::size_t k = 0; k < H.size(); ++k) out += w[static_cast<Eigen::Index>(k)] * H[k];
    return out;
}

Domain Domain::box(Vec lo, Vec hi, std::vector<bool> periodic) {
    Domain d;
    d.lo = std::move(lo);
    d.hi = std::move(hi);
    d.periodic = std::move(periodic);
    return d;
}

Domain Domain::ball(int dim, double radius) {
    Domain d;
    d.lo = Vec::Constant(dim, -radius);
    d.hi = Vec::Constant(dim, radius);
    d.periodic.assign(static_cast<std::size_t>(dim), false);
    d.ballRadius = radius;
    return d;
}

bool Domain::contains(const Vec& u) const {
    if (u.size() != lo.size()) return false;
    if (!u.allFinite()) return false;
    if (ballRadius > 0) return u.norm() <= ballRadius;
    for (Eigen::Index i = 0; i < u.size(); ++i) {
        if (periodic[static_cast<std::size_t>(i)]) continue;
        if (u[i] < lo[i] || u[i] > hi[i]) return false;
    }
    return true;
}

double Domain::margin(const Vec& u) const {
    if (ballRadius > 0) return 1.0 - u.norm() / ballRadius;
    double m = 1.0;
    for (Eigen::Index i = 0; i < u.size(); ++i) {
        if (periodic[static_cast<std::size_t>(i)]) continue;
        const double half = 0.5 * (hi[i] - lo[i]);
        m = std::min(m, std::min(u[i] - lo[i], hi[i] - u[i]) / half);
    }
    return m;
}

Vec Domain::wrap(const Vec& u) const {
    Vec w = u;
    for (Eigen::Index i = 0; i < u.size(); ++i) {
        if (!periodic[static_cast<std::size_t>(i)]) continue;
        const double period = hi[i] - lo[i];
        double t = std::fmod(u[i] - lo[i], period);
        if (t < 0) t += period;
        w[i] = lo[i] + t;
    }
    return w;
}

Vec Domain::difference(const Vec& a, const Vec& b) const {
    Vec d = a - b;
    for (Eigen::Index i = 0; i < d.size(); ++i) {
        if (!periodic[static_cast<std::size_t>(i)]) continue;
        const double period = hi[i] - lo[i];
        d[i] -= period * std::round(d[i] / period);
    }
    return d;
}

std::optional<Vec> Chart::invert(const Vec&) const { return std::nullopt; }
bool Chart::valid(const Vec&) const { return true; }

bool Chart::usable(const Vec& u) const {
    return domain_.contains(u) && domain_.margin(u) >= kSwitchMargin && valid(u);
}

std::optional<Vec> AmbientMap::invertMap(const Vec&) const { return std::nullopt; }
bool AmbientMap::validAt(const Vec&) const { return true; }

LocalJet unpackJets(const std::vector<Jet>& out, int m, int order) {
    const auto n = static_cast<Eigen::Index>(out.size());
    LocalJet lj;
    lj.q.resize(n);
    lj.J = Mat::Zero(n, m);
    for (Eigen::Index k = 0; k < n; ++k) {
        const Jet& o = out[static_cast<std::size_t>(k)];
        lj.q[k] = o.v;
        for (int i = 0; i < std::min(m, o.n); ++i) lj.J(k, i) = o.g[static_cast<std::size_t>(i)];
    }
    if (order >= 2) {
        lj.H.assign(static_cast<std::size_t>(n), Mat::Zero(m, m));
        for (Eigen::Index k = 0; k < n; ++k) {
            const Jet& o = out[static_cast<std::size_t>(k)];
            if (o.ord < 2) continue;
            const int nv = std::min(m, o.n);
            for (int i = 0; i < nv; ++i)
                for (int j = 0; j <= i; ++j) {
                    const double h = o.hess(i, j);
                    lj.H[static_cast<std::size_t>(k)](i, j) = h;
                    lj.H[static_cast<std::size_t>(k)](j, i) = h;
                }
        }
    }
    return lj;
}

LocalJet composeJet(const AmbientMap& f, const LocalJet& base, int order) {
    const int m = static_cast<int>(base.J.cols());
    const int ord = order < 1 ? 1 : order;
    if (m > kMaxJetVars) throw std::invalid_argument("chart dimension exceeds jet capacity");
    std::vector<Jet> x(static_cast<std::size_t>(f.inDim()));
    for (int k = 0; k < f.inDim(); ++k) {
        Jet& xk = x[static_cast<std::size_t>(k)];
        xk = Jet::constant(base.q[k], m, ord);
        for (int i = 0; i < m; ++i) xk.g[static_cast<std::size_t>(i)] = base.J(k, i);
        if (ord >= 2 && !base.H.empty())
            for (int i = 0; i < m; ++i)
                for (int j = 0; j <= i; ++j)
                    xk.h[static_cast<std::size_t>(hessIndex(i, j))] = base.H[static_cast<std::size_t>(k)](i, j);
    }
    std::vector<Jet> y(static_cast<std::size_t>(f.outDim()));
    f.apply(x.data(), y.data());
    return unpackJets(y, m, order);
}

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// ------------------------------------------------------------- Fourier curve

class FourierCurve final : public MapChart<FourierCurve> {
public:
    FourierCurve(Vec c0, std::vector<Vec> a, std::vector<Vec> b, std::string name)
        : MapChart(1, static_cast<int>(c0.size()),
                   Domain::box(Vec::Constant(1, 0.0), Vec::Constant(1, kTwoPi), {true}), std::move(name)),
          c0_(std::move(c0)),
          a_(std::move(a)),
          b_(std::move(b)) {}

    template <class S>
    void map(const S* u, S* out) const {
        const int n = ambientDim();
        for (int k = 0; k < n; ++k) out[k] = S(c0_[k]) + 0.0 * u[0];
        for (std::size_t h = 0; h < a_.size(); ++h) {
            const double kk = static_cast<double>(h + 1);
            const S c = cos(kk * u[0]);
            const S s = sin(kk * u[0]);
            for (int k = 0; k < n; ++k) out[k] = out[k] + a_[h][k] * c + b_[h][k] * s;
        }
    }

    std::optional<Vec> invert(const Vec& q) const override {
        // Coarse scan then Newton on |gamma(s) - q|^2.
        const int samples = 512;
        double best = 1e300, bestS = 0.0;
        for (int i = 0; i < samples; ++i) {
            const double s = kTwoPi * i / samples;
            const double d = (point(Vec::Constant(1, s)) - q).squaredNorm();
            if (d < best) {
                best = d;
                bestS = s;
            }
        }
        double s = bestS;
        for (int it = 0; it < 50; ++it) {
            const LocalJet lj = jet(Vec::Constant(1, s), 2);
            const Vec r = lj.q - q;
            const double g = lj.J.col(0).dot(r);
            const double h = lj.J.col(0).squaredNorm() + lj.contract(r)(0, 0);
            const double step = -g / (h > 1e-12 ? h : lj.J.col(0).squaredNorm());
            s += step;
            if (std::abs(step) < 1e-15) break;
        }
        return domain().wrap(Vec::Constant(1, s));
    }

private:
    Vec c0_;
    std::vector<Vec> a_, b_;
};

// ----------------------------------------------------------- stereographic

class StereoSphere final : public MapChart<StereoSphere> {
public:
    StereoSphere(Vec center, Mat tangent, double radius)
        : MapChart(static_cast<int>(tangent.cols()), static_cast<int>(center.size()),
                   Domain::ball(static_cast<int>(tangent.cols()), radius), "stereo"),
          c_(std::move(center)),
          T_(std::move(tangent)) {}

    template <class S>
    void map(const S* u, S* out) const {
        const int m = dim();
        S r2 = u[0] * u[0];
        for (int i = 1; i < m; ++i) r2 = r2 + u[i] * u[i];
        const S inv = 1.0 / (1.0 + r2);
        const S t = (1.0 - r2) * inv;
        for (int k = 0; k < ambientDim(); ++k) {
            S acc = c_[k] * t;
            for (int i = 0; i < m; ++i) acc = acc + (2.0 * T_(k, i)) * (u[i] * inv);
            out[k] = acc;
        }
    }

    std::optional<Vec> invert(const Vec& q) const override {
        const double nq = q.norm();
        if (nq < 1e-12) return std::nullopt;
        const Vec x = q / nq;
        const double t = c_.dot(x);
        if (t <= -1.0 + 1e-12) return std::nullopt;
        return Vec((T_.transpose() * x) / (1.0 + t));
    }

private:
    Vec c_;
    Mat T_;
};

// ------------------------------------------------------------------- torus

class Torus3 final : public MapChart<Torus3> {
public:
    Torus3(double R, double r)
        : MapChart(2, 3, Domain::box(Vec::Zero(2), Vec::Constant(2, kTwoPi), {true, true}), "torus"),
          R_(R),
          r_(r) {}

    template <class S>
    void map(const S* u, S* out) const {
        const S rho = R_ + r_ * cos(u[0]);
        out[0] = r_ * sin(u[0]);
        out[1] = rho * cos(u[1]);
        out[2] = rho * sin(u[1]);
    }

    std::optional<Vec> invert(const Vec& q) const override {
        const double theta = std::atan2(q[2], q[1]);
        const double rho = std::hypot(q[1], q[2]);
        const double phi = std::atan2(q[0], rho - R_);
        Vec u(2);
        u << phi, theta;
        return domain().wrap(u);
    }

private:
    double R_, r_;
};

// ----------------------------------------------------------------- product

Domain productDomain(const std::vector<ChartPtr>& f) {
    int m = 0;
    for (const auto& c : f) m += c->dim();
    Vec lo(m), hi(m);
    std::vector<bool> per;
    int off = 0;
    for (const auto& c : f) {
        lo.segment(off, c->dim()) = c->domain().lo;
        hi.segment(off, c->dim()) = c->domain().hi;
        for (int i = 0; i < c->dim(); ++i) per.push_back(c->domain().periodic[static_cast<std::size_t>(i)]);
        off += c->dim();
    }
    return Domain::box(lo, hi, per);
}

int sumAmbient(const std::vector<ChartPtr>& f) {
    int n = 0;
    for (const auto& c : f) n += c->ambientDim();
    return n;
}

int sumDim(const std::vector<ChartPtr>& f) {
    int n = 0;
    for (const auto& c : f) n += c->dim();
    return n;
}

std::string productName(const std::vector<ChartPtr>& f) {
    std::string s;
    for (std::size_t i = 0; i < f.size(); ++i) s += (i ? "x" : "") + f[i]->name();
    return s;
}

class ProductChart final : public Chart {
public:
    explicit ProductChart(std::vector<ChartPtr> f)
        : Chart(sumDim(f), sumAmbient(f), productDomain(f), productName(f)), f_(std::move(f)) {}

    LocalJet jet(const Vec& u, int order) const override {
        LocalJet out;
        const int n = ambientDim(), m = dim();
        out.q.resize(n);
        out.J = Mat::Zero(n, m);
        if (order >= 2) out.H.assign(static_cast<std::size_t>(n), Mat::Zero(m, m));
        int uo = 0, qo = 0;
        for (const auto& c : f_) {
            const LocalJet lj = c->jet(u.segment(uo, c->dim()), order);
            out.q.segment(qo, c->ambientDim()) = lj.q;
            out.J.block(qo, uo, c->ambientDim(), c->dim()) = lj.J;
            if (order >= 2)
                for (int k = 0; k < c->ambientDim(); ++k)
                    out.H[static_cast<std::size_t>(qo + k)].block(uo, uo, c->dim(), c->dim()) =
                        lj.H[static_cast<std::size_t>(k)];
            uo += c->dim();
            qo += c->ambientDim();
        }
        return out;
    }

    Vec point(const Vec& u) const override {
        Vec q(ambientDim());
        int uo = 0, qo = 0;
        for (const auto& c : f_) {
            q.segment(qo, c->ambientDim()) = c->point(u.segment(uo, c->dim()));
            uo += c->dim();
            qo += c->ambientDim();
        }
        return q;
    }

    std::optional<Vec> invert(const Vec& q) const override {
        Vec u(dim());
        int uo = 0, qo = 0;
        for (const auto& c : f_) {
            auto ui = c->invert(q.segment(qo, c->ambientDim()));
            if (!ui) return std::nullopt;
            u.segment(uo, c->dim()) = *ui;
            uo += c->dim();
            qo += c->ambientDim();
        }
        return u;
    }

    bool valid(const Vec& u) const override {
        int uo = 0;
        for (const auto& c : f_) {
            if (!c->valid(u.segment(uo, c->dim()))) return false;
            uo += c->dim();
        }
        return true;
    }

private:
    std::vector<ChartPtr> f_;
};

// ------------------------------------------------------------------ mapped

class MappedChart final : public Chart {
public:
    MappedChart(ChartPtr base, AmbientMapPtr f, std::string name)
        : Chart(base->dim(), f->outDim(), base->domain(), std::move(name)), base_(std::move(base)), f_(std::move(f)) {
        if (f_->inDim() != base_->ambientDim()) throw std::invalid_argument("mapped chart dimension mismatch");
    }

    LocalJet jet(const Vec& u, int order) const override {
        return composeJet(*f_, base_->jet(u, order), order);
    }

    Vec point(const Vec& u) const override {
        const Vec x = base_->point(u);
        Vec y(ambientDim());
        f_->apply(x.data(), y.data());
        return y;
    }

    std::optional<Vec> invert(const Vec& q) const override {
        auto x = f_->invertMap(q);
        if (!x) return std::nullopt;
        return base_->invert(*x);
    }

    bool valid(const Vec& u) const override { return base_->valid(u) && f_->validAt(base_->point(u)); }

private:
    ChartPtr base_;
    AmbientMapPtr f_;
};

class AffineMap final : public AmbientMapT<AffineMap> {
public:
    AffineMap(Mat A, Vec b)
        : AmbientMapT(static_cast<int>(A.cols()), static_cast<int>(A.rows())), A_(std::move(A)), b_(std::move(b)) {
        pinv_ = A_.completeOrthogonalDecomposition().pseudoInverse();
    }

    template <class S>
    void eval(const S* x, S* y) const {
        for (int i = 0; i < outDim(); ++i) {
            S acc = S(b_[i]);
            for (int j = 0; j < inDim(); ++j)
                if (A_(i, j) != 0.0) acc = acc + A_(i, j) * x[j];
            y[i] = acc;
        }
    }

    std::optional<Vec> invertMap(const Vec& y) const override {
        Vec x = pinv_ * (y - b_);
        if ((A_ * x + b_ - y).norm() > 1e-8 * (1.0 + y.norm())) return std::nullopt;
        return x;
    }

private:
    Mat A_, pinv_;
    Vec b_;
};

}  // namespace

ChartPtr makeFourierCurve(Vec c0, std::vector<Vec> a, std::vector<Vec> b, std::string name) {
    if (a.size() != b.size()) throw std::invalid_argument("Fourier coefficient lists differ in length");
    return std::make_shared<FourierCurve>(std::move(c0), std::move(a), std::move(b), std::move(name));
}

ChartPtr makeStereoSphereAt(const Vec& center, double radius) {
    const Eigen::Index n = center.size();
    const Vec c = center.normalized();
    // Complete c to an orthonormal basis; the tangent frame is the rest.
    Mat basis(n, n);
    basis.col(0) = c;
    Mat seed = Mat::Identity(n, n);
    Eigen::Index filled = 1;
    for (Eigen::Index j = 0; j < n && filled < n; ++j) {
        Vec v = seed.col(j);
        for (Eigen::Index k = 0; k < filled; ++k) v -= basis.col(k).dot(v) * basis.col(k);
        for (Eigen::Index k = 0; k < filled; ++k) v -= basis.col(k).dot(v) * basis.col(k);
        if (v.norm() > 1e-6) basis.col(filled++) = v.normalized();
    }
    return std::make_shared<StereoSphere>(c, basis.rightCols(n - 1), radius);
}

ChartPtr makeStereoSphere(int m, int pole) {
    Vec c = Vec::Zero(m + 1);
    c[m] = pole > 0 ? -1.0 : 1.0;
    Mat T = Mat::Zero(m + 1, m);
    for (int i = 0; i < m; ++i) T(i, i) = 1.0;
    return std::make_shared<StereoSphere>(c, T, 2.0);
}

ChartPtr makeTorus3(double R, double r) { return std::make_shared<Torus3>(R, r); }

ChartPtr makeProduct(std::vector<ChartPtr> factors) {
    if (factors.size() == 1) return factors.front();
    return std::make_shared<ProductChart>(std::move(factors));
}

ChartPtr makeMapped(ChartPtr base, AmbientMapPtr f, std::string name) {
    return std::make_shared<MappedChart>(std::move(base), std::move(f), std::move(name));
}

AmbientMapPtr makeAffine(Mat A, Vec b) { return std::make_shared<AffineMap>(std::move(A), std::move(b)); }

}  // namespace conormal::geometry
