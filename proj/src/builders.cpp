#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "conormal/errors.hpp"
#include "conormal/geometry.hpp"

namespace conormal::geometry {

namespace {

Vec vec3(double x, double y, double z) {
    Vec v(3);
    v << x, y, z;
    return v;
}

ChartPtr circleChart(int ambient, const std::string& name) {
    Vec a = Vec::Zero(ambient), b = Vec::Zero(ambient);
    a[0] = 1.0;
    b[1] = 1.0;
    return makeFourierCurve(Vec::Zero(ambient), {a}, {b}, name);
}

// Charts of the unit sphere S^m in R^{m+1}.
std::vector<ChartPtr> sphereCharts(int m) {
    if (m == 1) return {circleChart(2, "S1")};
    return {makeStereoSphere(m, 1), makeStereoSphere(m, -1)};
}

}  // namespace

ChartedManifold buildCircle(double radius) {
    ChartedManifold k("circle", 3, 1, Topology::single({Factor::circle()}));
    k.addComponent({makeFourierCurve(Vec::Zero(3), {vec3(radius, 0, 0)}, {vec3(0, radius, 0)}, "circle")});
    return k;
}

ChartedManifold buildHopfLink() {
    ChartedManifold k("hopf", 3, 1, Topology{{ProductTopology{{Factor::circle()}}, ProductTopology{{Factor::circle()}}}});
    k.addComponent({makeFourierCurve(Vec::Zero(3), {vec3(1, 0, 0)}, {vec3(0, 1, 0)}, "C1")});
    k.addComponent({makeFourierCurve(vec3(0, 1, 0), {vec3(0, 1, 0)}, {vec3(0, 0, 1)}, "C2")});
    return k;
}

ChartedManifold buildEllipsoid(double a, double b, double c) {
    if (a <= 0 || b <= 0 || c <= 0) throw ConormalError(Stage::Geometry, "ellipsoid semi-axes must be positive");
    ChartedManifold k("ellipsoid", 3, 2, Topology::single({Factor::sphere(2)}));
    const auto A = makeAffine(Eigen::Vector3d(a, b, c).asDiagonal().toDenseMatrix(), Vec::Zero(3));
    std::vector<ChartPtr> charts;
    for (const auto& s : sphereCharts(2)) charts.push_back(makeMapped(s, A, "ellipsoid/" + s->name()));
    k.addComponent(std::move(charts));
    return k;
}

ChartedManifold buildRoundTorus(double R, double r) {
    if (!(R > r && r > 0)) throw ConormalError(Stage::Geometry, "torus radii must satisfy R > r > 0");
    ChartedManifold k("torus", 3, 2, Topology::single({Factor::torus(2)}));
    k.addComponent({makeTorus3(R, r)});
    return k;
}

ChartedManifold buildRoundSphere(int m) {
    ChartedManifold k("sphere" + std::to_string(m), m + 1, m, Topology::single({Factor::sphere(m)}));
    k.addComponent(sphereCharts(m));
    return k;
}

ChartedManifold buildFourierCurve(const Vec& c0, const std::vector<Vec>& a, const std::vector<Vec>& b,
                                  const std::string& name) {
    ChartedManifold k(name, static_cast<int>(c0.size()), 1, Topology::single({Factor::circle()}));
    k.addComponent({makeFourierCurve(c0, a, b, name)});
    return k;
}

ChartedManifold buildTrefoil(double R, double r) {
    // ((R + r cos 3t) cos 2t, (R + r cos 3t) sin 2t, r sin 3t) expanded into
    // harmonics 1, 2, 3 and 5.
    std::vector<Vec> a(5, Vec::Zero(3)), b(5, Vec::Zero(3));
    a[0] = vec3(r / 2, 0, 0);
    b[0] = vec3(0, -r / 2, 0);
    a[1] = vec3(R, 0, 0);
    b[1] = vec3(0, R, 0);
    b[2] = vec3(0, 0, r);
    a[4] = vec3(r / 2, 0, 0);
    b[4] = vec3(0, r / 2, 0);
    return buildFourierCurve(Vec::Zero(3), a, b, "trefoil");
}

// ------------------------------------------------------------ normalized M

Vec NormalizedM::loop(int which, double angle) const {
    const double phi = which == 0 ? angle : M_PI;
    const double theta = which == 0 ? -M_PI / 2 : angle;
    const double rho = R + r * std::cos(phi);
    Vec w = Vec::Zero(ambient);
    w[offset] = r * std::sin(phi);
    w[offset + 1] = rho * std::cos(theta);
    w[offset + 2] = rho * std::sin(theta);
    return w;
}

NormalizedM buildNormalizedM(const std::string& kind, int ambient) {
    if (kind != "T2") throw ConfigError("unsupported normalized manifold kind '" + kind + "' (expected T2)");
    if (ambient < 3) throw ConfigError("T2 needs at least three ambient coordinates");
    NormalizedM m;
    m.kind = kind;
    // R + r = 1 puts the unique highest point at height 1 and keeps M in the
    // unit ball; the inner circle sits at height R - r = 0.3.
    m.R = 0.65;
    m.r = 0.35;
    m.ambient = ambient;
    m.offset = ambient - 3;
    Mat A = Mat::Zero(ambient, 3);
    for (int i = 0; i < 3; ++i) A(m.offset + i, i) = 1.0;
    m.manifold = ChartedManifold("T2", ambient, 2, Topology::single({Factor::torus(2)}));
    m.manifold.addComponent({makeMapped(makeTorus3(m.R, m.r), makeAffine(A, Vec::Zero(ambient)), "T2")});
    // At the top (phi = 0, theta = pi/2) the tangent plane is spanned by the
    // first two torus coordinates.
    m.topTangent = Mat::Zero(ambient, 2);
    m.topTangent(m.offset, 0) = 1.0;
    m.topTangent(m.offset + 1, 1) = 1.0;
    return m;
}

ChartedManifold buildK0(int n, int d, const NormalizedM& m) {
    if (m.ambient != n - d) throw ConfigError("normalized M must live in R^{n-d}");
    if (m.manifold.intrinsicDim() != n - 2 * d + 1)
        throw ConfigError("M must have codimension d - 1 in R^{n-d}");
    Topology top = Topology::single({Factor::sphere(d - 1), Factor::torus(2)});
    ChartedManifold k("K0", n, d + 1, top);
    std::vector<ChartPtr> charts;
    for (const auto& s : sphereCharts(d - 1))
        for (int ci = 0; ci < m.manifold.chartsIn(0); ++ci) charts.push_back(makeProduct({s, m.manifold.chartPtr(0, ci)}));
    k.addComponent(std::move(charts));
    return k;
}

// ------------------------------------------------------- connected sum

Vec ConnectedSumRecipe::gamma(double s) const {
    Vec g = p0;
    g[n - 1] += 2.0 * s;
    return g;
}

Mat ConnectedSumRecipe::frame(double t) const {
    const double th = 0.5 * M_PI * t;
    Mat b = frame0;
    for (Eigen::Index i = 0; i < b.cols(); ++i)
        if ((frame0.col(i) - frame1.col(i)).norm() > 1e-12)
            b.col(i) = std::cos(th) * frame0.col(i) + std::sin(th) * frame1.col(i);
    return b;
}

std::pair<double, double> ConnectedSumRecipe::interpolationCurve(double r) const {
    const double t = (r - r0) / r0;
    const double S = smoothstep5(t, 0.25, 0.75);
    return {(1.0 - S) * (3.0 * r0 - r) + S * r, 1.0 - S};
}

ConnectedSumRecipe defaultRecipe(int n, int d, const NormalizedM& m) {
    if (d < 2) throw ConfigError("d must be at least 2");
    if (n != 2 * d + 1) throw ConfigError("the T2 recipe needs n = 2d + 1");
    if (m.ambient != n - d) throw ConfigError("normalized M must live in R^{n-d}");
    ConnectedSumRecipe rc;
    rc.n = n;
    rc.d = d;
    // Five percent of the smallest binormal chord of K0, which is the inner
    // diameter 2 (R - r) of the torus.
    rc.r0 = 0.05 * 2.0 * (m.R - m.r);
    rc.levelA = 0.5;
    rc.p0 = Vec::Zero(n);
    rc.p0[0] = 1.0;
    rc.p0[n - 1] = 1.0;
    rc.p1 = rc.p0;
    rc.p1[n - 1] = 3.0;
    const int k = n - d;  // dim K0 = dim S
    rc.frame0 = Mat::Zero(n, k);
    rc.frame1 = Mat::Zero(n, k);
    for (int i = 0; i < d - 1; ++i) {
        rc.frame0(1 + i, i) = 1.0;                      // e_2 .. e_d
        rc.frame1(i == 0 ? 0 : d + i - 1, i) = 1.0;     // e_1, then free w-coordinates
    }
    for (int j = 0; j < 2; ++j) {
        rc.frame0.block(d, d - 1 + j, n - d, 1) = m.topTangent.col(j);
        rc.frame1.block(d, d - 1 + j, n - d, 1) = m.topTangent.col(j);
    }
    rc.tubeRadius = 2.5 * rc.r0;
    return rc;
}

Vec sphereMapF(int n, int d, const Vec& y) {
    if (y.size() != n - d + 1) throw std::invalid_argument("sphereMapF expects a point of S^{n-d}");
    Vec out = Vec::Zero(n);
    const double y0 = y[0];
    double mu;
    if (y0 >= 0) {
        mu = -3.0 * y0;
    } else {
        const double s = 9.0 * (1.0 - y0 * y0);
        const double beta = smoothstep5((s - 8.0) / 0.5);
        mu = (1.0 - beta) - 3.0 * y0 * beta;
    }
    out[0] = 1.0 - mu;
    for (int i = 1; i < y.size(); ++i) out[d + i - 1] = 3.0 * y[i];
    return out;
}

namespace {

// Replaces the normal part of x - p by a smooth cutoff: the identity outside
// the ball of radius 3.5 r0, the tangent-plane projection inside 2.5 r0.
template <class S>
void flattenAt(const Vec& p, const Mat& PN, double r0, const S* x, S* y, int n) {
    S s2 = 0.0 * x[0];
    for (int i = 0; i < n; ++i) s2 = s2 + (x[i] - p[i]) * (x[i] - p[i]);
    for (int i = 0; i < n; ++i) y[i] = x[i];
    const double outer = 3.5 * r0, inner = 2.5 * r0;
    if (value(s2) >= outer * outer) return;
    const S beta = 1.0 - smoothstep5(s2, inner * inner, outer * outer);
    for (int i = 0; i < n; ++i) {
        S c = 0.0 * x[0];
        for (int j = 0; j < n; ++j)
            if (PN(i, j) != 0.0) c = c + PN(i, j) * (x[j] - p[j]);
        y[i] = y[i] - beta * c;
    }
}

Mat normalProjector(const Mat& T) {
    const auto n = T.rows();
    return Mat::Identity(n, n) - T * T.transpose();
}

class K0SideMap final : public AmbientMapT<K0SideMap> {
public:
    explicit K0SideMap(const ConnectedSumRecipe& rc)
        : AmbientMapT(rc.n, rc.n), rc_(rc), PN0_(normalProjector(rc.frame0)) {
        rotating_.resize(static_cast<std::size_t>(rc.frame0.cols()));
        for (Eigen::Index i = 0; i < rc.frame0.cols(); ++i)
            rotating_[static_cast<std::size_t>(i)] = (rc.frame0.col(i) - rc.frame1.col(i)).norm() > 1e-12;
    }

    template <class S>
    void eval(const S* x, S* z) const {
        const int n = rc_.n;
        const double r0 = rc_.r0;
        std::vector<S> y(static_cast<std::size_t>(n));
        flattenAt(rc_.p0, PN0_, r0, x, y.data(), n);
        for (int i = 0; i < n; ++i) z[i] = y[static_cast<std::size_t>(i)];
        S e2 = 0.0 * x[0];
        for (int i = 0; i < n; ++i) e2 = e2 + (y[static_cast<std::size_t>(i)] - rc_.p0[i]) * (y[static_cast<std::size_t>(i)] - rc_.p0[i]);
        double rhoValue = 1e300;
        S rho = 0.0 * x[0];
        if (value(e2) < (2.2 * r0) * (2.2 * r0)) {
            const auto k = rc_.frame0.cols();
            std::vector<S> u(static_cast<std::size_t>(k), 0.0 * x[0]);
            S rho2 = 0.0 * x[0];
            for (Eigen::Index a = 0; a < k; ++a) {
                for (int i = 0; i < n; ++i)
                    if (rc_.frame0(i, a) != 0.0)
                        u[static_cast<std::size_t>(a)] = u[static_cast<std::size_t>(a)] + rc_.frame0(i, a) * (y[static_cast<std::size_t>(i)] - rc_.p0[i]);
                rho2 = rho2 + u[static_cast<std::size_t>(a)] * u[static_cast<std::size_t>(a)];
            }
            if (value(rho2) < 1e-12 * r0 * r0) {
                // The excised centre: park it at p1 (never inside a valid chart).
                for (int i = 0; i < n; ++i) z[i] = rc_.p1[i] + 0.0 * x[0];
                return;
            }
            rho = sqrt(rho2);
            rhoValue = value(rho);
            if (rhoValue < r0) {
                const S scale = (3.0 * r0 - rho) / rho;
                for (int i = 0; i < n; ++i) {
                    S acc = 0.0 * x[0];
                    for (Eigen::Index a = 0; a < k; ++a)
                        if (rc_.frame1(i, a) != 0.0) acc = acc + rc_.frame1(i, a) * u[static_cast<std::size_t>(a)];
                    z[i] = rc_.p1[i] + scale * acc;
                }
            } else if (rhoValue < 2.0 * r0) {
                const S S5 = smoothstep5(rho, 1.25 * r0, 1.75 * r0);
                const S a2 = 1.0 - S5;
                const S a1 = (1.0 - S5) * (3.0 * r0 - rho) + S5 * rho;
                const S th = (0.5 * M_PI) * a2;
                const S c = cos(th), s = sin(th);
                for (int i = 0; i < n; ++i) z[i] = rc_.p0[i] + 0.0 * x[0];
                z[n - 1] = z[n - 1] + 2.0 * a2;
                for (Eigen::Index a = 0; a < k; ++a) {
                    const S coef = a1 * u[static_cast<std::size_t>(a)] / rho;
                    for (int i = 0; i < n; ++i) {
                        if (rotating_[static_cast<std::size_t>(a)]) {
                            const double f0 = rc_.frame0(i, a), f1 = rc_.frame1(i, a);
                            if (f0 != 0.0) z[i] = z[i] + coef * c * f0;
                            if (f1 != 0.0) z[i] = z[i] + coef * s * f1;
                        } else if (rc_.frame0(i, a) != 0.0) {
                            z[i] = z[i] + coef * rc_.frame0(i, a);
                        }
                    }
                }
            }
        }
        if (rc_.shift != 0.0) {
            // sigma = chi(rho) c (v, 0), switched off inside the modified region.
            const S chi = rhoValue > 3.0 * r0 ? S(1.0) + 0.0 * x[0] : smoothstep5(rho, r0, 3.0 * r0);
            for (int i = 0; i < rc_.d; ++i) z[i] = z[i] + rc_.shift * chi * x[i];
        }
    }

    double uRadius(const Vec& x) const {
        const int n = rc_.n;
        Vec y(n);
        flattenAt(rc_.p0, PN0_, rc_.r0, x.data(), y.data(), n);
        const Vec e = y - rc_.p0;
        if (e.norm() >= 2.2 * rc_.r0) return e.norm();
        return (rc_.frame0.transpose() * e).norm();
    }
    Vec uCoords(const Vec& x) const {
        const int n = rc_.n;
        Vec y(n);
        flattenAt(rc_.p0, PN0_, rc_.r0, x.data(), y.data(), n);
        return rc_.frame0.transpose() * (y - rc_.p0);
    }

    bool validAt(const Vec& x) const override { return uRadius(x) >= 0.6 * rc_.r0; }

    // Approximate preimage; the caller polishes it by Gauss-Newton.
    std::optional<Vec> invertMap(const Vec& z) const override {
        const int n = rc_.n;
        const double r0 = rc_.r0;
        const double height = z[n - 1];
        const Vec g0 = rc_.p0;
        double rho;
        Vec u;
        if (height > rc_.p0[n - 1] + 1e-12 && height <= rc_.p1[n - 1] + 1e-9) {
            const double a2 = std::clamp((height - rc_.p0[n - 1]) / 2.0, 0.0, 1.0);
            const Vec o = z - rc_.gamma(a2);
            const double a1 = o.norm();
            if (a1 < 1e-14) return std::nullopt;
            const Vec dir = rc_.frame(a2).transpose() * o / a1;
            if (a2 > 1.0 - 1e-12) {
                rho = 3.0 * r0 - a1;
            } else {
                double lo = r0, hi = 2.0 * r0;
                for (int it = 0; it < 60; ++it) {
                    const double mid = 0.5 * (lo + hi);
                    (rc_.interpolationCurve(mid).second > a2 ? lo : hi) = mid;
                }
                rho = 0.5 * (lo + hi);
            }
            u = rho * dir;
            Vec x = g0 + rc_.frame0 * u;
            if (rc_.shift != 0.0) x.head(rc_.d) /= 1.0 + rc_.shift * smoothstep5(rho, r0, 3.0 * r0);
            return x;
        }
        Vec x = z;
        if (rc_.shift != 0.0) {
            rho = (z.head(rc_.d) / (1.0 + rc_.shift) - g0.head(rc_.d)).norm();
            rho = std::hypot(rho, (z.tail(n - rc_.d) - g0.tail(n - rc_.d)).norm());
            x.head(rc_.d) /= 1.0 + rc_.shift * smoothstep5(rho, r0, 3.0 * r0);
        }
        return x;
    }

private:
    ConnectedSumRecipe rc_;
    Mat PN0_;
    std::vector<bool> rotating_;
};

class SSideMap final : public AmbientMapT<SSideMap> {
public:
    explicit SSideMap(const ConnectedSumRecipe& rc)
        : AmbientMapT(rc.n - rc.d + 1, rc.n), rc_(rc), PN1_(normalProjector(rc.frame1)) {}

    template <class S>
    void eval(const S* y, S* z) const {
        const int n = rc_.n, d = rc_.d;
        std::vector<S> f(static_cast<std::size_t>(n), 0.0 * y[0]);
        S mu;
        if (value(y[0]) >= 0) {
            mu = -3.0 * y[0];
        } else {
            S w2 = 0.0 * y[0];
            for (int i = 1; i < inDim(); ++i) w2 = w2 + y[i] * y[i];
            const S beta = smoothstep5((9.0 * w2 - 8.0) / 0.5);
            mu = (1.0 - beta) - 3.0 * y[0] * beta;
        }
        f[0] = 1.0 - mu;
        for (int i = 1; i < inDim(); ++i) f[static_cast<std::size_t>(d + i - 1)] = 3.0 * y[i];
        flattenAt(rc_.p1, PN1_, rc_.r0, f.data(), z, n);
    }

    bool validAt(const Vec& y) const override {
        Vec z(rc_.n);
        apply(y.data(), z.data());
        return (z - rc_.p1).norm() >= 2.1 * rc_.r0;
    }

    std::optional<Vec> invertMap(const Vec& z) const override {
        const int n = rc_.n, d = rc_.d;
        Vec x = z;
        if ((z - rc_.p1).norm() <= 3.5 * rc_.r0) {
            // Undo the flattening: keep the tangent part, restore the sphere.
            const Vec t = rc_.frame1 * (rc_.frame1.transpose() * (z - rc_.p1));
            Vec c = Vec::Zero(n);
            c[0] = 1.0;
            x = c + t;
            x[n - 1] += std::sqrt(std::max(0.0, 9.0 - t.squaredNorm()));
        }
        Vec y(n - d + 1);
        for (int i = 1; i < y.size(); ++i) y[i] = x[d + i - 1] / 3.0;
        const double s = std::sqrt(std::max(0.0, 1.0 - y.tail(y.size() - 1).squaredNorm()));
        y[0] = x[0] >= 1.0 ? s : -s;
        return y;
    }

private:
    ConnectedSumRecipe rc_;
    Mat PN1_;
};

}  // namespace

double K1Build::uRadius(const Vec& q0) const { return static_cast<const K0SideMap&>(*k0SideMap).uRadius(q0); }
Vec K1Build::uCoords(const Vec& q0) const { return static_cast<const K0SideMap&>(*k0SideMap).uCoords(q0); }

K1Build buildK1(const ConnectedSumRecipe& recipe, const NormalizedM& m) {
    K1Build b;
    b.recipe = recipe;
    b.m = m;
    b.k0 = buildK0(recipe.n, recipe.d, m);
    auto k0map = std::make_shared<K0SideMap>(recipe);
    auto smap = std::make_shared<SSideMap>(recipe);
    b.k0SideMap = k0map;
    b.sSideMap = smap;
    b.manifold = ChartedManifold(recipe.shift != 0.0 ? "K1sigma" : "K1", recipe.n, recipe.d + 1, b.k0.topology());
    std::vector<ChartPtr> charts;
    for (int ci = 0; ci < b.k0.chartsIn(0); ++ci) {
        auto base = b.k0.chartPtr(0, ci);
        charts.push_back(makeMapped(base, k0map, "K1/" + base->name()));
    }
    const int N = recipe.n - recipe.d;
    for (double sgn : {-1.0, 1.0}) {
        Vec c = Vec::Zero(N + 1);
        c[0] = sgn;
        charts.push_back(makeMapped(makeStereoSphereAt(c, 2.0), smap, sgn < 0 ? "K1/S-" : "K1/S+"));
    }
    b.manifold.addComponent(std::move(charts));
    return b;
}

}  // namespace conormal::geometry

namespace conormal::geometry {

namespace {

// Grid resolution keeping at most `budget` samples per chart.
int perDimFor(int m, int requested, double budget) {
    int per = requested;
    while (per > 2 && std::pow(per, m) > budget) --per;
    return per;
}

double minCrossDistance(const std::vector<Vec>& a, const std::vector<Vec>& b) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& x : a)
        for (const auto& y : b) best = std::min(best, (x - y).norm());
    return best;
}

}  // namespace

K1Diagnostics diagnoseK1(const K1Build& b, int perDim, int seamSamples) {
    const auto& rc = b.recipe;
    const int n = rc.n, N = rc.n - rc.d;
    const double r0 = rc.r0;
    K1Diagnostics out;

    struct Sample {
        bool sSide;
        Vec pre;
        Vec image;
        double rho;  // u-radius for K0-side samples
    };
    std::vector<Sample> all;
    std::vector<Vec> k0raw, sraw;

    const int perK = perDimFor(rc.d + 1, perDim, 3000);
    for (const auto& p : b.k0.samples(perK)) {
        const Vec x = b.k0.point(p);
        k0raw.push_back(x);
        const double rho = b.uRadius(x);
        if (rho < 0.6 * r0) continue;
        Vec z(n);
        b.k0SideMap->apply(x.data(), z.data());
        all.push_back({false, x, z, rho});
    }
    // Dense shells around p0, where the grid above is too coarse to see the tube.
    std::mt19937_64 rng(12345);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int i = 0; i < 400; ++i) {
        Vec dir(N);
        for (int j = 0; j < N; ++j) dir[j] = normal(rng);
        dir.normalize();
        const double rho = r0 * (0.6 + 1.8 * (i % 20) / 19.0);
        const Vec x = rc.p0 + rc.frame0 * (rho * dir);
        Vec z(n);
        b.k0SideMap->apply(x.data(), z.data());
        all.push_back({false, x, z, rho});
    }
    const int perS = perDimFor(N, perDim, 3000);
    for (double sgn : {-1.0, 1.0}) {
        Vec c = Vec::Zero(N + 1);
        c[0] = sgn;
        const auto chart = makeStereoSphereAt(c, 2.0);
        ChartedManifold tmp("S", N + 1, N, Topology::single({Factor::sphere(N)}));
        tmp.addComponent({chart});
        for (const auto& p : tmp.samples(perS)) {
            const Vec y = tmp.point(p);
            sraw.push_back(sphereMapF(n, rc.d, y));
            if (!b.sSideMap->validAt(y)) continue;
            Vec z(n);
            b.sSideMap->apply(y.data(), z.data());
            all.push_back({true, y, z, 0.0});
        }
    }

    out.minSeparation = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < all.size(); ++i)
        for (std::size_t j = i + 1; j < all.size(); ++j) {
            const Sample& a = all[i];
            const Sample& c = all[j];
            if (a.sSide == c.sSide) {
                const double thr = a.sSide ? 0.5 * r0 / 3.0 : 0.5 * r0;
                if ((a.pre - c.pre).norm() <= thr) continue;
            } else {
                // K0-side samples with rho < r0 land in the overlap with the S side.
                const Sample& k = a.sSide ? c : a;
                const Sample& s = a.sSide ? a : c;
                if (k.rho < r0 && (s.image - rc.p1).norm() < 2.6 * r0) continue;
            }
            out.minSeparation = std::min(out.minSeparation, (a.image - c.image).norm());
        }

    std::vector<Vec> gam;
    for (int i = 0; i <= 80; ++i) gam.push_back(rc.gamma(0.1 + 0.8 * i / 80.0));
    out.gammaClearance = std::min(minCrossDistance(gam, k0raw), minCrossDistance(gam, sraw));
    out.k0SClearance = minCrossDistance(k0raw, sraw);

    // Seams of the piecewise formula at |u| = r0 and |u| = 2 r0, evaluated on
    // the flat chart p0 + frame0 u on both sides, plus the K0-side / S-side
    // overlap at |u| = 0.75 r0.
    LocalJet flat;
    flat.J = rc.frame0;
    flat.H.assign(static_cast<std::size_t>(n), Mat::Zero(N, N));
    for (int i = 0; i < seamSamples; ++i) {
        Vec dir(N);
        for (int j = 0; j < N; ++j) dir[j] = normal(rng);
        dir.normalize();
        const double rho = (i % 2 == 0) ? r0 : 2.0 * r0;
        LocalJet a = flat, c = flat;
        a.q = rc.p0 + rc.frame0 * (rho * (1.0 - 1e-12) * dir);
        c.q = rc.p0 + rc.frame0 * (rho * (1.0 + 1e-12) * dir);
        const LocalJet ja = composeJet(*b.k0SideMap, a, 1);
        const LocalJet jc = composeJet(*b.k0SideMap, c, 1);
        out.seamPositionMismatch = std::max(out.seamPositionMismatch, (ja.q - jc.q).norm());
        out.seamDerivativeMismatch = std::max(out.seamDerivativeMismatch, (ja.J - jc.J).norm());

        const Vec x = rc.p0 + rc.frame0 * (0.75 * r0 * dir);
        Vec z(n), zs(n);
        b.k0SideMap->apply(x.data(), z.data());
        const auto y = b.sSideMap->invertMap(z);
        if (!y) throw NumericalError(Stage::Geometry, "S-side inverse failed in the chart overlap");
        b.sSideMap->apply(y->data(), zs.data());
        out.seamPositionMismatch = std::max(out.seamPositionMismatch, (z - zs).norm());
    }
    out.seamSamples = seamSamples;
    return out;
}

double checkNormalization(const NormalizedM& m, int perDim) {
    double maxNorm = 0.0, maxHeight = -1e300;
    std::vector<Vec> pts;
    for (const auto& p : m.manifold.samples(perDim)) {
        const Vec w = m.manifold.point(p);
        maxNorm = std::max(maxNorm, w.norm());
        maxHeight = std::max(maxHeight, w[m.ambient - 1]);
        pts.push_back(w);
    }
    if (maxNorm > 1.0 + 1e-12) throw HypothesisError(Stage::Geometry, "M is not inside the unit ball");
    Vec top = Vec::Zero(m.ambient);
    top[m.ambient - 1] = 1.0;
    for (const auto& w : pts)
        if (w[m.ambient - 1] > 1.0 - 1e-3 && (w - top).norm() > 0.1)
            throw HypothesisError(Stage::Geometry, "height function of M has a second maximum");
    return maxNorm;
}

}  // namespace conormal::geometry
