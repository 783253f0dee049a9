#pragma once

// Compact submanifolds of R^n given by closed-form charts with exact first
// and second derivatives, the example families built from them, and normal
// perturbations K_sigma = {q + sigma(q)}.

#include <Eigen/Dense>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "conormal/jet.hpp"
#include "conormal/topology.hpp"

namespace conormal::geometry {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Position, Jacobian (n x m) and per-component Hessians (m x m each) of a
// chart at one parameter value.
struct LocalJet {
    Vec q;
    Mat J;
    std::vector<Mat> H;  // empty when evaluated with order < 2

    // sum_k w_k H_k, the Hessian of <w, q(u)>.
    Mat contract(const Vec& w) const;
};

// Chart parameter domain: a box with per-coordinate periodicity, or a ball
// of the given radius when ballRadius > 0.
struct Domain {
    Vec lo, hi;
    std::vector<bool> periodic;
    double ballRadius = 0.0;

    static Domain box(Vec lo, Vec hi, std::vector<bool> periodic);
    static Domain ball(int dim, double radius);

    int dim() const { return static_cast<int>(lo.size()); }
    bool contains(const Vec& u) const;
    // 1 at the center, 0 on the boundary; periodic coordinates never limit.
    double margin(const Vec& u) const;
    Vec wrap(const Vec& u) const;
    // Difference a - b respecting periodic coordinates.
    Vec difference(const Vec& a, const Vec& b) const;
};

class Chart {
public:
    virtual ~Chart() = default;

    int dim() const { return m_; }
    int ambientDim() const { return n_; }
    const Domain& domain() const { return domain_; }
    const std::string& name() const { return name_; }

    virtual LocalJet jet(const Vec& u, int order = 2) const = 0;
    virtual Vec point(const Vec& u) const { return jet(u, 0).q; }
    // Parameter of an ambient point lying on the chart image, when a closed
    // form (or a cheap approximation to be polished by the caller) exists.
    virtual std::optional<Vec> invert(const Vec& q) const;
    // Extra validity predicate beyond the domain (used by piecewise charts).
    virtual bool valid(const Vec& u) const;
    // True when u is safely inside the domain (margin above the switch level).
    bool usable(const Vec& u) const;

    static constexpr double kSwitchMargin = 0.2;  // switch at 0.8 of the domain

protected:
    Chart(int m, int n, Domain d, std::string name)
        : m_(m), n_(n), domain_(std::move(d)), name_(std::move(name)) {}

private:
    int m_, n_;
    Domain domain_;
    std::string name_;
};

using ChartPtr = std::shared_ptr<const Chart>;

// Ambient maps R^k -> R^l written once as templates over the scalar type.
class AmbientMap {
public:
    virtual ~AmbientMap() = default;
    int inDim() const { return in_; }
    int outDim() const { return out_; }
    virtual void apply(const double* x, double* y) const = 0;
    virtual void apply(const Jet* x, Jet* y) const = 0;
    // Preimage of y, if the map is cheaply invertible.
    virtual std::optional<Vec> invertMap(const Vec& y) const;
    // Validity of the map at x (for piecewise maps defined on a region).
    virtual bool validAt(const Vec& x) const;

protected:
    AmbientMap(int in, int out) : in_(in), out_(out) {}

private:
    int in_, out_;
};

template <class Derived>
class AmbientMapT : public AmbientMap {
public:
    using AmbientMap::AmbientMap;
    void apply(const double* x, double* y) const override {
        static_cast<const Derived&>(*this).template eval<double>(x, y);
    }
    void apply(const Jet* x, Jet* y) const override {
        static_cast<const Derived&>(*this).template eval<Jet>(x, y);
    }
};

using AmbientMapPtr = std::shared_ptr<const AmbientMap>;

// Charts whose parametrization is a template map<S>(u, out) in Derived.
template <class Derived>
class MapChart : public Chart {
public:
    using Chart::Chart;
    LocalJet jet(const Vec& u, int order = 2) const override;
    Vec point(const Vec& u) const override {
        Vec q(ambientDim());
        static_cast<const Derived&>(*this).template map<double>(u.data(), q.data());
        return q;
    }
};

// Evaluates an ambient map on the Taylor model of a chart jet.
LocalJet composeJet(const AmbientMap& f, const LocalJet& base, int order);
LocalJet unpackJets(const std::vector<Jet>& out, int m, int order);

// ----------------------------------------------------------------- charts

// gamma(s) = c0 + sum_k a_k cos(ks) + b_k sin(ks), s in [0, 2 pi).
ChartPtr makeFourierCurve(Vec c0, std::vector<Vec> a, std::vector<Vec> b, std::string name);
// Unit sphere S^m in R^{m+1}; pole = +1 projects from +e_{m+1} (chart
// centered at -e_{m+1}); pole = -1 the reverse.  Domain: ball of radius 2.
ChartPtr makeStereoSphere(int m, int pole);
// Stereographic chart of S^m centered at the unit vector c (projection from
// -c), in the orthonormal frame completed from c.
ChartPtr makeStereoSphereAt(const Vec& center, double radius = 2.0);
// Torus of revolution in R^3 with radii (R, r): periodic (phi, theta).
// w = (r sin phi, (R + r cos phi) cos theta, (R + r cos phi) sin theta).
ChartPtr makeTorus3(double R, double r);
ChartPtr makeProduct(std::vector<ChartPtr> factors);
ChartPtr makeMapped(ChartPtr base, AmbientMapPtr f, std::string name);
// x -> A x + b, with A of full column rank.
AmbientMapPtr makeAffine(Mat A, Vec b);

// ------------------------------------------------------------- manifolds

struct ManifoldPoint {
    int comp = 0;
    int chart = 0;
    Vec u;
};

struct Frame {
    Mat tangent;  // n x m orthonormal
    Mat normal;   // n x d orthonormal
    double orthonormalityResidual = 0.0;
};

class ChartedManifold {
public:
    ChartedManifold() = default;
    ChartedManifold(std::string name, int ambient, int intrinsic, Topology topology);

    const std::string& name() const { return name_; }
    int ambientDim() const { return n_; }
    int intrinsicDim() const { return m_; }
    int codim() const { return n_ - m_; }
    const Topology& topology() const { return topology_; }
    double seamTolerance() const { return seamTolerance_; }
    void setSeamTolerance(double t) { seamTolerance_ = t; }

    void addComponent(std::vector<ChartPtr> charts);
    int components() const { return static_cast<int>(charts_.size()); }
    int chartsIn(int comp) const { return static_cast<int>(charts_[static_cast<std::size_t>(comp)].size()); }
    const Chart& chart(int comp, int chart) const;
    const Chart& chart(const ManifoldPoint& p) const { return chart(p.comp, p.chart); }
    ChartPtr chartPtr(int comp, int chart) const {
        return charts_.at(static_cast<std::size_t>(comp)).at(static_cast<std::size_t>(chart));
    }

    // Exact chart evaluation; throws when u lies outside the chart domain.
    LocalJet eval(const ManifoldPoint& p, int order = 2) const;
    Vec point(const ManifoldPoint& p) const;
    Frame tangentFrame(const ManifoldPoint& p) const;

    // Moves p into a chart where it is usable, keeping the same ambient point.
    ManifoldPoint recentre(const ManifoldPoint& p) const;
    // Finds the parameter of ambient point q (assumed on the manifold, near
    // component comp) in the best available chart.
    std::optional<ManifoldPoint> locate(int comp, const Vec& q, double tol = 1e-10) const;
    // Parameter of q in one specific chart, or nullopt.
    std::optional<Vec> locateInChart(int comp, int chart, const Vec& q, double tol = 1e-10) const;

    // Grid samples (perDim per coordinate) of every chart, filtered to usable
    // parameters.  Overlaps produce repeated ambient points.
    std::vector<ManifoldPoint> samples(int perDim) const;

private:
    std::string name_;
    int n_ = 0, m_ = 0;
    Topology topology_;
    double seamTolerance_ = 1e-8;
    std::vector<std::vector<ChartPtr>> charts_;
};

// Ambient point cloud of manifold samples with nearest-point queries and a
// Newton-polished closest-point projection.
class SampleCloud {
public:
    SampleCloud(const ChartedManifold& k, int perDim);
    const std::vector<ManifoldPoint>& points() const { return pts_; }
    const Mat& ambient() const { return X_; }
    std::size_t nearest(const Vec& x) const;
    // Closest point of the manifold to x: (parameter, distance).
    std::pair<ManifoldPoint, double> closestPoint(const Vec& x) const;
    double spacing() const { return spacing_; }

private:
    const ChartedManifold* k_;
    std::vector<ManifoldPoint> pts_;
    Mat X_;
    double spacing_ = 0.0;
};

// Local Newton projection of x onto the manifold starting from seed.
std::pair<ManifoldPoint, double> projectFrom(const ChartedManifold& k, const Vec& x, ManifoldPoint seed,
                                             int maxIter = 60);

// ----------------------------------------------------------- perturbation

// sigma(q) = P_N(q) A(q) for an ambient vector field A.  The projection is
// skipped when the field is known to be normal already.
class NormalSection {
public:
    static NormalSection zero(int n);
    // Random band-limited Fourier field with the given sup-norm bound.
    static NormalSection fourier(int n, unsigned seed, double amplitude, int modes, double wavenumber = 2.0);
    // sigma(v, w) = (c v, 0) on R^d x R^{n-d}: exactly normal on S^{d-1} x M.
    static NormalSection radialBlock(int n, int d, double c);
    // Radial field eps * cos(2 theta) in the (x, y)-plane of R^3.
    static NormalSection planarCos2(double eps);

    const AmbientMap& field() const { return *field_; }
    AmbientMapPtr fieldPtr() const { return field_; }
    bool isZero() const { return zero_; }
    bool project() const { return project_; }
    double amplitude() const { return amplitude_; }
    const std::string& label() const { return label_; }
    int ambientDim() const { return n_; }

private:
    AmbientMapPtr field_;
    bool zero_ = false;
    bool project_ = true;
    double amplitude_ = 0.0;
    std::string label_;
    int n_ = 0;
};

// Estimated reach (normal injectivity radius) of k, from curvature and from
// nearly-binormal sample pairs.
struct TubularData {
    double radius = 0.0;
    double curvatureBound = 0.0;
    double bottleneck = 0.0;
};
TubularData estimateTubular(const ChartedManifold& k, int perDim = 24);

// K_sigma; throws HypothesisError when the sampled sup norm of sigma exceeds
// half the reach.  reach <= 0 means estimate it.
ChartedManifold perturb(const ChartedManifold& k, const NormalSection& s, double reach = 0.0);
// Sampled sup |sigma| over k.
double sectionSupNorm(const ChartedManifold& k, const NormalSection& s, int perDim = 16);
// sigma at a point, and its residual against the tangent space.
Vec sectionAt(const ChartedManifold& k, const NormalSection& s, const ManifoldPoint& p);

// --------------------------------------------------------------- builders

ChartedManifold buildCircle(double radius = 1.0);
ChartedManifold buildHopfLink();
ChartedManifold buildEllipsoid(double a, double b, double c);
ChartedManifold buildRoundTorus(double R, double r);
ChartedManifold buildRoundSphere(int m);
// A closed curve from Fourier data (single component).
ChartedManifold buildFourierCurve(const Vec& c0, const std::vector<Vec>& a, const std::vector<Vec>& b,
                                  const std::string& name);
// The (2,3) torus knot on the torus (R, r).
ChartedManifold buildTrefoil(double R = 1.0, double r = 0.45);

// Normalized closed submanifold M of R^{n-d} of codimension d-1 together with
// the data the connected-sum recipe needs at its unique highest point.
struct NormalizedM {
    ChartedManifold manifold;
    std::string kind;       // "T2"
    double R = 0.0, r = 0.0;
    Mat topTangent;         // (n-d) x dim M, orthonormal, at the highest point
    // Loops used as homology witnesses (meridian, longitude) as closed-form
    // maps of an angle, all lying below the level a of the recipe.
    Vec loop(int which, double angle) const;
    int offset = 0;         // index of the first torus coordinate in R^{n-d}
    int ambient = 0;        // n - d
};
NormalizedM buildNormalizedM(const std::string& kind, int ambient);

ChartedManifold buildK0(int n, int d, const NormalizedM& m);

struct ConnectedSumRecipe {
    int n = 0, d = 0;
    double r0 = 0.03;
    double levelA = 0.5;        // a: h^{-1}([a,1]) is the cap B
    double tubeRadius = 0.0;    // sampled bound on |iota_f(U\V) - gamma|; 0 = derive 2.5 r0
    double shift = 0.0;         // c of sigma = c (v, 0) outside U; 0 = no shift
    Vec p0, p1;                 // segment endpoints
    Mat frame0, frame1;         // b_i(0) (tangent of K_0 at p0), b_i(1) (tangent of S at p1)

    Vec gamma(double s) const;
    // b_i(t) for t in [0, 1], orthonormal, normal to gamma'.
    Mat frame(double t) const;
    // (a1, a2) for r in [r0, 2 r0].
    std::pair<double, double> interpolationCurve(double r) const;
};

ConnectedSumRecipe defaultRecipe(int n, int d, const NormalizedM& m);

struct K1Build {
    ChartedManifold manifold;     // iota_f(K_0), shifted by sigma when recipe.shift > 0
    ConnectedSumRecipe recipe;
    NormalizedM m;
    // Ambient maps of the construction, exposed for seam and region checks.
    AmbientMapPtr k0SideMap;      // q0 in K_0 -> iota_{f(,sigma)}(q0)
    AmbientMapPtr sSideMap;       // y in S^{n-d} -> flattened f(y)
    ChartedManifold k0;           // the unmodified K_0
    // |u| of a K_0 point in the chart at p0 (after flattening).
    double uRadius(const Vec& q0) const;
    // Tangent-coordinates u at p0 of a K_0 point (after flattening).
    Vec uCoords(const Vec& q0) const;
};

K1Build buildK1(const ConnectedSumRecipe& recipe, const NormalizedM& m);

// Sampled checks of the construction.
struct K1Diagnostics {
    double minSeparation = 0.0;     // min distance between images of distinct sample preimages
    double gammaClearance = 0.0;    // min distance from gamma([0.1, 0.9]) to K0 and S samples
    double k0SClearance = 0.0;      // min distance between K0 and S samples
    double seamPositionMismatch = 0.0;
    double seamDerivativeMismatch = 0.0;
    int seamSamples = 0;
};
K1Diagnostics diagnoseK1(const K1Build& b, int perDim = 8, int seamSamples = 1000);

// Checks max |w| <= 1 and that the height maximum is attained at a single
// point; returns the sampled max |w| and throws HypothesisError on failure.
double checkNormalization(const NormalizedM& m, int perDim = 64);

// The sphere map f of the construction: y in S^{n-d} subset R^{n-d+1} to
// R^d x R^{n-d}.  Exposed for tests.
Vec sphereMapF(int n, int d, const Vec& y);

}  // namespace conormal::geometry

#include "conormal/geometry_impl.hpp"
