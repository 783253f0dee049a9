#pragma once

// Negative gradient flow of E on K x K for bumped product metrics, stable and
// unstable manifold queries by shooting, rigid trajectory counts and the Morse
// complex spanned by binormal chords.

#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "conormal/algebra.hpp"
#include "conormal/chords.hpp"

namespace conormal::morseflow {

using chords::BinormalChord;
using chords::ChordSet;
using geometry::ChartedManifold;
using geometry::ManifoldPoint;
using geometry::Mat;
using geometry::Vec;

struct PairPoint {
    ManifoldPoint p, pp;
};

// ------------------------------------------------------------------ metrics

// Rank-one bump on the ambient product R^n x R^n: adds
// a * phi(|y - c| / radius) * <v, xi>^2 to the Euclidean norm of xi.
struct MetricBump {
    Vec center;     // 2n
    Vec direction;  // 2n, unit
    double radius = 0.0;
    double amplitude = 0.0;
};

class MetricSpec {
public:
    // The product of the pullback metrics (no bumps).
    static MetricSpec base(std::string tag);
    // count bumps with random centres on K x K whose supports stay clear of
    // every chord, amplitudes in [amplitude / 2, amplitude].  radius <= 0
    // picks a quarter of the largest chord length.
    static MetricSpec bumped(const ChartedManifold& k, const ChordSet& s, std::string tag, unsigned seed,
                             double amplitude, int count = 5, double radius = 0.0);

    // This metric with `count` further bumps of amplitude in [jitter / 2,
    // jitter], drawn as in bumped() from its own seed.
    MetricSpec jittered(const ChartedManifold& k, const ChordSet& s, unsigned seed, double jitter,
                        int count = 5) const;

    const std::string& tag() const { return tag_; }
    const std::vector<MetricBump>& bumps() const { return bumps_; }
    unsigned seed() const { return seed_; }

    // Ambient symmetric factor A(y) = I + sum a_i phi_i(y) v_i v_i^T.
    Mat ambientFactor(const Vec& q, const Vec& qp) const;
    // Chart-coordinate metric blockdiag(J, J')^T A blockdiag(J, J').
    Mat chartMetric(const Vec& q, const Vec& qp, const Mat& J, const Mat& Jp) const;
    // Smallest distance from a bump support to the chord set (positive when
    // the supports exclude every chord).
    double chordClearance(const ChordSet& s) const;

    nlohmann::json toJson() const;

private:
    std::string tag_;
    unsigned seed_ = 0;
    std::vector<MetricBump> bumps_;
};

// V_g at y in the chart coordinates of y: the solution of g(V, .) = -dE.
Vec negGradient(const ChartedManifold& k, const MetricSpec& g, const PairPoint& y);
// The same vector pushed to R^n x R^n.
Vec negGradientAmbient(const ChartedManifold& k, const MetricSpec& g, const PairPoint& y);

double pairEnergy(const ChartedManifold& k, const PairPoint& y);
Vec pairAmbient(const ChartedManifold& k, const PairPoint& y);

// ------------------------------------------------------------- chord charts

// Linearization of the flow at a chord: generalized eigenpairs of the
// Hessian against the metric, used for cone tests and shooting.
struct ChordLocal {
    int id = -1;
    int index = 0;
    double length = 0.0;
    Vec y;          // ambient (q, q') in R^{2n}
    Vec lambda;     // ascending
    Mat vectors;    // chart coordinates, G-orthonormal columns
    Mat G;          // metric at the chord
    Mat toChart;    // maps an ambient displacement to chart coordinates
    Mat Jp;         // blockdiag(J, J'): chart -> ambient
    double coneRadius = 0.0;
    double shootRadius = 0.0;

    // Coordinates of the displacement y' - y in the eigenbasis.
    Vec coordinates(const Vec& yAmbient) const;
    // Ambient point of the chord displaced along sum c_i v_i (first order).
    Vec displaced(const Vec& chartOffset) const;
};

// --------------------------------------------------------------------- flow

enum class FlowEnd { Chord, Diagonal, TimeLimit };
const char* flowEndName(FlowEnd e);

struct FlowOptions {
    int direction = 1;           // +1 follows V_g (E decreases), -1 follows -V_g
    double absTol = 1e-11;
    double relTol = 1e-10;
    double maxTime = 2e4;
    double maxChartStep = 0.05;  // bound on |du| per step
    double monotoneTol = 1e-9;
    bool record = false;
    bool stopAtChords = true;
    bool stopAtDiagonal = true;
    int ignoreChord = -1;        // chord the flow starts at (never terminates there)
};

struct FlowSample {
    double t = 0.0;
    double E = 0.0;
    Vec y;   // ambient (q, q')
    Vec dy;  // ambient velocity
    PairPoint at;
};

struct FlowResult {
    FlowEnd reason = FlowEnd::TimeLimit;
    int chord = -1;         // terminal chord for FlowEnd::Chord
    Vec coneCoordinates;    // eigen-coordinates at cone entry
    PairPoint end;
    double E = 0.0;
    double t = 0.0;
    double minE = 0.0, maxE = 0.0;
    long steps = 0;
    std::vector<FlowSample> trace;
    // Closest approach to the watched chord, with the eigen-coordinates there.
    double watchDistance = 0.0;
    Vec watchCoordinates;
};

// Flow data for one metric on one chord set.  Holds references: k and s must
// outlive the context.
class FlowContext {
public:
    FlowContext(const ChartedManifold& k, const ChordSet& s, MetricSpec g);

    const ChartedManifold& manifold() const { return *k_; }
    const ChordSet& chords() const { return *s_; }
    const MetricSpec& metric() const { return g_; }
    const ChordLocal& local(int id) const { return locals_.at(static_cast<std::size_t>(id)); }
    int dim() const { return 2 * k_->intrinsicDim(); }
    // Filtration floor: half the smallest chord energy.
    double epsilon0() const { return eps0_; }
    // Forward flows stop on the diagonal side once E drops below this.
    double diagonalEnergy() const { return 0.5 * eps0_; }

    Vec field(const PairPoint& y, int direction) const;
    FlowResult integrate(PairPoint y, const FlowOptions& opt, int watch = -1) const;
    // Flow for time T (no chord termination); the flow() operation.
    PairPoint flow(const PairPoint& y, double T) const;
    // Chart point of the ambient pair y near the seed.
    PairPoint locate(const Vec& y, const PairPoint& seed) const;
    PairPoint chordPoint(int id) const;
    // Start of a shooting ray: chord id displaced by r * sum c_i v_i over the
    // chosen eigen-directions.
    PairPoint rayStart(int id, const std::vector<int>& dirs, const Vec& coeffs, double r) const;

private:
    const ChartedManifold* k_;
    const ChordSet* s_;
    MetricSpec g_;
    std::vector<ChordLocal> locals_;
    double eps0_ = 0.0;
};

// ------------------------------------------------------ trajectory counting

struct TrajectoryHit {
    double parameter = 0.0;   // branch sign or shooting angle
    double residual = 0.0;    // cone-entry distance to the target
    double minEnergy = 0.0;   // smallest E on the sampled trajectory
    std::string method;
};

struct TrajectoryCount {
    int source = -1, target = -1;
    int count = 0;            // mod 2
    int raw = 0;              // number of isolated hits
    std::vector<TrajectoryHit> hits;
    bool suspect = false;     // non-isolated hits or radius instability
    std::string method;       // "unstable-branch", "stable-branch", "circle", "reverse-circle"
    nlohmann::json toJson() const;
};

struct CountOptions {
    int rays = 64;
    int refineDepth = 40;
    double radiusScale = 1.0;
};

// T_g(x; x') mod 2 for ind x' = ind x - 1.  Throws std::invalid_argument on
// the degree precondition and NumericalError when neither W^u(x) nor W^s(x')
// is at most two-dimensional.
TrajectoryCount countTrajectories(const FlowContext& ctx, int x, int xp, const CountOptions& opt = {});

// One unstable (direction +1) or stable (-1) branch of an index-1 or
// co-index-1 chord, recorded for interpolation.
struct Branch {
    int chord = -1;
    int sign = 1;
    int direction = 1;
    FlowResult flow;

    // Cubic Hermite interpolation of the recorded ambient trace.
    Vec at(double t) const;
    Vec velocity(double t) const;
    double tMax() const;
    // Chart seed of the recorded sample nearest to t.
    PairPoint seed(double t) const;
};
// Branches of W^u(x) (direction +1, needs ind x = 1) or W^s(x) (direction
// -1, needs ind x = dim - 1).
std::vector<Branch> branches(const FlowContext& ctx, int x, int direction, double radiusScale = 1.0);

// -------------------------------------------------------------- the complex

struct MorseComplex {
    std::string manifold;
    std::string metricTag;
    double epsilon0 = 0.0;
    int dim = 0;
    std::map<int, std::vector<int>> basis;                 // degree -> chord ids
    std::map<int, algebra::Mod2Matrix> differential;       // degree k: C_k -> C_{k-1}
    std::vector<TrajectoryCount> counts;
    int chordCount = 0;

    algebra::Mod2Complex toMod2() const;
    // Differential on all chords at once, rows/columns indexed by chord id.
    algebra::Mod2Matrix full() const;
    algebra::HomologyData homology() const;
    bool squareZero() const;
    nlohmann::json toJson() const;
};

struct ComplexOptions {
    CountOptions count;
    bool radiusCheck = true;  // recount at twice the shooting radius
};

// Throws HypothesisError on degenerate chords and NumericalError when d o d
// != 0 or counts change with the shooting radius.
MorseComplex buildComplex(const FlowContext& ctx, const ComplexOptions& opt = {});

}  // namespace conormal::morseflow
