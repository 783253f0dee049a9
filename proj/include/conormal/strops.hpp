#pragma once

// The string-topology coproduct by two routes: the Morse-level count of split
// configurations on the flow lines of E, and the homology-level intersection
// of an evaluation map with a shifted copy K_sigma.  Also the certificates for
// the Hopf link and for the K0 / K1 families.

#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "conormal/algebra.hpp"
#include "conormal/chords.hpp"
#include "conormal/geometry.hpp"
#include "conormal/morseflow.hpp"

namespace conormal::strops {

using geometry::ChartedManifold;
using geometry::ManifoldPoint;
using geometry::Mat;
using geometry::Vec;
using morseflow::FlowContext;
using morseflow::MorseComplex;

// ------------------------------------------------------------------ splitting

struct SplitConfig {
    double tau0 = 0.0;        // tau is restricted to [tau0, 1 - tau0]
    int tauSamples = 4096;    // cap on the tau resolution of swept surfaces
    double meshSpacing = 0.0; // ambient mesh size of swept surfaces; 0 = 1% of the diameter
    double newtonTol = 1e-12;
    int maxNewton = 60;

    // tau0 with a relative margin below the bound sqrt(2 eps0) / diameter.
    static SplitConfig fromEnergy(double epsilon0, double diameter, double margin = 0.1);
    // The defining inequality tau0^2 diameter^2 / 2 < eps0.
    bool satisfies(double epsilon0, double diameter) const;
};

// (1 - tau) q + tau q'.
Vec ev(const Vec& q, const Vec& qp, double tau);

struct Split {
    Vec q, m, qp;
    // (q, m) and (m, q') as points of R^{2n}.
    Vec first() const;
    Vec second() const;
};
Split sp(const Vec& q, const Vec& qp, double tau);
// sp with the midpoint projected to K.  Throws HypothesisError when
// ev(q, q', tau) is farther than tol from K.
Split spOnK(const ChartedManifold& k, const Vec& q, const Vec& qp, double tau, double tol = 1e-8);

// ------------------------------------------------------------ Morse route

struct SplitHit {
    int source = -1, first = -1, second = -1;
    std::string method;  // "unstable-branch", "first-stable-branch", "second-stable-branch"
    double tau = 0.0;
    Vec q, m, qp;
    double minSingular = 0.0;  // transversality of the swept surface to K
    double energyFirst = 0.0, energySecond = 0.0;
    bool counted = false;      // both split pairs reached their targets
};

struct CoproductMatrix {
    std::string route;  // "morse" or "geometric"
    int d = 0;
    int chordCount = 0;
    std::vector<int> index;     // Morse index per chord id
    algebra::Mod2Matrix full;   // N^2 x N, row i * N + j holds x_i (x) x_j
    std::vector<SplitHit> hits;
    double epsilon0 = 0.0;
    double tau0 = 0.0;

    bool entry(int source, int first, int second) const;
    // Every nonzero entry satisfies ind x1 + ind x2 = ind x - d + 1.
    bool degreeShiftHolds() const;
    // (source index, first index, second index) -> rank of that block.
    std::map<std::tuple<int, int, int>, int> rankProfile() const;
    // Smallest split-pair energy over counted configurations.
    double minSplitEnergy() const;
    nlohmann::json toJson() const;
};

// delta_{g,g'} on the chords of a closed curve in R^3: W^u_g(x) is swept by
// segments, intersected with K, split, and both halves follow g' down.
// Throws HypothesisError outside that setting or on degenerate chords.
CoproductMatrix morseCoproduct(const FlowContext& g, const FlowContext& gp, const SplitConfig& cfg);

// delta o d_g == (d_g' (x) 1 + 1 (x) d_g') o delta on full chord matrices.
bool chainMapIdentity(const CoproductMatrix& delta, const MorseComplex& cg, const MorseComplex& cgp);

// ---------------------------------------------------------- geometric route

// A closed parameter manifold P with exact charts and a closed-form map from
// the ambient coordinates of P to (q, q') in R^n x R^n.
struct CycleMap {
    std::string label;
    ChartedManifold P;
    geometry::AmbientMapPtr c;
    int n = 0;

    int dim() const { return P.intrinsicDim(); }
    struct Jet {
        Vec q, qp;
        Mat Jq, Jqp;  // n x dim P
    };
    Jet eval(const ManifoldPoint& z) const;
    std::pair<Vec, Vec> pair(const ManifoldPoint& z) const;
};

struct LocusPoint {
    ManifoldPoint z;
    double tau = 0.0;
    ManifoldPoint onK;     // the matching point of K_sigma
    Vec q, qp, x;          // c(z) and ev_c(z, tau)
    double residual = 0.0;
    double minSingular = 0.0;
    int rank = 0;
    int localDim = 0;
    int component = -1;
    double h = 0.0;        // tau (1 - tau) E(c(z))
};

struct IntersectionLocus {
    std::string cycle;
    std::vector<LocusPoint> points;
    int expectedDim = 0;     // dim P + 1 - codim K
    int components = 0;
    double worstResidual = 0.0;
    double minSingular = 0.0;
    bool transversal = true;
    double epsilon1 = 0.0;   // half the smallest h over the locus
    long scanned = 0;
    long seeds = 0;
    nlohmann::json toJson() const;
};

struct LocusOptions {
    int perDim = 96;             // P samples per chart coordinate
    int tauSamples = 64;
    double seedDistance = 0.0;   // 0 = twice the scan spacing
    double hFloor = 1e-6;        // drop solutions with h below this (ends and diagonal)
    double dedup = 1e-7;
    double linkRadius = 0.0;     // component linking in P; 0 = 3 x sample spacing
    double residualTol = 1e-12;
    int maxNewton = 60;
};

// Gauss-Newton (minimum-norm steps) on ev_c(z, tau) = point of ksigma from a
// seed.  Returns nullopt if it does not converge.
std::optional<LocusPoint> solveLocusPoint(const CycleMap& c, const ChartedManifold& ksigma, ManifoldPoint z,
                                          double tau, ManifoldPoint onK, const LocusOptions& opt);
// Grid scan of P x (0, 1) for points of ev_c near ksigma, then Newton.
IntersectionLocus intersectionLocus(const CycleMap& c, const ChartedManifold& ksigma, const LocusOptions& opt);
void labelComponents(IntersectionLocus& l, double linkRadius);

// The cycle z -> (q0, gamma(z)) on component comp of a curve, with q0 the
// point of that component closest to anchor.
CycleMap pointTimesLoop(const ChartedManifold& k, int comp, const Vec& anchor);

// --------------------------------------------------- classes in degree zero

// H_0(K x K, Delta_K) has one generator per ordered pair of distinct
// components; H_0 (x) H_0 is indexed by pairs of those.
struct ComponentPairBasis {
    std::vector<std::pair<int, int>> pairs;
    explicit ComponentPairBasis(int components);
    int indexOf(int a, int b) const;  // -1 on the diagonal
    std::size_t tensorDim() const { return pairs.size() * pairs.size(); }
    std::string label(std::size_t tensorIndex) const;
};

// Class of a zero-dimensional locus: sum over points of [y1] (x) [y2].
algebra::Bits geometricClass(const ChartedManifold& k, const IntersectionLocus& l);

struct RouteComparison {
    algebra::Bits morse, geometric;
    std::vector<std::string> labels;
    std::vector<int> sourceCycle;  // chord ids of the Morse cycle
    bool agree = false;
    nlohmann::json toJson() const;
};
// Morse class: delta applied to the degree-one generator of the block
// comp x comp, read in H_0 (x) H_0.
RouteComparison compareRoutes(const ChartedManifold& k, const chords::ChordSet& s, const MorseComplex& cg,
                              const CoproductMatrix& delta, const IntersectionLocus& locus, int comp);

// ----------------------------------------------------------- certificates

struct Hypothesis {
    std::string name;
    bool holds = false;
    double value = 0.0;  // residual or margin backing the check
    std::string detail;
};

struct Certificate {
    std::string kind;       // vanishing | nonvanishing | distinguished | tb-zero | star
    std::string statement;  // stable descriptive id
    std::vector<Hypothesis> hypotheses;
    nlohmann::json evidence = nlohmann::json::object();
    bool certified = false;
    std::string verdict;
    nlohmann::json provenance = nlohmann::json::object();

    bool hypothesesHold() const;
    nlohmann::json toJson() const;
};

struct K0K1Params {
    int n = 5, d = 2;
    std::string M = "T2";
    double shift = 0.0675;   // sigma = shift * (v, 0) away from the modified region
    int samplesPerCycle = 256;
    int qGrid = 8;           // samples per loop parameter on Q x Q
    unsigned seed = 1;
};

struct K0Result {
    Certificate certificate;
    algebra::HomologyCoproduct delta;
    double minDistance = 0.0;     // sampled, ev image to K_{0,sigma}
    double analyticMargin = 0.0;  // 1 + shift - max |v| over ev images (convexity)
    int cycles = 0;
};
// delta_{K0} = 0: every basis cycle a x b of H_*(K0 x K0, Delta) has its
// segments inside {|v| <= 1}, which misses K_{0,sigma}.
K0Result k0VanishingCertificate(const K0K1Params& p);

// A loop b : S^1 -> M on the normalized torus: which = 0 meridian, 1
// longitude, -1 constant; wound `winding` times.
struct LoopChoice {
    int which = 0;
    int winding = 1;
    std::string name() const;
    algebra::FactorCycle cycle() const;
};

struct K1Result {
    Certificate certificate;
    algebra::HomologyCoproduct delta;
    std::vector<IntersectionLocus> loci;
    int certifiedRank = 0;
};
// delta_{K1} != 0 on H_{2k+d-1} from P = S^{d-1} x Q1 x Q2 for each pair of
// loops: locus at u = -e1, tau = 1/2, split map, and the projection pairing.
K1Result k1NonvanishingCertificate(const K0K1Params& p, const std::vector<std::pair<LoopChoice, LoopChoice>>& loops);

}  // namespace conormal::strops
