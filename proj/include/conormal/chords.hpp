#pragma once

// Binormal chords: critical points of E(q, q') = |q - q'|^2 / 2 on K x K
// away from the diagonal, with Morse data and genericity diagnostics.

#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "conormal/geometry.hpp"

namespace conormal::chords {

using geometry::ChartedManifold;
using geometry::ManifoldPoint;
using geometry::Mat;
using geometry::Vec;

struct SolverConfig {
    int gridPerDim = 0;             // samples per chart coordinate for starts; 0 = automatic
    long long maxStarts = 1000000;  // stratified subsample above this
    double dedupRadius = 1e-6;      // ambient product metric
    double residualTol = 1e-10;
    double nullBand = 1e-7;
    int maxNewton = 80;
    int threads = 0;                // 0 = hardware concurrency
};

struct BinormalChord {
    int id = -1;
    ManifoldPoint p, pp;  // chart coordinates of q and q'
    Vec q, qp;
    double energy = 0.0;
    double length = 0.0;
    int index = -1;
    int nullity = 0;
    std::vector<double> spectrum;  // generalized eigenvalues w.r.t. the pullback metric
    int fdIndex = -1;              // index of the finite-difference Hessian
    double residual = 0.0;         // max of |P_T (q - q')|, |P_T' (q - q')|
    int swapId = -1;

    bool nondegenerate() const { return nullity == 0; }
};

struct SolverTelemetry {
    long long starts = 0;
    long long converged = 0;
    long long diverged = 0;
    long long diagonal = 0;
    long long merges = 0;
    double worstResidual = 0.0;
};

struct ChordSet {
    std::string manifold;
    int codim = 0;
    std::vector<BinormalChord> chords;
    SolverTelemetry telemetry;

    bool allNondegenerate() const;
    double minEnergy() const;
    // Chords of the given Morse index, in basis order.
    std::vector<int> ofIndex(int index) const;
    nlohmann::json toJson() const;
};

// Gradient and Hessian of E in the chart coordinates (u, u') of a pair.
struct EnergyJet {
    double E = 0.0;
    Vec grad;
    Mat hess;
    Mat metric;  // block-diagonal pullback metric
    Vec q, qp;
    Mat J, Jp;
};
EnergyJet energyJet(const ChartedManifold& k, const ManifoldPoint& p, const ManifoldPoint& pp, int order = 2);

// Polishes one start by damped Newton on grad E = 0.
std::optional<BinormalChord> refineChord(const ChartedManifold& k, ManifoldPoint p, ManifoldPoint pp,
                                         const SolverConfig& cfg);

ChordSet findChords(const ChartedManifold& k, const SolverConfig& cfg = {});

// Signature of the Hessian of E relative to the pullback metric, and the
// index of a central-difference Hessian for cross-validation.
struct HessianData {
    int index = 0;
    int nullity = 0;
    std::vector<double> spectrum;
    int fdIndex = 0;
};
HessianData hessianIndex(const ChartedManifold& k, const BinormalChord& c, double nullBand = 1e-7);

// |a| = ind + d - 2; throws HypothesisError on degenerate chords.
int reebDegree(const BinormalChord& c, int d);

struct StarReport {
    bool holds = true;
    std::optional<int> minDegree;
    int witness = -1;  // chord id of minimal degree
    std::string message;
};
StarReport checkStar(const ChordSet& s, int d);

// ----------------------------------------------------------- admissibility

// One transversality spot check: smallest singular value of the relevant
// differential at a detected solution.
struct RankCheck {
    std::string where;
    double minSingular = 0.0;
    bool ok = false;
};

// Evidence for conditions (3)-(6) produced by the flow and coproduct stages.
struct AdmissibilityEvidence {
    std::vector<RankCheck> evTransversality;        // (3)
    std::optional<bool> morseSmaleStable;           // (4) counts stable under metric jitter
    std::vector<RankCheck> unstableTransversality;  // (5)
    std::vector<RankCheck> splitTransversality;     // (6)
};

struct AdmissibilityReport {
    // nullopt: not evaluated (no evidence supplied).
    std::optional<bool> flags[6];
    std::vector<std::string> notes;
    double minLineReturnDistance = 0.0;  // closest approach of chord lines to K away from the ends
    double minLineSeparation = 0.0;      // min distance between lines of distinct unordered chords
    bool allPass() const;
    nlohmann::json toJson() const;
};

AdmissibilityReport admissibilityReport(const ChartedManifold& k, const ChordSet& s,
                                        const AdmissibilityEvidence& ev = {});

// Distance between the line through a0, a1 and the line through b0, b1.
double lineLineDistance(const Vec& a0, const Vec& a1, const Vec& b0, const Vec& b1);

}  // namespace conormal::chords
