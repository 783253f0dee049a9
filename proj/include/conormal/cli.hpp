#pragma once

// Scenario files, pipeline orchestration and report bundles for the
// conormal command-line tool.

#include <map>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "conormal/strops.hpp"

namespace conormal::cli {

// ------------------------------------------------------------------ config

// Parses the TOML subset used by scenario files: [tables] and [a.b] headers,
// key = value with strings, integers, floats, booleans and flat arrays, and
// # comments.  Throws ConfigError with the line number on anything else.
nlohmann::json parseToml(const std::string& text);

// Every numerical threshold of a run, overridable from a [tolerances] block.
struct Tolerances {
    double chordResidual = 1e-10;  // Newton stop for binormal chords
    double chordDedup = 1e-6;      // merge radius for chords
    double nullBand = 1e-7;        // |eigenvalue| below this counts as null
    double locusResidual = 1e-12;  // Newton stop for ev_c(z, tau) = K_sigma
    double hFloor = 1e-6;          // drop locus points with tau (1 - tau) E below this
    double position = 1e-6;        // reproduction checks on (theta, tau) and split points
    double k0Clearance = 0.01;     // required sampled distance from ev images to K_{0,sigma}
    double tau0Margin = 0.1;       // relative margin of tau0 below sqrt(2 eps0) / diameter
    double jitter = 1e-3;          // metric jitter amplitude for stability checks

    static Tolerances fromJson(const nlohmann::json& j);
    nlohmann::json toJson() const;
};

struct PerturbationSpec {
    std::string kind = "none";  // none | fourier
    unsigned seed = 1;
    double amplitude = 0.1;
    int modes = 3;
    double wavenumber = 1.5;
};

struct MetricSpecConfig {
    unsigned gSeed = 7;
    unsigned gpSeed = 11;
    double amplitude = 0.3;
    int bumps = 5;
};

struct Scenario {
    std::string name = "scenario";
    std::string manifold = "hopf";  // circle | hopf | ellipsoid | torus | sphere | trefoil | k0 | k1
    std::map<std::string, double> params;  // builder parameters (radii, n, d, ...)
    PerturbationSpec perturbation;
    MetricSpecConfig metric;
    std::string route = "morse";    // morse | geometric | algebra
    int gridPerDim = 0;             // chord solver starts; 0 = automatic
    unsigned seed = 1;
    std::string outDir;
    bool svg = false;
    bool lch = false;
    Tolerances tol;

    static Scenario fromJson(const nlohmann::json& j);
    static Scenario load(const std::string& path);
    nlohmann::json toJson() const;
    // FNV-1a hash of the canonical JSON form, as 16 hex digits.
    std::string hash() const;
};

// ------------------------------------------------------------------ reports

struct Report {
    std::string verb;
    nlohmann::json json = nlohmann::json::object();
    std::map<std::string, std::string> csv;  // file name -> content
    std::map<std::string, std::string> svg;
    int exitCode = 0;

    // Writes report.json, the CSV and SVG files into dir (created if needed).
    void write(const std::string& dir) const;
};

// ---------------------------------------------------------------- pipeline

// The manifold of a scenario, perturbed per its perturbation block.  When the
// section violates its reach bound or (with requireNondegenerate) leaves
// degenerate chords, the seed is advanced, at most 32 times, before
// HypothesisError surfaces.  Unperturbed scenarios get a single attempt.
struct PreparedManifold {
    geometry::ChartedManifold k;
    chords::ChordSet chords;
    unsigned seedUsed = 0;
    int attempts = 0;
};
PreparedManifold prepare(const Scenario& s, bool requireNondegenerate = true);
// The unperturbed manifold of a scenario.
geometry::ChartedManifold baseManifold(const Scenario& s);

Report runChords(const Scenario& s);
Report runMorse(const Scenario& s);
Report runCoproduct(const Scenario& s);
// Morse route against geometric route on a multi-component curve.
Report runCompare(const Scenario& s);
// Admissibility, star condition and route gates; exitCode 2 on failure.
Report validate(const Scenario& s);

struct HopfReproOptions {
    bool svg = false;
};
Report reproHopf(const HopfReproOptions& opt, const Tolerances& tol = {});

struct K0K1ReproOptions {
    int n = 9, d = 4;
    std::string M = "T2";
    bool lch = false;
    int qGrid = 8;
    unsigned seed = 1;
};
Report reproK0K1(const K0K1ReproOptions& opt, const Tolerances& tol = {});

// ---------------------------------------------------------------------- svg

// Orthographic projection to the (x, y) plane of a curve set with chords.
std::string chordDiagramSvg(const geometry::ChartedManifold& k, const chords::ChordSet& s);
// The parameter square P x [0, 1] of a one-dimensional cycle with its locus.
std::string locusSvg(const strops::IntersectionLocus& l);

}  // namespace conormal::cli
